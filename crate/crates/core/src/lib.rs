//! Numerical laboratory for the Bogoliubov excitation spectrum of the
//! mean-field Bose gas on the unit torus.
//!
//! The crate computes Bogoliubov predictions (dispersion, ground-state
//! correction, lowest energy per momentum sector) and checks them against
//! exact diagonalization of the N-body Hamiltonian in momentum-sector Fock
//! bases.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]
#![cfg_attr(test, allow(clippy::excessive_precision))]

pub mod bogoliubov;
pub mod eigensolver;
pub mod error;
pub mod fock;
pub mod hamiltonian;
pub mod harness;
pub mod lattice;
pub mod potential;
pub mod sector;

pub use error::{Error, Result};
