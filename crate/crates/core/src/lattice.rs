//! Momentum modes of the unit torus and finite mode sets.
//!
//! A mode is an integer vector `m`; the physical momentum is `2π m`.
//! Mode sets are kept in graded lexicographic order (by `|m|²`, then
//! lexicographically) so every basis and matrix built on top of them has a
//! fixed layout.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// `(2π)²`, the smallest nonzero value of `|p|²`.
pub const TWO_PI_SQ: f64 = TWO_PI * TWO_PI;

/// Integer lattice vector `m`; the physical momentum is `p = 2π m`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MomentumMode(Vec<i32>);

impl MomentumMode {
    pub fn new(coords: Vec<i32>) -> Self {
        MomentumMode(coords)
    }

    pub fn zero(dim: usize) -> Self {
        MomentumMode(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i32] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    /// Squared integer norm `|m|²`.
    pub fn norm2(&self) -> i64 {
        self.0.iter().map(|&c| i64::from(c) * i64::from(c)).sum()
    }

    pub fn max_abs(&self) -> i32 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    pub fn neg(&self) -> Self {
        MomentumMode(self.0.iter().map(|c| -c).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim(), other.dim());
        MomentumMode(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim(), other.dim());
        MomentumMode(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, k: i32) -> Self {
        MomentumMode(self.0.iter().map(|c| c * k).collect())
    }

    pub fn dot(&self, other: &Self) -> i64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| i64::from(a) * i64::from(b))
            .sum()
    }

    /// `p = 2π m` componentwise.
    pub fn physical_momentum(&self) -> Vec<f64> {
        self.0.iter().map(|&c| TWO_PI * f64::from(c)).collect()
    }

    /// `|p|² = (2π)² |m|²`.
    pub fn physical_norm2(&self) -> f64 {
        TWO_PI_SQ * self.norm2() as f64
    }
}

impl fmt::Display for MomentumMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.len() == 1 {
            return write!(f, "{}", self.0[0]);
        }
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Debug for MomentumMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m{self}")
    }
}

impl FromStr for MomentumMode {
    type Err = Error;

    /// Parses `"1"`, `"1,-2"` or `"(1,-2)"`.
    fn from_str(s: &str) -> Result<Self> {
        let trimmed = s.trim().trim_start_matches('(').trim_end_matches(')');
        let coords = trimmed
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<i32>()
                    .map_err(|_| Error::Parse(format!("bad mode coordinate {t:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if coords.is_empty() {
            return Err(Error::ZeroDimension);
        }
        Ok(MomentumMode(coords))
    }
}

/// Graded lexicographic order: by `|m|²`, ties broken lexicographically.
pub fn graded_cmp(a: &MomentumMode, b: &MomentumMode) -> Ordering {
    a.norm2().cmp(&b.norm2()).then_with(|| a.cmp(b))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    /// `|m|² ≤ Λ²`
    #[default]
    Ball,
    /// `max_i |m_i| ≤ Λ`
    Box,
}

impl FromStr for Geometry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ball" => Ok(Geometry::Ball),
            "box" => Ok(Geometry::Box),
            other => Err(Error::Parse(format!("unknown geometry {other:?}"))),
        }
    }
}

/// Ordered, indexed set of momentum modes.
#[derive(Clone, Debug)]
pub struct ModeSet {
    dim: usize,
    modes: Vec<MomentumMode>,
    index: HashMap<MomentumMode, usize>,
}

impl PartialEq for ModeSet {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.modes == other.modes
    }
}

impl ModeSet {
    /// Builds a set from arbitrary modes; duplicates are merged and the
    /// result is put in graded order. Unlike [`modes_within`], this does not
    /// require the zero mode or closure under negation (shifted sets used by
    /// the boost check violate both).
    pub fn from_modes<I>(dim: usize, modes: I) -> Result<Self>
    where
        I: IntoIterator<Item = MomentumMode>,
    {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        let mut modes: Vec<MomentumMode> = modes.into_iter().collect();
        for m in &modes {
            if m.dim() != dim {
                return Err(Error::DimensionMismatch {
                    mode: m.clone(),
                    expected: dim,
                    got: m.dim(),
                });
            }
        }
        modes.sort_by(graded_cmp);
        modes.dedup();
        let index = modes
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        Ok(ModeSet { dim, modes, index })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[MomentumMode] {
        &self.modes
    }

    pub fn iter(&self) -> impl Iterator<Item = &MomentumMode> {
        self.modes.iter()
    }

    pub fn get(&self, i: usize) -> &MomentumMode {
        &self.modes[i]
    }

    pub fn index_of(&self, mode: &MomentumMode) -> Option<usize> {
        self.index.get(mode).copied()
    }

    pub fn contains(&self, mode: &MomentumMode) -> bool {
        self.index.contains_key(mode)
    }

    pub fn zero_index(&self) -> Option<usize> {
        self.index_of(&MomentumMode::zero(self.dim))
    }

    pub fn is_negation_closed(&self) -> bool {
        self.modes.iter().all(|m| self.contains(&m.neg()))
    }

    /// Every mode translated by `q`.
    pub fn shifted(&self, q: &MomentumMode) -> Result<Self> {
        ModeSet::from_modes(self.dim, self.modes.iter().map(|m| m.add(q)))
    }
}

/// All modes within the integer cutoff `Λ` (ball: `|m|² ≤ Λ²`, box:
/// `max_i |m_i| ≤ Λ`).
pub fn modes_within(dim: usize, cutoff: u32, geometry: Geometry) -> Result<ModeSet> {
    if dim == 0 {
        return Err(Error::ZeroDimension);
    }
    let lambda = cutoff as i32;
    let lambda_sq = i64::from(lambda) * i64::from(lambda);
    let mut out = Vec::new();
    let mut cur = vec![-lambda; dim];
    loop {
        let mode = MomentumMode(cur.clone());
        let keep = match geometry {
            Geometry::Box => true,
            Geometry::Ball => mode.norm2() <= lambda_sq,
        };
        if keep {
            out.push(mode);
        }
        // odometer increment over the box [-Λ, Λ]^d
        let mut axis = dim;
        loop {
            if axis == 0 {
                return ModeSet::from_modes(dim, out);
            }
            axis -= 1;
            if cur[axis] < lambda {
                cur[axis] += 1;
                break;
            }
            cur[axis] = -lambda;
        }
    }
}

/// Integer vectors in the box `max_i |m_i| ≤ radius`, including zero.
pub(crate) fn box_points(dim: usize, radius: i32) -> Vec<MomentumMode> {
    modes_within(dim, radius.max(0) as u32, Geometry::Box)
        .map(|s| s.modes)
        .unwrap_or_default()
}
