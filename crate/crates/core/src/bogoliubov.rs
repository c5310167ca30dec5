//! Bogoliubov dispersion, quasiparticle parameters and the ground-state
//! correction `E^Bog` with a certified truncation tail.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::lattice::{ModeSet, MomentumMode};
use crate::potential::Potential;

/// Excitation energy `e_p = √(|p|⁴ + 2|p|² v̂(p))` for `p = 2π·mode`.
pub fn dispersion(pot: &Potential, mode: &MomentumMode) -> Result<f64> {
    if mode.is_zero() {
        return Err(Error::ZeroMode);
    }
    Ok(excitation_energy(mode.physical_norm2(), pot.coeff(mode)))
}

// |p|·√(|p|² + 2v̂) avoids forming |p|⁴
fn excitation_energy(p2: f64, vhat: f64) -> f64 {
    p2.sqrt() * (p2 + 2.0 * vhat).sqrt()
}

/// Per-mode Bogoliubov data.
#[derive(Clone, Debug, PartialEq)]
pub struct Quasiparticle {
    pub mode: MomentumMode,
    /// `|p|²`
    pub p2: f64,
    /// `A_p = |p|² + v̂(p)`
    pub a: f64,
    /// `B_p = v̂(p)`
    pub b: f64,
    /// `e_p = √(A_p² − B_p²)`
    pub e: f64,
    /// `α_p`, with `tanh(2β_p) = α_p`
    pub alpha: f64,
    pub beta: f64,
}

impl Quasiparticle {
    fn new(pot: &Potential, mode: &MomentumMode) -> Self {
        let p2 = mode.physical_norm2();
        let b = pot.coeff(mode);
        let a = p2 + b;
        let e = excitation_energy(p2, b);
        // (A − e)/B rewritten as B/(A + e); no cancellation
        let alpha = if b > 0.0 { b / (a + e) } else { 0.0 };
        assert!(alpha < 1.0, "alpha_p = {alpha} for mode {mode}");
        Quasiparticle {
            mode: mode.clone(),
            p2,
            a,
            b,
            e,
            alpha,
            beta: 0.5 * alpha.atanh(),
        }
    }

    /// `½(A_p − e_p) = ½ B_p²/(A_p + e_p)`, the magnitude of this mode's
    /// contribution to `E^Bog`.
    pub fn energy_shift(&self) -> f64 {
        0.5 * self.b * self.b / (self.a + self.e)
    }
}

/// Quasiparticle data for every nonzero mode of a mode set, in its order.
#[derive(Clone, Debug)]
pub struct QuasiparticleTable {
    entries: Vec<Quasiparticle>,
    index: BTreeMap<MomentumMode, usize>,
    dim: usize,
}

impl QuasiparticleTable {
    pub fn entries(&self) -> &[Quasiparticle] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, mode: &MomentumMode) -> Option<&Quasiparticle> {
        self.index.get(mode).map(|&i| &self.entries[i])
    }

    /// Smallest excitation energy in the table.
    pub fn min_energy(&self) -> Option<f64> {
        self.entries.iter().map(|q| q.e).min_by(f64::total_cmp)
    }
}

pub fn quasiparticle_table(pot: &Potential, modes: &ModeSet) -> Result<QuasiparticleTable> {
    if pot.dim() != modes.dim() {
        return Err(Error::DimensionMismatch {
            mode: MomentumMode::zero(modes.dim()),
            expected: pot.dim(),
            got: modes.dim(),
        });
    }
    let entries: Vec<Quasiparticle> = modes
        .iter()
        .filter(|m| !m.is_zero())
        .map(|m| Quasiparticle::new(pot, m))
        .collect();
    let index = entries
        .iter()
        .enumerate()
        .map(|(i, q)| (q.mode.clone(), i))
        .collect();
    Ok(QuasiparticleTable {
        entries,
        index,
        dim: modes.dim(),
    })
}

/// Truncated `E^Bog` together with a bound on the omitted part.
#[derive(Clone, Debug, PartialEq)]
pub struct BogoliubovSummary {
    /// `−½ Σ_{p ∈ set, p ≠ 0} (A_p − e_p)`
    pub ebog_truncated: f64,
    /// Upper bound on `|E^Bog − ebog_truncated|`.
    pub tail_bound: f64,
    pub mode_set: ModeSet,
}

/// Partial Bogoliubov sum over `modes` plus the tail bound.
///
/// Each omitted term satisfies `½(A_p − e_p) = ½B_p²/(A_p + e_p) ≤
/// v̂(p)²/(4|p|²)` because `A_p, e_p ≥ |p|²`; only modes in the (finite)
/// potential support contribute. Terms are accumulated in the set's graded
/// order.
pub fn bogoliubov_energy(pot: &Potential, modes: &ModeSet) -> Result<BogoliubovSummary> {
    let table = quasiparticle_table(pot, modes)?;
    let ebog_truncated = table
        .entries()
        .iter()
        .fold(0.0, |acc, q| acc - q.energy_shift());
    let tail_bound = pot
        .support()
        .filter(|(m, _)| !modes.contains(m))
        .fold(0.0, |acc, (m, v)| acc + v * v / (4.0 * m.physical_norm2()));
    Ok(BogoliubovSummary {
        ebog_truncated,
        tail_bound,
        mode_set: modes.clone(),
    })
}

/// Energy `Σ e_p n_p` and momentum `Σ m_p n_p` of a quasiparticle
/// configuration.
pub fn predicted_level(
    table: &QuasiparticleTable,
    occupations: &BTreeMap<MomentumMode, u32>,
) -> Result<(f64, MomentumMode)> {
    let mut energy = 0.0;
    let mut momentum = MomentumMode::zero(table.dim());
    for (mode, &n) in occupations {
        if n == 0 {
            continue;
        }
        let q = table
            .get(mode)
            .ok_or_else(|| Error::ModeNotInSet(mode.clone()))?;
        energy += q.e * f64::from(n);
        momentum = momentum.add(&mode.scale(n as i32));
    }
    Ok((energy, momentum))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{modes_within, Geometry, TWO_PI_SQ};

    fn m(c: i32) -> MomentumMode {
        MomentumMode::new(vec![c])
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    // reference values from 40-digit arithmetic
    const E_ONE: f64 = 40.466063457578300;
    const ALPHA_ONE: f64 = 0.012354146779134168;
    const BETA_ONE: f64 = 0.0061773876768390215;

    #[test]
    fn dispersion_values() {
        let free = Potential::constant(1, 1.0).unwrap();
        assert!(rel(dispersion(&free, &m(1)).unwrap(), TWO_PI_SQ) < 1e-15);
        let pot = Potential::default_example();
        assert!(rel(dispersion(&pot, &m(1)).unwrap(), E_ONE) < 1e-15);
        assert!(matches!(dispersion(&pot, &m(0)), Err(Error::ZeroMode)));
    }

    #[test]
    fn table_values() {
        let pot = Potential::default_example();
        let set = modes_within(1, 2, Geometry::Ball).unwrap();
        let table = quasiparticle_table(&pot, &set).unwrap();
        assert_eq!(table.entries().len(), 4);
        let q = table.get(&m(1)).unwrap();
        assert!(rel(q.a, 40.478417604357434) < 1e-15);
        assert!(rel(q.alpha, ALPHA_ONE) < 1e-13);
        assert!(rel(q.beta, BETA_ONE) < 1e-13);
        // the textbook form (A − e)/B agrees with the stable one
        assert!(rel((q.a - q.e) / q.b, q.alpha) < 1e-12);

        let free_mode = table.get(&m(2)).unwrap();
        assert_eq!(free_mode.alpha, 0.0);
        assert_eq!(free_mode.beta, 0.0);
        assert_eq!(free_mode.e, free_mode.p2);
    }

    #[test]
    fn single_shell_energy() {
        let pot = Potential::default_example();
        let set = modes_within(1, 3, Geometry::Ball).unwrap();
        let s = bogoliubov_energy(&pot, &set).unwrap();
        assert!(rel(s.ebog_truncated, -ALPHA_ONE) < 1e-12);
        assert_eq!(s.tail_bound, 0.0);

        let origin = modes_within(1, 0, Geometry::Ball).unwrap();
        let s = bogoliubov_energy(&pot, &origin).unwrap();
        assert_eq!(s.ebog_truncated, 0.0);
        assert!(rel(s.tail_bound, 0.012665147955292222) < 1e-14);
        assert!(s.tail_bound >= ALPHA_ONE);
    }

    #[test]
    fn constant_potential_has_no_correction() {
        let pot = Potential::constant(2, 3.0).unwrap();
        let set = modes_within(2, 2, Geometry::Box).unwrap();
        let s = bogoliubov_energy(&pot, &set).unwrap();
        assert_eq!(s.ebog_truncated, 0.0);
        assert_eq!(s.tail_bound, 0.0);
    }

    #[test]
    fn predicted_levels() {
        let pot = Potential::default_example();
        let set = modes_within(1, 2, Geometry::Ball).unwrap();
        let table = quasiparticle_table(&pot, &set).unwrap();

        let (e, p) = predicted_level(&table, &BTreeMap::new()).unwrap();
        assert_eq!((e, p), (0.0, m(0)));

        let (e, p) = predicted_level(&table, &BTreeMap::from([(m(1), 1)])).unwrap();
        assert!(rel(e, E_ONE) < 1e-15);
        assert_eq!(p, m(1));

        let (e, p) = predicted_level(&table, &BTreeMap::from([(m(1), 1), (m(-1), 1)])).unwrap();
        assert!(rel(e, 80.932126915156601) < 1e-15);
        assert_eq!(p, m(0));

        assert!(matches!(
            predicted_level(&table, &BTreeMap::from([(m(5), 1)])),
            Err(Error::ModeNotInSet(_))
        ));
    }
}
