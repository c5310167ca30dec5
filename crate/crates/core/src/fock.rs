//! Occupation-number bases for N bosons on a finite mode set, restricted to
//! one total-momentum sector.

use std::cmp::Ordering;
use std::io::Write;

use crate::error::{Error, Result};
use crate::lattice::{ModeSet, MomentumMode, TWO_PI_SQ};

pub const DEFAULT_BASIS_GUARD: usize = 200_000;

/// Occupation numbers `n_q`, indexed by the mode set's ordinals.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FockState<'a>(&'a [u16]);

impl<'a> FockState<'a> {
    pub fn occupations(&self) -> &'a [u16] {
        self.0
    }

    pub fn particle_number(&self) -> usize {
        self.0.iter().map(|&n| usize::from(n)).sum()
    }

    pub fn momentum(&self, modes: &ModeSet) -> MomentumMode {
        self.0
            .iter()
            .zip(modes.iter())
            .fold(MomentumMode::zero(modes.dim()), |acc, (&n, m)| {
                acc.add(&m.scale(i32::from(n)))
            })
    }
}

/// All `N`-particle occupation vectors with a given total momentum, in
/// ascending lexicographic order of the occupation vector.
#[derive(Clone, Debug)]
pub struct FockBasis {
    modes: ModeSet,
    n_particles: usize,
    sector: MomentumMode,
    // row-major, `modes.len()` entries per state
    states: Vec<u16>,
}

/// Enumerates the sector basis with the default size guard.
pub fn enumerate_basis(modes: &ModeSet, n: usize, sector: &MomentumMode) -> Result<FockBasis> {
    enumerate_basis_with_guard(modes, n, sector, DEFAULT_BASIS_GUARD)
}

pub fn enumerate_basis_with_guard(
    modes: &ModeSet,
    n: usize,
    sector: &MomentumMode,
    guard: usize,
) -> Result<FockBasis> {
    if n < 2 {
        return Err(Error::TooFewParticles(n));
    }
    if n > usize::from(u16::MAX) {
        return Err(Error::InvalidSetting(format!(
            "{n} particles exceed the occupation range"
        )));
    }
    if sector.dim() != modes.dim() {
        return Err(Error::DimensionMismatch {
            mode: sector.clone(),
            expected: modes.dim(),
            got: sector.dim(),
        });
    }
    let mut builder = Builder::new(modes, guard);
    if !modes.is_empty() {
        let target: Vec<i64> = sector.coords().iter().map(|&c| i64::from(c)).collect();
        let mut occ = vec![0u16; modes.len()];
        builder.descend(0, n as i64, &target, &mut occ)?;
    }
    Ok(FockBasis {
        modes: modes.clone(),
        n_particles: n,
        sector: sector.clone(),
        states: builder.states,
    })
}

struct Builder {
    coords: Vec<Vec<i64>>,
    // per suffix start and axis: (min, max) coordinate over modes[j..]
    suffix_range: Vec<Vec<(i64, i64)>>,
    guard: usize,
    width: usize,
    states: Vec<u16>,
}

impl Builder {
    fn new(modes: &ModeSet, guard: usize) -> Self {
        let coords: Vec<Vec<i64>> = modes
            .iter()
            .map(|m| m.coords().iter().map(|&c| i64::from(c)).collect())
            .collect();
        let dim = modes.dim();
        let mut suffix_range = vec![vec![(i64::MAX, i64::MIN); dim]; coords.len() + 1];
        for j in (0..coords.len()).rev() {
            for axis in 0..dim {
                let (lo, hi) = suffix_range[j + 1][axis];
                let c = coords[j][axis];
                suffix_range[j][axis] = (lo.min(c), hi.max(c));
            }
        }
        Builder {
            coords,
            suffix_range,
            guard,
            width: modes.len(),
            states: Vec::new(),
        }
    }

    /// Can `remaining` particles on modes `j..` carry momentum `target`?
    fn reachable(&self, j: usize, remaining: i64, target: &[i64]) -> bool {
        if remaining == 0 {
            return target.iter().all(|&t| t == 0);
        }
        if j == self.width {
            return false;
        }
        self.suffix_range[j]
            .iter()
            .zip(target)
            .all(|(&(lo, hi), &t)| remaining * lo <= t && t <= remaining * hi)
    }

    fn descend(&mut self, j: usize, remaining: i64, target: &[i64], occ: &mut [u16]) -> Result<()> {
        if j + 1 == self.width {
            if self.coords[j]
                .iter()
                .zip(target)
                .all(|(&c, &t)| c * remaining == t)
            {
                occ[j] = remaining as u16;
                if self.states.len() / self.width.max(1) >= self.guard {
                    return Err(Error::BasisTooLarge { guard: self.guard });
                }
                self.states.extend_from_slice(occ);
                occ[j] = 0;
            }
            return Ok(());
        }
        let mut rest: Vec<i64> = target.to_vec();
        for k in 0..=remaining {
            if self.reachable(j + 1, remaining - k, &rest) {
                occ[j] = k as u16;
                self.descend(j + 1, remaining - k, &rest, occ)?;
            }
            for (r, c) in rest.iter_mut().zip(&self.coords[j]) {
                *r -= c;
            }
        }
        occ[j] = 0;
        Ok(())
    }
}

impl FockBasis {
    pub fn modes(&self) -> &ModeSet {
        &self.modes
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn sector(&self) -> &MomentumMode {
        &self.sector
    }

    pub fn dim(&self) -> usize {
        if self.modes.is_empty() {
            0
        } else {
            self.states.len() / self.modes.len()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.dim() == 0
    }

    pub fn state(&self, i: usize) -> FockState<'_> {
        let w = self.modes.len();
        FockState(&self.states[i * w..(i + 1) * w])
    }

    pub fn iter(&self) -> impl Iterator<Item = FockState<'_>> {
        self.states
            .chunks_exact(self.modes.len().max(1))
            .map(FockState)
    }

    /// Ordinal of an occupation vector (binary search over the sorted list).
    pub fn index_of(&self, occupations: &[u16]) -> Option<usize> {
        let w = self.modes.len();
        if occupations.len() != w || w == 0 {
            return None;
        }
        let (mut lo, mut hi) = (0usize, self.dim());
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.states[mid * w..(mid + 1) * w].cmp(occupations) {
                Ordering::Less => lo = mid + 1,
                Ordering::Greater => hi = mid,
                Ordering::Equal => return Some(mid),
            }
        }
        None
    }

    /// One occupation vector per row. Columns are labelled `n[m_1 m_2 ...]`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = self
            .modes
            .iter()
            .map(|m| {
                let coords: Vec<String> = m.coords().iter().map(|c| c.to_string()).collect();
                format!("n[{}]", coords.join(" "))
            })
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for s in self.iter() {
            let row: Vec<String> = s.occupations().iter().map(|n| n.to_string()).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Observable {
    /// `T = Σ_q |p_q|² n_q`
    Kinetic,
    /// `N^> = Σ_{q≠0} n_q`
    NExcited,
    /// `N^> · T`, both diagonal here
    NExcitedTimesKinetic,
}

/// Per-state values of a diagonal observable.
pub fn diagonal_observable(basis: &FockBasis, kind: Observable) -> Vec<f64> {
    let norms: Vec<u64> = basis.modes().iter().map(|m| m.norm2() as u64).collect();
    basis
        .iter()
        .map(|s| {
            let occ = s.occupations();
            // integer sums keep T ≥ (2π)² N^> exact
            let k2: u64 = occ
                .iter()
                .zip(&norms)
                .map(|(&n, &k)| u64::from(n) * k)
                .sum();
            let excited: u64 = occ
                .iter()
                .zip(&norms)
                .filter(|(_, &k)| k > 0)
                .map(|(&n, _)| u64::from(n))
                .sum();
            match kind {
                Observable::Kinetic => TWO_PI_SQ * k2 as f64,
                Observable::NExcited => excited as f64,
                Observable::NExcitedTimesKinetic => TWO_PI_SQ * (k2 * excited) as f64,
            }
        })
        .collect()
}

/// `Σ_i diagonal_i x_i²` for a normalized coefficient vector `x`.
pub fn expectation(basis: &FockBasis, vector: &[f64], diagonal: &[f64]) -> Result<f64> {
    let dim = basis.dim();
    for len in [vector.len(), diagonal.len()] {
        if len != dim {
            return Err(Error::LengthMismatch {
                expected: dim,
                got: len,
            });
        }
    }
    let norm2: f64 = vector.iter().map(|x| x * x).sum();
    if (norm2 - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(norm2));
    }
    Ok(vector.iter().zip(diagonal).map(|(x, d)| d * x * x).sum())
}
