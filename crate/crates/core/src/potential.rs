//! Periodic pair potentials given by finite tables of Fourier coefficients.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{graded_cmp, MomentumMode, TWO_PI};

/// Interaction `v` on the unit torus, stored through its coefficients `v̂(p)`.
///
/// Modes absent from the table have `v̂ = 0`. The table always holds the zero
/// mode, is symmetric under `p → -p` bit-for-bit and has no negative entries.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    dim: usize,
    coeffs: BTreeMap<MomentumMode, f64>,
    // graded order, used for every sum over the table
    ordered: Vec<(MomentumMode, f64)>,
    vzero: f64,
}

/// Validates a coefficient table and builds the potential.
pub fn make_potential(dim: usize, entries: Vec<(MomentumMode, f64)>) -> Result<Potential> {
    if dim == 0 {
        return Err(Error::ZeroDimension);
    }
    let mut coeffs = BTreeMap::new();
    for (mode, value) in entries {
        if mode.dim() != dim {
            return Err(Error::DimensionMismatch {
                got: mode.dim(),
                mode,
                expected: dim,
            });
        }
        if !value.is_finite() || value < 0.0 {
            return Err(Error::InvalidCoefficient(mode));
        }
        if coeffs.contains_key(&mode) {
            return Err(Error::DuplicateMode(mode));
        }
        coeffs.insert(mode, value);
    }
    for (mode, value) in &coeffs {
        match coeffs.get(&mode.neg()) {
            Some(mirror) if mirror.to_bits() == value.to_bits() => {}
            _ => return Err(Error::AsymmetricTable(mode.clone())),
        }
    }
    coeffs.entry(MomentumMode::zero(dim)).or_insert(0.0);

    let mut ordered: Vec<(MomentumMode, f64)> =
        coeffs.iter().map(|(m, v)| (m.clone(), *v)).collect();
    ordered.sort_by(|a, b| graded_cmp(&a.0, &b.0));
    let vzero = ordered.iter().map(|(_, v)| v).sum();

    Ok(Potential {
        dim,
        coeffs,
        ordered,
        vzero,
    })
}

impl Potential {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `v̂(p)` for `p = 2π·mode`; zero outside the table.
    pub fn coeff(&self, mode: &MomentumMode) -> f64 {
        self.coeffs.get(mode).copied().unwrap_or(0.0)
    }

    /// `v̂(0)`
    pub fn vhat_zero(&self) -> f64 {
        self.coeff(&MomentumMode::zero(self.dim))
    }

    /// `v(0) = Σ_p v̂(p)`, which is also `sup_x v(x)`.
    pub fn vzero(&self) -> f64 {
        self.vzero
    }

    /// All stored coefficients in graded order, zero mode first.
    pub fn entries(&self) -> &[(MomentumMode, f64)] {
        &self.ordered
    }

    /// Nonzero modes carrying a strictly positive coefficient.
    pub fn support(&self) -> impl Iterator<Item = (&MomentumMode, f64)> {
        self.ordered
            .iter()
            .filter(|(m, v)| !m.is_zero() && *v > 0.0)
            .map(|(m, v)| (m, *v))
    }

    /// Largest `|m_i|` over the stored modes.
    pub fn max_mode_coordinate(&self) -> i32 {
        self.ordered
            .iter()
            .map(|(m, _)| m.max_abs())
            .max()
            .unwrap_or(0)
    }

    /// `v(x) = Σ_p v̂(p) cos(p·x)`; the sine parts cancel pairwise.
    pub fn v_at(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        self.ordered
            .iter()
            .map(|(m, v)| {
                let phase: f64 = m
                    .coords()
                    .iter()
                    .zip(x)
                    .map(|(&c, &xi)| TWO_PI * f64::from(c) * xi)
                    .sum();
                v * phase.cos()
            })
            .sum()
    }

    /// Minimum of `v` over the uniform grid with `points_per_axis` points per
    /// axis, returned with the grid point attaining it.
    pub fn sampled_minimum(&self, points_per_axis: usize) -> (Vec<f64>, f64) {
        let n = points_per_axis.max(1);
        let total = n.pow(self.dim as u32);
        let mut best = (vec![0.0; self.dim], f64::INFINITY);
        let mut x = vec![0.0; self.dim];
        for flat in 0..total {
            let mut rest = flat;
            for xi in x.iter_mut() {
                *xi = (rest % n) as f64 / n as f64;
                rest /= n;
            }
            let value = self.v_at(&x);
            if value < best.1 {
                best = (x.clone(), value);
            }
        }
        best
    }

    /// Fails if `v` is negative (beyond rounding) anywhere on the sample grid.
    pub fn check_sampled_positive(&self, points_per_axis: usize) -> Result<()> {
        let (x, value) = self.sampled_minimum(points_per_axis);
        if value < -1e-12 * self.vzero.max(1.0) {
            return Err(Error::NegativePotential { x, value });
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: PotentialFile = serde_json::from_str(s)?;
        file.into_potential()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_file(&self) -> PotentialFile {
        PotentialFile {
            dim: self.dim,
            coeffs: self
                .ordered
                .iter()
                .map(|(m, v)| {
                    let mut row: Vec<f64> = m.coords().iter().map(|&c| f64::from(c)).collect();
                    row.push(*v);
                    row
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("potential serializes")
    }

    /// Constant interaction `v ≡ c`.
    pub fn constant(dim: usize, c: f64) -> Result<Self> {
        make_potential(dim, vec![(MomentumMode::zero(dim), c)])
    }

    /// `v(x) = 2 + 2cos(2πx)` in one dimension.
    pub fn default_example() -> Self {
        make_potential(
            1,
            vec![
                (MomentumMode::new(vec![0]), 2.0),
                (MomentumMode::new(vec![1]), 1.0),
                (MomentumMode::new(vec![-1]), 1.0),
            ],
        )
        .expect("valid table")
    }

    /// `v(x) = 4 + 4cos(2πx) + 2cos(4πx)` in one dimension.
    pub fn strong_coupling() -> Self {
        make_potential(
            1,
            vec![
                (MomentumMode::new(vec![0]), 4.0),
                (MomentumMode::new(vec![1]), 2.0),
                (MomentumMode::new(vec![-1]), 2.0),
                (MomentumMode::new(vec![2]), 1.0),
                (MomentumMode::new(vec![-2]), 1.0),
            ],
        )
        .expect("valid table")
    }
}

/// On-disk form: `{"dim": d, "coeffs": [[m_1, ..., m_d, value], ...]}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PotentialFile {
    pub dim: usize,
    pub coeffs: Vec<Vec<f64>>,
}

impl PotentialFile {
    pub fn into_potential(self) -> Result<Potential> {
        let dim = self.dim;
        let entries = self
            .coeffs
            .into_iter()
            .map(|row| {
                if row.len() != dim + 1 {
                    return Err(Error::Parse(format!(
                        "coefficient row {row:?} should have {} entries",
                        dim + 1
                    )));
                }
                let coords = row[..dim]
                    .iter()
                    .map(|&c| {
                        if c.fract() != 0.0 || c.abs() > f64::from(i32::MAX) {
                            Err(Error::Parse(format!(
                                "mode coordinate {c} is not an integer"
                            )))
                        } else {
                            Ok(c as i32)
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((MomentumMode::new(coords), row[dim]))
            })
            .collect::<Result<Vec<_>>>()?;
        make_potential(dim, entries)
    }
}
