//! Sparse symmetric matrices of `H_N` and of the number-conserving
//! Bogoliubov Hamiltonian on a momentum-sector Fock basis.
//!
//! In second quantization
//!
//! ```text
//! H_N   = Σ_p |p|² a†_p a_p + 1/(2(N−1)) Σ_{p,q,k} v̂(k) a†_{p+k} a†_{q−k} a_q a_p
//! H^Bog = Σ_{p≠0} [ (|p|² + v̂(p)) b†_p b_p + ½ v̂(p) (b†_p b†_{−p} + b_p b_{−p}) ]
//! ```
//!
//! with `b_p = a_p a†_0 / √(N−1)`. Scattering terms are kept only when all
//! four modes lie in the mode set, so the matrix is the compression of the
//! full operator onto the truncated space.
//!
//! Only the upper triangle (`row ≤ col`) is generated; each row stores its
//! diagonal entry first.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::FockBasis;
use crate::potential::Potential;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HamiltonianKind {
    FullHn,
    Bogoliubov,
}

#[derive(Clone, Debug)]
pub struct SparseHamiltonian {
    dim: usize,
    kind: HamiltonianKind,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

type Row = (f64, BTreeMap<usize, f64>);

fn check_inputs(basis: &FockBasis, pot: &Potential) -> Result<()> {
    if basis.modes().dim() != pot.dim() {
        return Err(Error::InvalidSetting(format!(
            "basis is {}-dimensional but the potential is {}-dimensional",
            basis.modes().dim(),
            pot.dim()
        )));
    }
    if basis.is_empty() {
        return Err(Error::InvalidSetting("empty basis".into()));
    }
    Ok(())
}

/// Number of ordered pairs `(p, q)` with nonzero `a_q a_p`, i.e.
/// `Σ_{p,q} n_p (n_q − δ_pq)`; equals `N(N−1)` on every state.
pub fn zero_transfer_pairs(occ: &[u16]) -> u64 {
    let mut pairs = 0u64;
    for (p, &np) in occ.iter().enumerate() {
        for (q, &nq) in occ.iter().enumerate() {
            pairs += u64::from(np) * (u64::from(nq) - u64::from(p == q && nq > 0));
        }
    }
    pairs
}

/// Assembles `H_N`.
pub fn build_hn(basis: &FockBasis, pot: &Potential) -> Result<SparseHamiltonian> {
    check_inputs(basis, pot)?;
    let modes = basis.modes();
    let n = basis.n_particles();
    let width = modes.len();
    let norms: Vec<u64> = modes.iter().map(|m| m.norm2() as u64).collect();
    let pref = 1.0 / (2.0 * (n as f64 - 1.0));
    let mean_field = n as f64 * pot.vhat_zero() / 2.0;

    // (v̂(k), index of m_a + k, index of m_a − k) for every k ≠ 0 in the support
    let transfers: Vec<(f64, Vec<Option<usize>>, Vec<Option<usize>>)> = pot
        .support()
        .map(|(k, v)| {
            let plus = modes.iter().map(|m| modes.index_of(&m.add(k))).collect();
            let minus = modes.iter().map(|m| modes.index_of(&m.sub(k))).collect();
            (v, plus, minus)
        })
        .collect();

    let rows: Vec<Result<Row>> = (0..basis.dim())
        .into_par_iter()
        .map(|i| {
            let occ = basis.state(i).occupations();
            debug_assert_eq!(zero_transfer_pairs(occ), (n * (n - 1)) as u64);
            let k2: u64 = occ
                .iter()
                .zip(&norms)
                .map(|(&c, &k)| u64::from(c) * k)
                .sum();
            let mut diag = crate::lattice::TWO_PI_SQ * k2 as f64 + mean_field;
            let mut off = BTreeMap::new();
            let mut work = occ.to_vec();
            for p in 0..width {
                if occ[p] == 0 {
                    continue;
                }
                for q in 0..width {
                    let nq = u64::from(occ[q]) - u64::from(p == q);
                    if nq == 0 {
                        continue;
                    }
                    let annihilate = u64::from(occ[p]) * nq;
                    work[p] -= 1;
                    work[q] -= 1;
                    for (v, plus, minus) in &transfers {
                        let (Some(r), Some(s)) = (plus[p], minus[q]) else {
                            continue;
                        };
                        let c1 = u64::from(work[s]) + 1;
                        work[s] += 1;
                        let c2 = u64::from(work[r]) + 1;
                        work[r] += 1;
                        let target = basis.index_of(&work);
                        work[r] -= 1;
                        work[s] -= 1;
                        let j = target.ok_or(Error::OutOfSector)?;
                        if j < i {
                            continue;
                        }
                        let value = pref * v * ((annihilate * c1 * c2) as f64).sqrt();
                        if j == i {
                            diag += value;
                        } else {
                            *off.entry(j).or_insert(0.0) += value;
                        }
                    }
                    work[p] += 1;
                    work[q] += 1;
                }
            }
            Ok((diag, off))
        })
        .collect();
    SparseHamiltonian::from_rows(HamiltonianKind::FullHn, rows)
}

/// Assembles the particle-number-conserving Bogoliubov Hamiltonian.
pub fn build_hbog(basis: &FockBasis, pot: &Potential) -> Result<SparseHamiltonian> {
    check_inputs(basis, pot)?;
    let modes = basis.modes();
    let zero = modes.zero_index().ok_or(Error::MissingZeroMode)?;
    let n = basis.n_particles();
    let denom = n as f64 - 1.0;

    // (mode index, |p|² + v̂(p), v̂(p), index of −p)
    let excited: Vec<(usize, f64, f64, Option<usize>)> = modes
        .iter()
        .enumerate()
        .filter(|(_, m)| !m.is_zero())
        .map(|(i, m)| {
            let v = pot.coeff(m);
            (i, m.physical_norm2() + v, v, modes.index_of(&m.neg()))
        })
        .collect();

    let rows: Vec<Result<Row>> = (0..basis.dim())
        .into_par_iter()
        .map(|i| {
            let occ = basis.state(i).occupations();
            let n0 = u64::from(occ[zero]);
            let mut diag = 0.0;
            let mut off = BTreeMap::new();
            let mut work = occ.to_vec();
            for &(p, a, v, minus) in &excited {
                // b†_p b_p = n_p (n_0 + 1)/(N − 1)
                diag += a * f64::from(occ[p]) * (n0 + 1) as f64 / denom;
                let Some(mp) = minus else { continue };
                if v == 0.0 {
                    continue;
                }
                let np = u64::from(occ[p]);
                let nm = u64::from(occ[mp]);
                // b†_p b†_{−p} = a†_p a†_{−p} a_0 a_0 / (N − 1)
                if n0 >= 2 {
                    let amp2 = n0 * (n0 - 1) * (nm + 1) * (np + 1);
                    work[zero] -= 2;
                    work[mp] += 1;
                    work[p] += 1;
                    let target = basis.index_of(&work);
                    work[zero] += 2;
                    work[mp] -= 1;
                    work[p] -= 1;
                    let j = target.ok_or(Error::OutOfSector)?;
                    if j > i {
                        *off.entry(j).or_insert(0.0) += 0.5 * v * (amp2 as f64).sqrt() / denom;
                    }
                }
                // b_p b_{−p} = a_p a_{−p} a†_0 a†_0 / (N − 1)
                if np >= 1 && nm >= 1 {
                    let amp2 = nm * np * (n0 + 1) * (n0 + 2);
                    work[zero] += 2;
                    work[mp] -= 1;
                    work[p] -= 1;
                    let target = basis.index_of(&work);
                    work[zero] -= 2;
                    work[mp] += 1;
                    work[p] += 1;
                    let j = target.ok_or(Error::OutOfSector)?;
                    if j > i {
                        *off.entry(j).or_insert(0.0) += 0.5 * v * (amp2 as f64).sqrt() / denom;
                    }
                }
            }
            Ok((diag, off))
        })
        .collect();
    SparseHamiltonian::from_rows(HamiltonianKind::Bogoliubov, rows)
}

impl SparseHamiltonian {
    fn from_rows(kind: HamiltonianKind, rows: Vec<Result<Row>>) -> Result<Self> {
        let dim = rows.len();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for (i, row) in rows.into_iter().enumerate() {
            let (diag, off) = row?;
            cols.push(i);
            vals.push(diag);
            for (j, v) in off {
                cols.push(j);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        let h = SparseHamiltonian {
            dim,
            kind,
            row_ptr,
            cols,
            vals,
        };
        debug_assert!(h.vals.iter().all(|v| v.is_finite()));
        Ok(h)
    }

    /// Builds a matrix from upper-triangle triplets; duplicates are summed and
    /// lower-triangle entries are mirrored.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows: Vec<Row> = (0..dim).map(|_| (0.0, BTreeMap::new())).collect();
        for &(r, c, v) in triplets {
            if r >= dim || c >= dim {
                return Err(Error::InvalidSetting(format!(
                    "entry ({r}, {c}) outside a {dim}x{dim} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidSetting(format!(
                    "entry ({r}, {c}) is not finite"
                )));
            }
            let (i, j) = if r <= c { (r, c) } else { (c, r) };
            if i == j {
                rows[i].0 += v;
            } else {
                *rows[i].1.entry(j).or_insert(0.0) += v;
            }
        }
        Self::from_rows(HamiltonianKind::FullHn, rows.into_iter().map(Ok).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> HamiltonianKind {
        self.kind
    }

    /// Stored entries (upper triangle, diagonal included).
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.vals[self.row_ptr[i]]).collect()
    }

    /// Upper-triangle triplets `(row, col, value)` with `row ≤ col`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (i, self.cols[k], self.vals[k]))
        })
    }

    /// `y = H x`; off-diagonal entries act on both triangles.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::LengthMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let mut y = vec![0.0; self.dim];
        self.apply(x, &mut y);
        Ok(y)
    }

    pub(crate) fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.dim {
            let start = self.row_ptr[i];
            let mut acc = self.vals[start] * x[i];
            let xi = x[i];
            for k in start + 1..self.row_ptr[i + 1] {
                let j = self.cols[k];
                let v = self.vals[k];
                acc += v * x[j];
                y[j] += v * xi;
            }
            y[i] += acc;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (i, j, v) in self.entries() {
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m
    }

    /// Matrix Market coordinate dump (`real symmetric`, lower triangle,
    /// 1-based indices).
    pub fn write_matrix_market<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "%%MatrixMarket matrix coordinate real symmetric")?;
        writeln!(out, "% {:?} Hamiltonian", self.kind)?;
        writeln!(out, "{} {} {}", self.dim, self.dim, self.nnz())?;
        for (i, j, v) in self.entries() {
            writeln!(out, "{} {} {:e}", j + 1, i + 1, v)?;
        }
        Ok(())
    }
}

/// Reads a `coordinate real symmetric` Matrix Market file.
pub fn read_matrix_market<R: BufRead>(input: R) -> Result<SparseHamiltonian> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty Matrix Market file".into()))??;
    let lower = header.to_ascii_lowercase();
    if !lower.starts_with("%%matrixmarket matrix coordinate real symmetric") {
        return Err(Error::Parse(format!("unsupported header {header:?}")));
    }
    let mut size: Option<(usize, usize)> = None;
    let mut triplets = Vec::new();
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        let bad = || Error::Parse(format!("malformed line {t:?}"));
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(bad());
                }
                let rows: usize = fields[0].parse().map_err(|_| bad())?;
                let cols: usize = fields[1].parse().map_err(|_| bad())?;
                let nnz: usize = fields[2].parse().map_err(|_| bad())?;
                if rows != cols {
                    return Err(Error::Parse("matrix is not square".into()));
                }
                size = Some((rows, nnz));
            }
            Some(_) => {
                if fields.len() != 3 {
                    return Err(bad());
                }
                let r: usize = fields[0].parse().map_err(|_| bad())?;
                let c: usize = fields[1].parse().map_err(|_| bad())?;
                let v: f64 = fields[2].parse().map_err(|_| bad())?;
                if r == 0 || c == 0 {
                    return Err(bad());
                }
                triplets.push((r - 1, c - 1, v));
            }
        }
    }
    let (dim, nnz) = size.ok_or_else(|| Error::Parse("missing size line".into()))?;
    if triplets.len() != nnz {
        return Err(Error::Parse(format!(
            "expected {nnz} entries, found {}",
            triplets.len()
        )));
    }
    SparseHamiltonian::from_triplets(dim, &triplets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::enumerate_basis;
    use crate::lattice::{modes_within, Geometry, MomentumMode, TWO_PI_SQ};

    fn m(c: &[i32]) -> MomentumMode {
        MomentumMode::new(c.to_vec())
    }

    fn two_by_two() -> (FockBasis, Potential) {
        let modes = modes_within(1, 1, Geometry::Ball).unwrap();
        let basis = enumerate_basis(&modes, 2, &m(&[0])).unwrap();
        (basis, Potential::default_example())
    }

    #[test]
    fn two_particle_matrix() {
        let (basis, pot) = two_by_two();
        let h = build_hn(&basis, &pot).unwrap();
        // basis order: (n_{-1}, n_0, n_{+1}) = (1,0,1), (0,2,0)
        let d = h.to_dense();
        let s2 = 2f64.sqrt();
        assert!((d[(1, 1)] - 2.0).abs() < 1e-14);
        assert!((d[(0, 0)] - (2.0 * TWO_PI_SQ + 2.0)).abs() < 1e-12);
        assert!((d[(0, 1)] - s2).abs() < 1e-15);
        assert_eq!(d[(0, 1)], d[(1, 0)]);

        let y = h.matvec(&[0.0, 1.0]).unwrap();
        assert!((y[0] - s2).abs() < 1e-15 && (y[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn constant_potential_is_kinetic_plus_mean_field() {
        let pot = Potential::constant(1, 3.0).unwrap();
        let modes = modes_within(1, 2, Geometry::Ball).unwrap();
        let basis = enumerate_basis(&modes, 4, &m(&[1])).unwrap();
        let h = build_hn(&basis, &pot).unwrap();
        assert_eq!(h.nnz(), h.dim());
        let t = crate::fock::diagonal_observable(&basis, crate::fock::Observable::Kinetic);
        for (d, t) in h.diagonal().iter().zip(&t) {
            assert_eq!(*d, t + 6.0);
        }
    }

    #[test]
    fn zero_transfer_count_per_row() {
        let modes = modes_within(1, 2, Geometry::Ball).unwrap();
        for n in 2..6 {
            let basis = enumerate_basis(&modes, n, &m(&[0])).unwrap();
            for s in basis.iter() {
                assert_eq!(zero_transfer_pairs(s.occupations()), (n * (n - 1)) as u64);
            }
        }
    }

    #[test]
    fn bogoliubov_two_particle_matrix() {
        let (basis, pot) = two_by_two();
        let h = build_hbog(&basis, &pot).unwrap();
        let d = h.to_dense();
        let a = TWO_PI_SQ + 1.0;
        assert_eq!(d[(1, 1)], 0.0);
        assert!((d[(0, 0)] - 2.0 * a).abs() < 1e-12);
        assert!((d[(0, 1)] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn bogoliubov_needs_the_condensate_mode() {
        let (basis, pot) = two_by_two();
        let shifted = basis.modes().shifted(&m(&[2])).unwrap();
        let b = enumerate_basis(&shifted, 2, &m(&[4])).unwrap();
        assert!(matches!(build_hbog(&b, &pot), Err(Error::MissingZeroMode)));
        assert!(build_hn(&b, &pot).is_ok());
    }

    #[test]
    fn dimension_mismatch() {
        let (basis, _) = two_by_two();
        let pot2 = Potential::constant(2, 1.0).unwrap();
        assert!(build_hn(&basis, &pot2).is_err());
        let h = build_hn(&basis, &Potential::default_example()).unwrap();
        assert!(matches!(
            h.matvec(&[1.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn diagonal_matvec() {
        let h =
            SparseHamiltonian::from_triplets(3, &[(0, 0, 3.0), (1, 1, 1.0), (2, 2, 2.0)]).unwrap();
        assert_eq!(h.matvec(&[0.0, 1.0, 0.0]).unwrap(), vec![0.0, 1.0, 0.0]);
        assert_eq!(h.matvec(&[0.0, 0.0, 1.0]).unwrap(), vec![0.0, 0.0, 2.0]);
    }

    #[test]
    fn matrix_market_round_trip() {
        let modes = modes_within(1, 2, Geometry::Ball).unwrap();
        let basis = enumerate_basis(&modes, 4, &m(&[0])).unwrap();
        let h = build_hn(&basis, &Potential::strong_coupling()).unwrap();
        let mut buf = Vec::new();
        h.write_matrix_market(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real symmetric\n"));
        let back = read_matrix_market(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back.dim(), h.dim());
        let same: Vec<_> = back.entries().collect();
        let orig: Vec<_> = h.entries().collect();
        assert_eq!(same, orig);
    }

    #[test]
    fn matrix_market_rejects_general_matrices() {
        let text = "%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 2.0\n";
        assert!(read_matrix_market(std::io::Cursor::new(text)).is_err());
        let text = "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 2.0\n";
        assert!(read_matrix_market(std::io::Cursor::new(text)).is_err());
    }
}
