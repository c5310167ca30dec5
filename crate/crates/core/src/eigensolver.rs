//! Lowest eigenpairs of a [`SparseHamiltonian`].
//!
//! Small matrices go through a dense symmetric eigendecomposition. Larger
//! ones use Lanczos with full reorthogonalization: converged Ritz pairs are
//! locked and every later Krylov space is built orthogonal to them, so
//! degenerate eigenvalues are found one copy per cycle. Once `m` pairs are
//! locked, a confirmation cycle from a fresh random start checks that
//! nothing below the `m`-th locked value was missed.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hamiltonian::SparseHamiltonian;

pub const DEFAULT_DENSE_THRESHOLD: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Dense,
    Lanczos,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum MethodChoice {
    /// Dense up to `dense_threshold`, Lanczos above.
    #[default]
    Auto,
    Dense,
    Lanczos,
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub dense_threshold: usize,
    pub method: MethodChoice,
    /// Lanczos steps (matrix-vector products); `None` means `50·m + 500`.
    pub max_iterations: Option<usize>,
    /// Krylov space size per cycle; `None` picks from `m` and the dimension.
    pub krylov_dim: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            dense_threshold: DEFAULT_DENSE_THRESHOLD,
            method: MethodChoice::Auto,
            max_iterations: None,
            krylov_dim: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EigenResult {
    /// Ascending.
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    /// `‖Hx − λx‖`, recomputed from the returned pairs.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub method: Method,
}

impl EigenResult {
    fn truncate(&mut self, len: usize) {
        self.values.truncate(len);
        self.vectors.truncate(len);
        self.residuals.truncate(len);
    }
}

/// `‖Hx − λx‖` for every pair, via [`SparseHamiltonian::matvec`].
pub fn residual_norms(h: &SparseHamiltonian, values: &[f64], vectors: &[Vec<f64>]) -> Vec<f64> {
    let mut hx = vec![0.0; h.dim()];
    values
        .iter()
        .zip(vectors)
        .map(|(&lambda, x)| {
            h.apply(x, &mut hx);
            hx.iter()
                .zip(x)
                .map(|(a, b)| (a - lambda * b).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

pub fn lowest_eigenpairs(
    h: &SparseHamiltonian,
    m: usize,
    tol: f64,
    seed: u64,
) -> Result<EigenResult> {
    lowest_eigenpairs_with(h, m, tol, seed, &SolverOptions::default())
}

pub fn lowest_eigenpairs_with(
    h: &SparseHamiltonian,
    m: usize,
    tol: f64,
    seed: u64,
    opts: &SolverOptions,
) -> Result<EigenResult> {
    let dim = h.dim();
    if m == 0 || m > dim {
        return Err(Error::TooManyEigenpairs { requested: m, dim });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidSetting(format!(
            "tolerance {tol} must be positive"
        )));
    }
    let method = match opts.method {
        MethodChoice::Dense => Method::Dense,
        MethodChoice::Lanczos => Method::Lanczos,
        MethodChoice::Auto if dim <= opts.dense_threshold => Method::Dense,
        MethodChoice::Auto => Method::Lanczos,
    };
    match method {
        Method::Dense => Ok(dense(h, m)),
        Method::Lanczos => {
            let max_iter = opts.max_iterations.unwrap_or(50 * m + 500);
            let krylov = opts
                .krylov_dim
                .unwrap_or_else(|| default_krylov_dim(dim, m))
                .max(2);
            Lanczos::new(h, tol, seed, krylov, max_iter).run(m)
        }
    }
}

fn default_krylov_dim(dim: usize, m: usize) -> usize {
    // keep the basis under ~1 GiB
    let memory_cap = (1usize << 27) / dim.max(1);
    (2 * m + 60).max(100).min(memory_cap.max(m + 20))
}

fn dense(h: &SparseHamiltonian, m: usize) -> EigenResult {
    let eig = SymmetricEigen::new(h.to_dense());
    let mut order: Vec<usize> = (0..h.dim()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    order.truncate(m);
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    let residuals = residual_norms(h, &values, &vectors);
    EigenResult {
        values,
        vectors,
        residuals,
        iterations: 0,
        method: Method::Dense,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

/// Two passes of classical Gram-Schmidt against every vector in `sets`.
fn orthogonalize(w: &mut [f64], sets: &[&[Vec<f64>]]) {
    for _ in 0..2 {
        for set in sets {
            for v in set.iter() {
                let c = dot(v, w);
                axpy(-c, v, w);
            }
        }
    }
}

struct RitzPair {
    value: f64,
    vector: Vec<f64>,
    residual: f64,
}

struct Lanczos<'a> {
    h: &'a SparseHamiltonian,
    tol: f64,
    rng: ChaCha8Rng,
    krylov: usize,
    max_iter: usize,
    steps: usize,
    locked_values: Vec<f64>,
    locked_vectors: Vec<Vec<f64>>,
}

impl<'a> Lanczos<'a> {
    fn new(h: &'a SparseHamiltonian, tol: f64, seed: u64, krylov: usize, max_iter: usize) -> Self {
        Lanczos {
            h,
            tol,
            rng: ChaCha8Rng::seed_from_u64(seed),
            krylov,
            max_iter,
            steps: 0,
            locked_values: Vec::new(),
            locked_vectors: Vec::new(),
        }
    }

    fn converged(&self, value: f64, residual: f64) -> bool {
        residual <= self.tol * value.abs().max(1.0)
    }

    fn random_vector(&mut self) -> Vec<f64> {
        (0..self.h.dim())
            .map(|_| self.rng.random::<f64>() - 0.5)
            .collect()
    }

    /// Normalized start vector orthogonal to the locked set, or `None` if
    /// the locked vectors span the space.
    fn prepare_start(&mut self, mut start: Vec<f64>) -> Option<Vec<f64>> {
        for attempt in 0..3 {
            orthogonalize(&mut start, &[&self.locked_vectors]);
            let nrm = norm(&start);
            if nrm > 1e-8 {
                start.iter_mut().for_each(|x| *x /= nrm);
                return Some(start);
            }
            if attempt < 2 {
                start = self.random_vector();
            }
        }
        None
    }

    /// One Krylov cycle; Ritz pairs sorted ascending, true residuals for the
    /// lowest `check` of them.
    fn cycle(&mut self, start: Vec<f64>, check: usize) -> Vec<RitzPair> {
        let n = self.h.dim();
        let k_max = self.krylov.min(n - self.locked_vectors.len());
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k_max);
        let mut alpha = Vec::with_capacity(k_max);
        let mut beta: Vec<f64> = Vec::with_capacity(k_max);
        basis.push(start);
        let mut w = vec![0.0; n];
        let mut scale = 0.0f64;
        loop {
            let j = basis.len() - 1;
            self.h.apply(&basis[j], &mut w);
            self.steps += 1;
            let a = dot(&basis[j], &w);
            alpha.push(a);
            axpy(-a, &basis[j], &mut w);
            if j > 0 {
                axpy(-beta[j - 1], &basis[j - 1], &mut w);
            }
            orthogonalize(&mut w, &[&self.locked_vectors, &basis]);
            let b = norm(&w);
            scale = scale.max(a.abs() + b + beta.last().copied().unwrap_or(0.0));
            beta.push(b);
            if basis.len() == k_max || b <= 1e-13 * scale.max(1.0) || self.steps >= self.max_iter {
                break;
            }
            basis.push(w.iter().map(|x| x / b).collect());
        }

        let k = basis.len();
        let mut t = DMatrix::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alpha[i];
            if i + 1 < k {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let last_beta = beta[k - 1];

        let mut hx = vec![0.0; n];
        order
            .into_iter()
            .take(check)
            .map(|i| {
                let s = eig.eigenvectors.column(i);
                let mut x = vec![0.0; n];
                for (c, v) in s.iter().zip(&basis) {
                    axpy(*c, v, &mut x);
                }
                let nrm = norm(&x);
                x.iter_mut().for_each(|v| *v /= nrm);
                let value = eig.eigenvalues[i];
                let estimate = (last_beta * s[k - 1]).abs();
                let residual = if self.converged(value, estimate * 10.0) {
                    self.h.apply(&x, &mut hx);
                    hx.iter()
                        .zip(&x)
                        .map(|(a, b)| (a - value * b).powi(2))
                        .sum::<f64>()
                        .sqrt()
                } else {
                    estimate
                };
                RitzPair {
                    value,
                    vector: x,
                    residual,
                }
            })
            .collect()
    }

    fn lock(&mut self, pair: RitzPair) {
        let mut v = pair.vector;
        orthogonalize(&mut v, &[&self.locked_vectors]);
        let nrm = norm(&v);
        v.iter_mut().for_each(|x| *x /= nrm);
        self.locked_values.push(pair.value);
        self.locked_vectors.push(v);
    }

    fn mth_locked(&self, m: usize) -> f64 {
        let mut vals = self.locked_values.clone();
        vals.sort_by(f64::total_cmp);
        vals[m - 1]
    }

    fn run(mut self, m: usize) -> Result<EigenResult> {
        let n = self.h.dim();
        let mut start = self.random_vector();
        let mut lead_residual = f64::INFINITY;
        while let Some(v0) = self.prepare_start(start) {
            let confirming = self.locked_values.len() >= m;
            let need = if confirming {
                1
            } else {
                m - self.locked_values.len()
            };
            let pairs = self.cycle(v0, need);
            let mut unconverged = Vec::new();
            let mut progressed = false;
            for pair in pairs {
                if !self.converged(pair.value, pair.residual) {
                    unconverged.push(pair);
                    continue;
                }
                if confirming {
                    let bound = self.mth_locked(m);
                    let slack = 10.0 * self.tol * bound.abs().max(1.0);
                    if pair.value >= bound - slack {
                        return Ok(self.finish(m));
                    }
                }
                self.lock(pair);
                progressed = true;
            }
            if self.locked_values.len() == n {
                break;
            }
            let worst = unconverged.iter().map(|p| p.residual).fold(0.0, f64::max);
            if self.steps >= self.max_iter {
                let mut residuals: Vec<f64> = unconverged.iter().map(|p| p.residual).collect();
                residuals.sort_by(f64::total_cmp);
                return Err(Error::NotConverged {
                    iterations: self.steps,
                    worst_residual: worst,
                    residuals,
                });
            }
            start = if unconverged.is_empty() {
                self.random_vector()
            } else {
                // explicit restart from the lowest unconverged Ritz vector
                let lead = &unconverged[0];
                let mut s = lead.vector.clone();
                // stalled: perturb below the current residual level
                if !progressed && lead.residual > 0.99 * lead_residual {
                    let relative = lead.residual / lead.value.abs().max(1.0);
                    let r = self.random_vector();
                    axpy(1e-2 * relative.min(1.0) / norm(&r), &r, &mut s);
                }
                lead_residual = lead.residual;
                s
            };
        }
        Ok(self.finish(m))
    }

    fn finish(self, m: usize) -> EigenResult {
        let mut order: Vec<usize> = (0..self.locked_values.len()).collect();
        order.sort_by(|&a, &b| self.locked_values[a].total_cmp(&self.locked_values[b]));
        let values: Vec<f64> = order.iter().map(|&i| self.locked_values[i]).collect();
        let vectors: Vec<Vec<f64>> = order
            .iter()
            .map(|&i| self.locked_vectors[i].clone())
            .collect();
        let mut result = EigenResult {
            residuals: Vec::new(),
            values,
            vectors,
            iterations: self.steps,
            method: Method::Lanczos,
        };
        result.truncate(m);
        result.residuals = residual_norms(self.h, &result.values, &result.vectors);
        result
    }
}

/// All eigenvalues `≤ λ_min + window` (inclusive), with multiplicity.
pub fn spectrum_in_window(
    h: &SparseHamiltonian,
    window: f64,
    tol: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    Ok(eigenpairs_in_window(h, window, tol, seed, &SolverOptions::default())?.values)
}

/// Eigenpairs with `λ ≤ λ_min + window`; the requested count doubles until
/// the largest computed value leaves the window or the space is exhausted.
pub fn eigenpairs_in_window(
    h: &SparseHamiltonian,
    window: f64,
    tol: f64,
    seed: u64,
    opts: &SolverOptions,
) -> Result<EigenResult> {
    if !(window > 0.0) {
        return Err(Error::InvalidSetting(format!(
            "window {window} must be positive"
        )));
    }
    collect_below(h, tol, seed, opts, |lowest| lowest + window)
}

/// Every eigenpair with `λ ≤ ceiling`; empty if the spectrum starts above it.
pub fn eigenpairs_below(
    h: &SparseHamiltonian,
    ceiling: f64,
    tol: f64,
    seed: u64,
    opts: &SolverOptions,
) -> Result<EigenResult> {
    if !ceiling.is_finite() {
        return Err(Error::InvalidSetting(format!(
            "ceiling {ceiling} must be finite"
        )));
    }
    collect_below(h, tol, seed, opts, |_| ceiling)
}

fn collect_below(
    h: &SparseHamiltonian,
    tol: f64,
    seed: u64,
    opts: &SolverOptions,
    ceiling: impl Fn(f64) -> f64,
) -> Result<EigenResult> {
    let dim = h.dim();
    let mut m = dim.min(4);
    loop {
        let mut res = lowest_eigenpairs_with(h, m, tol, seed, opts)?;
        let ceiling = ceiling(res.values[0]);
        let last = *res.values.last().expect("m ≥ 1");
        if last > ceiling || m == dim {
            let keep = res.values.iter().take_while(|&&v| v <= ceiling).count();
            res.truncate(keep);
            return Ok(res);
        }
        m = (2 * m).min(dim);
    }
}
