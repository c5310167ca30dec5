//! Experiment sweeps that confront exact spectra with Bogoliubov
//! predictions and with the a-priori bounds on low-energy states.
//!
//! Every sweep runs one job per `(cutoff, N)` pair on the rayon pool and
//! assembles rows in job order, so reports depend only on the config.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bogoliubov::{
    bogoliubov_energy, predicted_level, quasiparticle_table, QuasiparticleTable,
};
use crate::eigensolver::{
    eigenpairs_below, eigenpairs_in_window, lowest_eigenpairs_with, EigenResult, Method,
    MethodChoice, SolverOptions, DEFAULT_DENSE_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::fock::{
    diagonal_observable, enumerate_basis_with_guard, expectation, FockBasis, Observable,
    DEFAULT_BASIS_GUARD,
};
use crate::hamiltonian::{build_hbog, build_hn, SparseHamiltonian};
use crate::lattice::{modes_within, Geometry, ModeSet, MomentumMode, TWO_PI_SQ};
use crate::potential::{Potential, PotentialFile};

/// Tolerance on the exact operator inequalities, relative to the largest
/// quantity entering the comparison.
pub const EXACT_TOLERANCE: f64 = 1e-9;
/// Tolerance on the product-observable bound.
pub const PRODUCT_TOLERANCE: f64 = 1e-6;
/// Tolerance for spectra that must agree exactly up to rounding.
pub const SPECTRUM_TOLERANCE: f64 = 1e-9;
/// Lanczos versus dense agreement.
pub const SOLVER_AGREEMENT: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    /// Eigenpairs requested per solve where no window applies.
    pub m: usize,
    pub tol: f64,
    pub seed: u64,
    pub dense_threshold: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            m: 6,
            tol: 1e-10,
            seed: 0,
            dense_threshold: DEFAULT_DENSE_THRESHOLD,
        }
    }
}

impl SolverSettings {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            dense_threshold: self.dense_threshold,
            ..SolverOptions::default()
        }
    }

    fn forced(&self, method: MethodChoice) -> SolverOptions {
        SolverOptions {
            method,
            ..self.options()
        }
    }
}

/// Experiment description, read from JSON.
///
/// The potential is given inline (`dim` and `coeffs`, as in a potential
/// file) or through `potential_file`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential_file: Option<PathBuf>,
    #[serde(default = "default_cutoffs")]
    pub cutoffs: Vec<u32>,
    #[serde(default)]
    pub geometry: Geometry,
    #[serde(default = "default_n_values")]
    pub n_values: Vec<usize>,
    /// Defaults to the origin and the first unit vector.
    #[serde(default)]
    pub sectors: Option<Vec<MomentumMode>>,
    /// Energy window above the ground state; defaults to three times the
    /// smallest excitation energy of each mode set.
    #[serde(default)]
    pub window: Option<f64>,
    /// Boost vectors; default `±e_1`.
    #[serde(default)]
    pub boost_q: Option<Vec<MomentumMode>>,
    #[serde(default = "default_boost_n_max")]
    pub boost_n_max: usize,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default = "default_guard")]
    pub basis_guard: usize,
    /// Fail instead of warning when the sampled potential is negative.
    #[serde(default)]
    pub require_positive: bool,
}

fn default_cutoffs() -> Vec<u32> {
    vec![1, 2, 3]
}

fn default_n_values() -> Vec<usize> {
    (2..=12).collect()
}

fn default_boost_n_max() -> usize {
    6
}

fn default_guard() -> usize {
    DEFAULT_BASIS_GUARD
}

impl ExperimentConfig {
    /// Config with default sweep settings around an in-memory potential.
    pub fn for_potential(pot: &Potential) -> Self {
        let file = pot.to_file();
        ExperimentConfig {
            dim: Some(file.dim),
            coeffs: Some(file.coeffs),
            potential_file: None,
            cutoffs: default_cutoffs(),
            geometry: Geometry::default(),
            n_values: default_n_values(),
            sectors: None,
            window: None,
            boost_q: None,
            boost_n_max: default_boost_n_max(),
            solver: SolverSettings::default(),
            out_dir: None,
            basis_guard: default_guard(),
            require_positive: false,
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Reads a config; a relative `potential_file` or `out_dir` is taken
    /// relative to the config's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut config = Self::from_json_str(&fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut config.potential_file, &mut config.out_dir]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn potential(&self) -> Result<Potential> {
        match (&self.coeffs, &self.potential_file) {
            (Some(coeffs), None) => {
                let dim = self
                    .dim
                    .ok_or_else(|| Error::InvalidSetting("inline coeffs need dim".into()))?;
                PotentialFile {
                    dim,
                    coeffs: coeffs.clone(),
                }
                .into_potential()
            }
            (None, Some(path)) => {
                let pot = Potential::load(path)?;
                match self.dim {
                    Some(d) if d != pot.dim() => Err(Error::InvalidSetting(format!(
                        "config dim {d} differs from the potential file's {}",
                        pot.dim()
                    ))),
                    _ => Ok(pot),
                }
            }
            (Some(_), Some(_)) => Err(Error::InvalidSetting(
                "give either inline coeffs or potential_file, not both".into(),
            )),
            (None, None) => Err(Error::InvalidSetting("no potential given".into())),
        }
    }
}

/// Validated config with everything derived from it.
struct Plan {
    pot: Potential,
    cutoffs: Vec<u32>,
    mode_sets: Vec<ModeSet>,
    tables: Vec<QuasiparticleTable>,
    windows: Vec<f64>,
    n_values: Vec<usize>,
    sectors: Vec<MomentumMode>,
    boost_q: Vec<MomentumMode>,
    boost_n_max: usize,
    solver: SolverSettings,
    guard: usize,
    warnings: Vec<String>,
}

const POSITIVITY_SAMPLES: usize = 64;

impl Plan {
    fn new(config: &ExperimentConfig) -> Result<Self> {
        let pot = config.potential()?;
        let dim = pot.dim();
        let mut warnings = Vec::new();
        let samples = if dim <= 2 { POSITIVITY_SAMPLES } else { 16 };
        if config.require_positive {
            pot.check_sampled_positive(samples)?;
        } else if let Err(e) = pot.check_sampled_positive(samples) {
            warnings.push(e.to_string());
        }

        if config.cutoffs.is_empty() || config.n_values.is_empty() {
            return Err(Error::InvalidSetting(
                "cutoffs and n_values must be nonempty".into(),
            ));
        }
        if let Some(&n) = config.n_values.iter().find(|&&n| n < 2) {
            return Err(Error::TooFewParticles(n));
        }
        let s = &config.solver;
        if s.m == 0 || !(s.tol > 0.0) {
            return Err(Error::InvalidSetting(format!(
                "solver needs m ≥ 1 and tol > 0, got m = {} and tol = {}",
                s.m, s.tol
            )));
        }
        if let Some(w) = config.window {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidSetting(format!(
                    "window {w} must be positive"
                )));
            }
        }

        let unit = {
            let mut c = vec![0; dim];
            c[0] = 1;
            MomentumMode::new(c)
        };
        let zero = MomentumMode::zero(dim);
        let sectors = config
            .sectors
            .clone()
            .unwrap_or_else(|| vec![zero.clone(), unit.clone()]);
        let boost_q = config
            .boost_q
            .clone()
            .unwrap_or_else(|| vec![unit.clone(), unit.neg()]);
        for m in sectors.iter().chain(&boost_q) {
            if m.dim() != dim {
                return Err(Error::DimensionMismatch {
                    mode: m.clone(),
                    expected: dim,
                    got: m.dim(),
                });
            }
        }
        if !sectors.contains(&zero) {
            return Err(Error::InvalidSetting(
                "the sector list must contain 0".into(),
            ));
        }
        if boost_q.iter().any(MomentumMode::is_zero) {
            return Err(Error::InvalidSetting(
                "boost vectors must be nonzero".into(),
            ));
        }

        let mut mode_sets = Vec::new();
        let mut tables = Vec::new();
        let mut windows = Vec::new();
        for &cutoff in &config.cutoffs {
            let set = modes_within(dim, cutoff, config.geometry)?;
            let table = quasiparticle_table(&pot, &set)?;
            let window = match config.window {
                Some(w) => w,
                None => {
                    3.0 * table.min_energy().ok_or_else(|| {
                        Error::InvalidSetting(format!("cutoff {cutoff} leaves no excitations"))
                    })?
                }
            };
            mode_sets.push(set);
            tables.push(table);
            windows.push(window);
        }

        Ok(Plan {
            pot,
            cutoffs: config.cutoffs.clone(),
            mode_sets,
            tables,
            windows,
            n_values: config.n_values.clone(),
            sectors,
            boost_q,
            boost_n_max: config.boost_n_max,
            solver: config.solver.clone(),
            guard: config.basis_guard,
            warnings,
        })
    }

    fn jobs(&self) -> Vec<(usize, usize)> {
        (0..self.cutoffs.len())
            .flat_map(|c| self.n_values.iter().map(move |&n| (c, n)))
            .collect()
    }

    fn basis(&self, modes: &ModeSet, n: usize, sector: &MomentumMode) -> Result<FockBasis> {
        enumerate_basis_with_guard(modes, n, sector, self.guard)
    }

    fn mean_field(&self, n: usize) -> f64 {
        n as f64 * self.pot.vhat_zero() / 2.0
    }

    /// `N/(2(N−1)) · (v(0) − v̂(0))`
    fn shift_bound(&self, n: usize) -> f64 {
        let nf = n as f64;
        nf / (2.0 * (nf - 1.0)) * (self.pot.vzero() - self.pot.vhat_zero())
    }
}

fn inclusive(x: f64) -> f64 {
    x + 1e-9 * x.abs().max(1.0)
}

fn format_occupations(occ: &BTreeMap<MomentumMode, u32>) -> String {
    occ.iter()
        .map(|(m, n)| format!("{m}:{n}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Every occupation configuration on the table's modes with total momentum
/// `sector`, at most `max_excitations` quanta and energy `Σ e_p n_p ≤
/// limit`, sorted by energy.
pub fn enumerate_predictions(
    table: &QuasiparticleTable,
    sector: &MomentumMode,
    limit: f64,
    max_excitations: u32,
) -> Result<Vec<(f64, BTreeMap<MomentumMode, u32>)>> {
    struct Walk<'a> {
        entries: &'a [(MomentumMode, f64)],
        limit: f64,
        current: Vec<(MomentumMode, u32)>,
        out: Vec<BTreeMap<MomentumMode, u32>>,
    }
    impl Walk<'_> {
        fn go(&mut self, i: usize, spent: f64, left: u32) {
            if i == self.entries.len() {
                self.out.push(self.current.iter().cloned().collect());
                return;
            }
            self.go(i + 1, spent, left);
            let (mode, e) = self.entries[i].clone();
            let mut k = 1;
            while k <= left && spent + f64::from(k) * e <= self.limit {
                self.current.push((mode.clone(), k));
                self.go(i + 1, spent + f64::from(k) * e, left - k);
                self.current.pop();
                k += 1;
            }
        }
    }
    let entries: Vec<(MomentumMode, f64)> = table
        .entries()
        .iter()
        .map(|q| (q.mode.clone(), q.e))
        .collect();
    let mut walk = Walk {
        entries: &entries,
        limit,
        current: Vec::new(),
        out: Vec::new(),
    };
    walk.go(0, 0.0, max_excitations);
    let configs = walk.out;
    let mut out = Vec::new();
    for occ in configs {
        let (energy, momentum) = predicted_level(table, &occ)?;
        if &momentum == sector && energy <= limit {
            out.push((energy, occ));
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    Ok(out)
}

/// Observables of one computed eigenstate of `H_N`.
#[derive(Clone, Debug)]
struct StateData {
    value: f64,
    rayleigh: f64,
    kinetic: f64,
    n_excited: f64,
    n_excited_kinetic: f64,
}

#[derive(Clone, Debug)]
struct SectorSolve {
    sector: MomentumMode,
    dim: usize,
    result: Option<EigenResult>,
    states: Vec<StateData>,
}

impl SectorSolve {
    fn values(&self) -> &[f64] {
        self.result.as_ref().map_or(&[], |r| &r.values)
    }
}

fn rayleigh(h: &SparseHamiltonian, x: &[f64]) -> Result<f64> {
    let hx = h.matvec(x)?;
    Ok(hx.iter().zip(x).map(|(a, b)| a * b).sum())
}

fn state_data(
    basis: &FockBasis,
    h: &SparseHamiltonian,
    result: &EigenResult,
) -> Result<Vec<StateData>> {
    let kinetic = diagonal_observable(basis, Observable::Kinetic);
    let excited = diagonal_observable(basis, Observable::NExcited);
    let product = diagonal_observable(basis, Observable::NExcitedTimesKinetic);
    result
        .values
        .iter()
        .zip(&result.vectors)
        .map(|(&value, x)| {
            Ok(StateData {
                value,
                rayleigh: rayleigh(h, x)?,
                kinetic: expectation(basis, x, &kinetic)?,
                n_excited: expectation(basis, x, &excited)?,
                n_excited_kinetic: expectation(basis, x, &product)?,
            })
        })
        .collect()
}

#[derive(Clone, Copy)]
enum Ceiling {
    Lowest,
    AboveOwnGround(f64),
    Absolute(f64),
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Full,
    Bogoliubov,
}

fn solve_sector(
    plan: &Plan,
    modes: &ModeSet,
    n: usize,
    sector: &MomentumMode,
    kind: Kind,
    ceiling: Ceiling,
    observables: bool,
) -> Result<SectorSolve> {
    let basis = plan.basis(modes, n, sector)?;
    let mut out = SectorSolve {
        sector: sector.clone(),
        dim: basis.dim(),
        result: None,
        states: Vec::new(),
    };
    if basis.is_empty() {
        return Ok(out);
    }
    let h = match kind {
        Kind::Full => build_hn(&basis, &plan.pot)?,
        Kind::Bogoliubov => build_hbog(&basis, &plan.pot)?,
    };
    let s = &plan.solver;
    let opts = s.options();
    let result = match ceiling {
        Ceiling::Lowest => lowest_eigenpairs_with(&h, 1, s.tol, s.seed, &opts)?,
        Ceiling::AboveOwnGround(w) => eigenpairs_in_window(&h, w, s.tol, s.seed, &opts)?,
        Ceiling::Absolute(c) => eigenpairs_below(&h, c, s.tol, s.seed, &opts)?,
    };
    if observables {
        out.states = state_data(&basis, &h, &result)?;
    }
    out.result = Some(result);
    Ok(out)
}

/// Sector-0 ground state plus every level up to `E_0 + ξ` in each sector.
fn solve_window(
    plan: &Plan,
    c: usize,
    n: usize,
    kind: Kind,
    observables: bool,
) -> Result<Vec<SectorSolve>> {
    let modes = &plan.mode_sets[c];
    let zero = MomentumMode::zero(modes.dim());
    let window = inclusive(plan.windows[c]);
    let ground = solve_sector(
        plan,
        modes,
        n,
        &zero,
        kind,
        Ceiling::AboveOwnGround(window),
        observables,
    )?;
    let e0 = ground.values()[0];
    let ceiling = e0 + window;
    plan.sectors
        .iter()
        .map(|sector| {
            if sector.is_zero() {
                Ok(ground.clone())
            } else {
                solve_sector(
                    plan,
                    modes,
                    n,
                    sector,
                    kind,
                    Ceiling::Absolute(ceiling),
                    observables,
                )
            }
        })
        .collect()
}

fn sector_ground(solves: &[SectorSolve]) -> f64 {
    solves
        .iter()
        .find(|s| s.sector.is_zero())
        .map(|s| s.values()[0])
        .expect("sector 0 is always solved")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub cutoff: u32,
    pub n: usize,
    pub basis_dim: usize,
    pub e0: f64,
    pub mean_field: f64,
    pub ebog_truncated: f64,
    pub tail_bound: f64,
    /// `E_0 − N v̂(0)/2 − E^Bog_trunc`
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub cutoff: u32,
    /// `−d log|Δ| / d log N` by least squares; absent if some `Δ = 0` or
    /// fewer than two points.
    pub gamma: Option<f64>,
    pub points: usize,
}

/// Ground energies at consecutive cutoffs for the same `N`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RefinementRow {
    pub n: usize,
    pub cutoff: u32,
    pub refined_cutoff: u32,
    pub e0: f64,
    pub refined_e0: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub fits: Vec<DecayFit>,
    pub refinement: Vec<RefinementRow>,
}

impl ConvergenceReport {
    /// Rows for one cutoff, ordered by `N`.
    pub fn at_cutoff(&self, cutoff: u32) -> Vec<&ConvergenceRow> {
        self.rows.iter().filter(|r| r.cutoff == cutoff).collect()
    }
}

fn fit_decay(points: &[(usize, f64)]) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|&(_, d)| d == 0.0) {
        return None;
    }
    let xs: Vec<f64> = points.iter().map(|&(n, _)| (n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, d)| d.abs().ln()).collect();
    let len = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / len;
    let my = ys.iter().sum::<f64>() / len;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    (sxx > 0.0).then(|| -sxy / sxx)
}

fn convergence_from(
    plan: &Plan,
    grounds: &[(usize, usize, usize, f64)],
) -> Result<ConvergenceReport> {
    let mut rows = Vec::new();
    for &(c, n, dim, e0) in grounds {
        let summary = bogoliubov_energy(&plan.pot, &plan.mode_sets[c])?;
        let mean_field = plan.mean_field(n);
        rows.push(ConvergenceRow {
            cutoff: plan.cutoffs[c],
            n,
            basis_dim: dim,
            e0,
            mean_field,
            ebog_truncated: summary.ebog_truncated,
            tail_bound: summary.tail_bound,
            delta: e0 - mean_field - summary.ebog_truncated,
        });
    }
    let fits = plan
        .cutoffs
        .iter()
        .map(|&cutoff| {
            let points: Vec<(usize, f64)> = rows
                .iter()
                .filter(|r| r.cutoff == cutoff)
                .map(|r| (r.n, r.delta))
                .collect();
            DecayFit {
                cutoff,
                gamma: fit_decay(&points),
                points: points.len(),
            }
        })
        .collect();

    // cutoffs in ascending order give nested mode sets
    let mut order: Vec<usize> = (0..plan.cutoffs.len()).collect();
    order.sort_by_key(|&c| plan.cutoffs[c]);
    let mut refinement = Vec::new();
    for &n in &plan.n_values {
        for pair in order.windows(2) {
            let find = |c: usize| {
                rows.iter()
                    .find(|r| r.n == n && r.cutoff == plan.cutoffs[c])
                    .map(|r| r.e0)
            };
            let (Some(e0), Some(refined)) = (find(pair[0]), find(pair[1])) else {
                continue;
            };
            if plan.cutoffs[pair[0]] == plan.cutoffs[pair[1]] {
                continue;
            }
            refinement.push(RefinementRow {
                n,
                cutoff: plan.cutoffs[pair[0]],
                refined_cutoff: plan.cutoffs[pair[1]],
                e0,
                refined_e0: refined,
                pass: refined <= e0 + SPECTRUM_TOLERANCE * e0.abs().max(1.0),
            });
        }
    }
    Ok(ConvergenceReport {
        rows,
        fits,
        refinement,
    })
}

/// Ground energy of `H_N` in sector 0 for every `(cutoff, N)`, with the
/// deviation from the mean-field plus Bogoliubov prediction.
pub fn run_convergence(config: &ExperimentConfig) -> Result<ConvergenceReport> {
    let plan = Plan::new(config)?;
    let grounds = plan
        .jobs()
        .into_par_iter()
        .map(|(c, n)| {
            let zero = MomentumMode::zero(plan.pot.dim());
            let s = solve_sector(
                &plan,
                &plan.mode_sets[c],
                n,
                &zero,
                Kind::Full,
                Ceiling::Lowest,
                false,
            )?;
            Ok((c, n, s.dim, s.values()[0]))
        })
        .collect::<Result<Vec<_>>>()?;
    convergence_from(&plan, &grounds)
}

/// One exact level matched positionally against one predicted level.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelRow {
    pub cutoff: u32,
    pub n: usize,
    pub sector: String,
    pub level: usize,
    /// Exact eigenvalue.
    pub energy: Option<f64>,
    /// Compared quantity: the gap `E − E_0` for `H_N`, the eigenvalue itself
    /// for `H^Bog`.
    pub measured: Option<f64>,
    pub predicted: Option<f64>,
    pub configuration: String,
    pub discrepancy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelCount {
    pub cutoff: u32,
    pub n: usize,
    pub sector: String,
    pub window: f64,
    pub exact: usize,
    pub predicted: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelReport {
    pub rows: Vec<LevelRow>,
    pub counts: Vec<LevelCount>,
}

impl LevelReport {
    /// Rows of one `(cutoff, N, sector)` block, by level.
    pub fn block(&self, cutoff: u32, n: usize, sector: &MomentumMode) -> Vec<&LevelRow> {
        let sector = sector.to_string();
        self.rows
            .iter()
            .filter(|r| r.cutoff == cutoff && r.n == n && r.sector == sector)
            .collect()
    }

    pub fn max_discrepancy(&self) -> f64 {
        self.rows
            .iter()
            .filter_map(|r| r.discrepancy)
            .map(f64::abs)
            .fold(0.0, f64::max)
    }

    pub fn count_mismatches(&self) -> usize {
        self.counts
            .iter()
            .filter(|c| c.exact != c.predicted)
            .count()
    }
}

#[allow(clippy::too_many_arguments)]
fn match_levels(
    plan: &Plan,
    c: usize,
    n: usize,
    sector: &MomentumMode,
    exact: &[f64],
    reference: f64,
    offset: f64,
    report: &mut LevelReport,
) -> Result<()> {
    let window = plan.windows[c];
    let quanta = u32::try_from(n).unwrap_or(u32::MAX);
    let predictions = enumerate_predictions(&plan.tables[c], sector, inclusive(window), quanta)?;
    let len = exact.len().max(predictions.len());
    for level in 0..len {
        let energy = exact.get(level).copied();
        let measured = energy.map(|e| e - reference);
        let predicted = predictions.get(level).map(|(e, _)| e + offset);
        report.rows.push(LevelRow {
            cutoff: plan.cutoffs[c],
            n,
            sector: sector.to_string(),
            level,
            energy,
            measured,
            predicted,
            configuration: predictions
                .get(level)
                .map(|(_, occ)| format_occupations(occ))
                .unwrap_or_default(),
            discrepancy: measured.zip(predicted).map(|(m, p)| m - p),
        });
    }
    report.counts.push(LevelCount {
        cutoff: plan.cutoffs[c],
        n,
        sector: sector.to_string(),
        window,
        exact: exact.len(),
        predicted: predictions.len(),
    });
    Ok(())
}

fn excitations_from(
    plan: &Plan,
    solved: &[((usize, usize), Vec<SectorSolve>)],
) -> Result<LevelReport> {
    let mut report = LevelReport {
        rows: Vec::new(),
        counts: Vec::new(),
    };
    for ((c, n), solves) in solved {
        let e0 = sector_ground(solves);
        for s in solves {
            match_levels(plan, *c, *n, &s.sector, s.values(), e0, 0.0, &mut report)?;
        }
    }
    Ok(report)
}

/// Exact levels of `H_N` up to `E_0 + ξ` per sector, matched against the
/// enumerated quasiparticle sums `Σ e_p n_p ≤ ξ`.
pub fn run_excitations(config: &ExperimentConfig) -> Result<LevelReport> {
    let plan = Plan::new(config)?;
    let solved = solve_all(&plan, Kind::Full, false)?;
    excitations_from(&plan, &solved)
}

fn solve_all(
    plan: &Plan,
    kind: Kind,
    observables: bool,
) -> Result<Vec<((usize, usize), Vec<SectorSolve>)>> {
    plan.jobs()
        .into_par_iter()
        .map(|(c, n)| Ok(((c, n), solve_window(plan, c, n, kind, observables)?)))
        .collect()
}

/// Ground-state energy bounds for one `(cutoff, N)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroundBoundRow {
    pub cutoff: u32,
    pub n: usize,
    pub e0: f64,
    /// `E_0 − N v̂(0)/2`
    pub shifted: f64,
    /// `−N/(2(N−1)) · (v(0) − v̂(0))`
    pub lower: f64,
    /// `−(E_0 − N v̂(0)/2)`, nonnegative when the upper bound holds.
    pub margin_upper: f64,
    pub margin_lower: f64,
    pub pass: bool,
}

/// Kinetic and excitation-number bounds for one eigenstate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StateBoundRow {
    pub cutoff: u32,
    pub n: usize,
    pub sector: String,
    pub level: usize,
    pub energy: f64,
    /// `⟨H⟩ − N v̂(0)/2`
    pub mu: f64,
    pub kinetic: f64,
    pub n_excited: f64,
    pub n_excited_kinetic: f64,
    /// `⟨T⟩ − (2π)²⟨N^>⟩`
    pub margin_kinetic_lower: f64,
    /// `N/(2(N−1))(v(0) − v̂(0)) + μ − ⟨T⟩`
    pub margin_kinetic_upper: f64,
    /// Product bound with `μ = ⟨H⟩ − N v̂(0)/2`.
    pub margin_product: f64,
    /// Product bound with `μ` measured from the ground energy instead.
    pub margin_product_from_ground: f64,
    pub pass_kinetic: bool,
    pub pass_product: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub ground: Vec<GroundBoundRow>,
    pub states: Vec<StateBoundRow>,
}

fn product_bound(plan: &Plan, n: usize, mu: f64) -> f64 {
    let v0 = plan.pot.vzero();
    let vh = plan.pot.vhat_zero();
    let nf = n as f64;
    (v0 + mu / 2.0).powi(2) + nf / (2.0 * (nf - 1.0)) * (mu + 3.0 * v0 + vh) * (2.0 * mu + v0 - vh)
}

fn bounds_from(plan: &Plan, solved: &[((usize, usize), Vec<SectorSolve>)]) -> BoundReport {
    let mut ground = Vec::new();
    let mut states = Vec::new();
    for ((c, n), solves) in solved {
        let (c, n) = (*c, *n);
        let cutoff = plan.cutoffs[c];
        let mean = plan.mean_field(n);
        let shift = plan.shift_bound(n);
        let e0 = sector_ground(solves);
        let shifted = e0 - mean;
        let scale = e0.abs().max(1.0);
        ground.push(GroundBoundRow {
            cutoff,
            n,
            e0,
            shifted,
            lower: -shift,
            margin_upper: -shifted,
            margin_lower: shifted + shift,
            pass: -shifted >= -EXACT_TOLERANCE * scale
                && shifted + shift >= -EXACT_TOLERANCE * scale,
        });
        for s in solves {
            for (level, st) in s.states.iter().enumerate() {
                let mu = st.rayleigh - mean;
                let lower = st.kinetic - TWO_PI_SQ * st.n_excited;
                let upper = shift + mu - st.kinetic;
                let kin_scale = st.kinetic.abs().max(mu.abs()).max(1.0);
                let product = product_bound(plan, n, mu) - TWO_PI_SQ * st.n_excited_kinetic;
                let from_ground =
                    product_bound(plan, n, st.rayleigh - e0) - TWO_PI_SQ * st.n_excited_kinetic;
                states.push(StateBoundRow {
                    cutoff,
                    n,
                    sector: s.sector.to_string(),
                    level,
                    energy: st.value,
                    mu,
                    kinetic: st.kinetic,
                    n_excited: st.n_excited,
                    n_excited_kinetic: st.n_excited_kinetic,
                    margin_kinetic_lower: lower,
                    margin_kinetic_upper: upper,
                    margin_product: product,
                    margin_product_from_ground: from_ground,
                    pass_kinetic: lower >= -EXACT_TOLERANCE * kin_scale
                        && upper >= -EXACT_TOLERANCE * kin_scale,
                    pass_product: product >= -PRODUCT_TOLERANCE,
                });
            }
        }
    }
    BoundReport { ground, states }
}

/// Ground-energy, kinetic-energy and product bounds on every eigenstate in
/// the window.
pub fn run_bound_checks(config: &ExperimentConfig) -> Result<BoundReport> {
    let plan = Plan::new(config)?;
    let solved = solve_all(&plan, Kind::Full, true)?;
    Ok(bounds_from(&plan, &solved))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoostRow {
    pub cutoff: u32,
    pub n: usize,
    pub q: String,
    pub sector: String,
    pub shifted_sector: String,
    pub levels: usize,
    /// `N|2πq|² + 2(2πq)·(2πP)`
    pub shift: f64,
    pub max_deviation: f64,
    pub pass: bool,
}

fn spectrum(plan: &Plan, basis: &FockBasis) -> Result<Vec<f64>> {
    if basis.is_empty() {
        return Ok(Vec::new());
    }
    let h = build_hn(basis, &plan.pot)?;
    let s = &plan.solver;
    let (m, opts) = if h.dim() <= s.dense_threshold {
        (h.dim(), s.forced(MethodChoice::Dense))
    } else {
        (s.m.min(h.dim()), s.options())
    };
    Ok(lowest_eigenpairs_with(&h, m, s.tol, s.seed, &opts)?.values)
}

/// Spectrum of `H_N` on `(S, P)` against `(S + q, P + Nq)`.
pub fn boost_entry(
    config: &ExperimentConfig,
    cutoff_index: usize,
    n: usize,
    sector: &MomentumMode,
    q: &MomentumMode,
) -> Result<BoostRow> {
    let plan = Plan::new(config)?;
    boost_row(&plan, cutoff_index, n, sector, q)
}

fn boost_row(
    plan: &Plan,
    c: usize,
    n: usize,
    sector: &MomentumMode,
    q: &MomentumMode,
) -> Result<BoostRow> {
    let modes = &plan.mode_sets[c];
    let shifted_modes = modes.shifted(q)?;
    let shifted_sector = sector.add(&q.scale(n as i32));
    let original = spectrum(plan, &plan.basis(modes, n, sector)?)?;
    let moved = spectrum(plan, &plan.basis(&shifted_modes, n, &shifted_sector)?)?;
    let shift = TWO_PI_SQ * (n as f64 * q.norm2() as f64 + 2.0 * q.dot(sector) as f64);
    let mut max_deviation = 0.0f64;
    let mut pass = original.len() == moved.len();
    for (a, b) in original.iter().zip(&moved) {
        let dev = (b - shift - a).abs();
        max_deviation = max_deviation.max(dev);
        pass &= dev <= SPECTRUM_TOLERANCE * b.abs().max(1.0);
    }
    Ok(BoostRow {
        cutoff: plan.cutoffs[c],
        n,
        q: q.to_string(),
        sector: sector.to_string(),
        shifted_sector: shifted_sector.to_string(),
        levels: original.len().min(moved.len()),
        shift,
        max_deviation,
        pass,
    })
}

/// Boost covariance for every boost vector, sector, cutoff and
/// `N ≤ boost_n_max`.
pub fn run_boost_check(config: &ExperimentConfig) -> Result<Vec<BoostRow>> {
    let plan = Plan::new(config)?;
    boost_rows(&plan)
}

fn boost_rows(plan: &Plan) -> Result<Vec<BoostRow>> {
    let mut jobs = Vec::new();
    for (c, n) in plan.jobs() {
        if n > plan.boost_n_max {
            continue;
        }
        for q in &plan.boost_q {
            for sector in &plan.sectors {
                jobs.push((c, n, q, sector));
            }
        }
    }
    jobs.into_par_iter()
        .map(|(c, n, q, sector)| boost_row(plan, c, n, sector, q))
        .collect()
}

fn hbog_from(plan: &Plan, solved: &[((usize, usize), Vec<SectorSolve>)]) -> Result<LevelReport> {
    let mut report = LevelReport {
        rows: Vec::new(),
        counts: Vec::new(),
    };
    for ((c, n), solves) in solved {
        let ebog = bogoliubov_energy(&plan.pot, &plan.mode_sets[*c])?.ebog_truncated;
        let nf = *n as f64;
        let offset = ebog * nf / (nf - 1.0);
        for s in solves {
            match_levels(
                plan,
                *c,
                *n,
                &s.sector,
                s.values(),
                0.0,
                offset,
                &mut report,
            )?;
        }
    }
    Ok(report)
}

/// Levels of the particle-number-conserving Bogoliubov Hamiltonian against
/// `E^Bog_trunc · N/(N−1) + Σ e_p n_p`.
pub fn run_hbog_check(config: &ExperimentConfig) -> Result<LevelReport> {
    let plan = Plan::new(config)?;
    let solved = solve_all(&plan, Kind::Bogoliubov, false)?;
    hbog_from(&plan, &solved)
}

/// Lanczos against dense diagonalization on one sector basis.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverRow {
    pub cutoff: u32,
    pub n: usize,
    pub sector: String,
    pub dim: usize,
    pub pairs: usize,
    pub max_difference: f64,
    /// Largest `‖Hx − λx‖ / max(1, |λ|)` over both methods.
    pub max_relative_residual: f64,
    pub iterations: usize,
    pub pass: bool,
}

fn solver_rows(plan: &Plan) -> Result<Vec<SolverRow>> {
    let mut jobs = Vec::new();
    for (c, n) in plan.jobs() {
        for sector in &plan.sectors {
            jobs.push((c, n, sector));
        }
    }
    let rows = jobs
        .into_par_iter()
        .map(|(c, n, sector)| {
            let basis = plan.basis(&plan.mode_sets[c], n, sector)?;
            if basis.is_empty() || basis.dim() > plan.solver.dense_threshold {
                return Ok(None);
            }
            let h = build_hn(&basis, &plan.pot)?;
            let s = &plan.solver;
            let m = s.m.min(h.dim());
            let dense =
                lowest_eigenpairs_with(&h, m, s.tol, s.seed, &s.forced(MethodChoice::Dense))?;
            let lanczos =
                lowest_eigenpairs_with(&h, m, s.tol, s.seed, &s.forced(MethodChoice::Lanczos))?;
            let max_difference = dense
                .values
                .iter()
                .zip(&lanczos.values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let relative = |r: &EigenResult| {
                r.residuals
                    .iter()
                    .zip(&r.values)
                    .map(|(res, v)| res / v.abs().max(1.0))
                    .fold(0.0, f64::max)
            };
            let max_relative_residual = relative(&dense).max(relative(&lanczos));
            debug_assert_eq!(lanczos.method, Method::Lanczos);
            Ok(Some(SolverRow {
                cutoff: plan.cutoffs[c],
                n,
                sector: sector.to_string(),
                dim: h.dim(),
                pairs: m,
                max_difference,
                max_relative_residual,
                iterations: lanczos.iterations,
                pass: max_difference <= SOLVER_AGREEMENT && max_relative_residual <= s.tol,
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// Lanczos versus dense on every sector basis within the dense threshold.
pub fn run_solver_check(config: &ExperimentConfig) -> Result<Vec<SolverRow>> {
    let plan = Plan::new(config)?;
    solver_rows(&plan)
}

/// Pass/fail tally of one family of assertions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckTally {
    pub name: String,
    /// Hard checks decide the exit status; the others are trend reports.
    pub hard: bool,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub checks: Vec<CheckTally>,
    pub passed: usize,
    pub failed: usize,
    pub fits: Vec<DecayFit>,
    pub max_excitation_discrepancy: f64,
    pub excitation_count_mismatches: usize,
    pub max_hbog_discrepancy: f64,
    pub warnings: Vec<String>,
}

impl Summary {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    pub convergence: ConvergenceReport,
    pub excitations: LevelReport,
    pub bounds: BoundReport,
    pub boost: Vec<BoostRow>,
    pub hbog: LevelReport,
    pub solver: Vec<SolverRow>,
    pub summary: Summary,
}

fn tally(name: &str, hard: bool, results: impl IntoIterator<Item = bool>) -> CheckTally {
    let (mut passed, mut failed) = (0, 0);
    for ok in results {
        if ok {
            passed += 1;
        } else {
            failed += 1;
        }
    }
    CheckTally {
        name: name.into(),
        hard,
        passed,
        failed,
    }
}

/// Whether `|Δ(N)|` is nonincreasing in `N` at every cutoff.
fn decay_trend(report: &ConvergenceReport, cutoffs: &[u32]) -> Vec<bool> {
    cutoffs
        .iter()
        .map(|&c| {
            report
                .at_cutoff(c)
                .windows(2)
                .all(|w| w[1].delta.abs() <= w[0].delta.abs() + 1e-12 * w[0].e0.abs().max(1.0))
        })
        .collect()
}

/// Runs every experiment and tallies the assertions.
pub fn run_verify(config: &ExperimentConfig) -> Result<VerifyReport> {
    let plan = Plan::new(config)?;
    let solved = solve_all(&plan, Kind::Full, true)?;
    let grounds: Vec<(usize, usize, usize, f64)> = solved
        .iter()
        .map(|((c, n), solves)| {
            let zero = solves
                .iter()
                .find(|s| s.sector.is_zero())
                .expect("sector 0");
            (*c, *n, zero.dim, zero.values()[0])
        })
        .collect();
    let convergence = convergence_from(&plan, &grounds)?;
    let excitations = excitations_from(&plan, &solved)?;
    let bounds = bounds_from(&plan, &solved);
    drop(solved);
    let hbog = hbog_from(&plan, &solve_all(&plan, Kind::Bogoliubov, false)?)?;
    let boost = boost_rows(&plan)?;
    let solver = solver_rows(&plan)?;

    let checks = vec![
        tally(
            "ground_energy_bounds",
            true,
            bounds.ground.iter().map(|r| r.pass),
        ),
        tally(
            "kinetic_bounds",
            true,
            bounds.states.iter().map(|r| r.pass_kinetic),
        ),
        tally(
            "product_bound",
            true,
            bounds.states.iter().map(|r| r.pass_product),
        ),
        tally("boost_covariance", true, boost.iter().map(|r| r.pass)),
        tally("solver_agreement", true, solver.iter().map(|r| r.pass)),
        tally(
            "cutoff_refinement",
            true,
            convergence.refinement.iter().map(|r| r.pass),
        ),
        tally(
            "ground_deviation_decay",
            false,
            decay_trend(&convergence, &plan.cutoffs),
        ),
        tally(
            "excitation_counts",
            false,
            excitations.counts.iter().map(|c| c.exact == c.predicted),
        ),
    ];
    let passed = checks.iter().filter(|c| c.hard).map(|c| c.passed).sum();
    let failed = checks.iter().filter(|c| c.hard).map(|c| c.failed).sum();
    let summary = Summary {
        checks,
        passed,
        failed,
        fits: convergence.fits.clone(),
        max_excitation_discrepancy: excitations.max_discrepancy(),
        excitation_count_mismatches: excitations.count_mismatches(),
        max_hbog_discrepancy: hbog.max_discrepancy(),
        warnings: plan.warnings.clone(),
    };
    Ok(VerifyReport {
        convergence,
        excitations,
        bounds,
        boost,
        hbog,
        solver,
        summary,
    })
}

/// Serializes rows as CSV. The header comes from the first row, so no rows
/// give an empty file.
pub fn write_csv<T: Serialize, W: std::io::Write>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn write_csv_file<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    write_csv(std::io::BufWriter::new(fs::File::create(path)?), rows)
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

impl VerifyReport {
    /// Writes one CSV per experiment and `summary.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut put = |name: &str, f: &dyn Fn(&Path) -> Result<()>| -> Result<()> {
            let path = dir.join(name);
            f(&path)?;
            written.push(path);
            Ok(())
        };
        put("convergence.csv", &|p| {
            write_csv_file(p, &self.convergence.rows)
        })?;
        put("convergence_fit.csv", &|p| {
            write_csv_file(p, &self.convergence.fits)
        })?;
        put("refinement.csv", &|p| {
            write_csv_file(p, &self.convergence.refinement)
        })?;
        put("excitations.csv", &|p| {
            write_csv_file(p, &self.excitations.rows)
        })?;
        put("excitation_counts.csv", &|p| {
            write_csv_file(p, &self.excitations.counts)
        })?;
        put("ground_bounds.csv", &|p| {
            write_csv_file(p, &self.bounds.ground)
        })?;
        put("state_bounds.csv", &|p| {
            write_csv_file(p, &self.bounds.states)
        })?;
        put("boost.csv", &|p| write_csv_file(p, &self.boost))?;
        put("hbog.csv", &|p| write_csv_file(p, &self.hbog.rows))?;
        put("hbog_counts.csv", &|p| write_csv_file(p, &self.hbog.counts))?;
        put("solver.csv", &|p| write_csv_file(p, &self.solver))?;
        put("summary.json", &|p| {
            let mut text = serde_json::to_string_pretty(&self.summary)?;
            text.push('\n');
            Ok(fs::write(p, text)?)
        })?;
        Ok(written)
    }
}
