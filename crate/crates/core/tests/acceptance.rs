//! Acceptance suite: one line per criterion, nonzero exit if any fails.

#![allow(clippy::excessive_precision)]

use std::time::{Duration, Instant};

use bogolab_core::bogoliubov::{bogoliubov_energy, dispersion, quasiparticle_table};
use bogolab_core::eigensolver::{lowest_eigenpairs_with, MethodChoice, SolverOptions};
use bogolab_core::fock::enumerate_basis;
use bogolab_core::hamiltonian::build_hn;
use bogolab_core::harness::{
    run_boost_check, run_excitations, run_solver_check, run_verify, ExperimentConfig,
};
use bogolab_core::lattice::{modes_within, Geometry, MomentumMode, TWO_PI, TWO_PI_SQ};
use bogolab_core::potential::{make_potential, Potential};
use bogolab_core::sector::{brute_force_sector_min, sector_minimum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn symmetric(dim: usize, half: &[(Vec<i32>, f64)], v0: f64) -> Potential {
    let mut entries = vec![(MomentumMode::zero(dim), v0)];
    for (c, v) in half {
        let m = MomentumMode::new(c.clone());
        entries.push((m.neg(), *v));
        entries.push((m, *v));
    }
    make_potential(dim, entries).unwrap()
}

fn unit(dim: usize, axis: usize, k: i32) -> Vec<i32> {
    let mut c = vec![0; dim];
    c[axis] = k;
    c
}

fn sweep_potentials(dim: usize) -> Vec<Potential> {
    let diag = vec![1; dim];
    let mut rng = ChaCha8Rng::seed_from_u64(dim as u64);
    let random: Vec<(Vec<i32>, f64)> = (0..4)
        .map(|_| {
            let mut c: Vec<i32> = (0..dim).map(|_| rng.random_range(-3..=3)).collect();
            c[0] = rng.random_range(1..=3);
            (c, rng.random_range(0.0..6.0))
        })
        .collect();
    let mut seen = std::collections::BTreeSet::new();
    let random: Vec<_> = random
        .into_iter()
        .filter(|(c, _)| seen.insert(c.clone()))
        .collect();
    vec![
        Potential::constant(dim, 1.0).unwrap(),
        symmetric(dim, &[(unit(dim, 0, 1), 1.0)], 2.0),
        symmetric(dim, &[(unit(dim, 0, 1), 2.0), (unit(dim, 0, 2), 1.0)], 4.0),
        symmetric(dim, &[(diag, 50.0), (unit(dim, dim - 1, 2), 1e-3)], 60.0),
        symmetric(dim, &random, 3.0),
        symmetric(dim, &[(unit(dim, 0, 8), 1e4)], 1e4),
    ]
}

fn exact_algebra() -> Outcome {
    let start = Instant::now();
    let mut checked = 0usize;
    let mut failures = Vec::new();
    for dim in 1..=3 {
        let modes = modes_within(dim, 8, Geometry::Box).unwrap();
        for pot in sweep_potentials(dim) {
            let table = quasiparticle_table(&pot, &modes).unwrap();
            for q in table.entries() {
                checked += 1;
                let rel = 1e-10;
                let ok = (q.e * q.e - (q.a * q.a - q.b * q.b)).abs() <= rel * q.a * q.a
                    && q.p2 <= q.e * (1.0 + rel)
                    && q.e <= q.a * (1.0 + rel)
                    && q.e >= q.p2.sqrt() * (2.0 * q.b).sqrt() * (1.0 - rel)
                    && (0.0..1.0).contains(&q.alpha);
                if !ok {
                    failures.push(format!("{} in d={dim}", q.mode));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures.is_empty() && elapsed < Duration::from_secs(1),
        format!(
            "{checked} modes, {} failures, {elapsed:.2?}",
            failures.len()
        ),
    )
}

fn ebog_certificate() -> Outcome {
    let start = Instant::now();
    let pot = Potential::strong_coupling();
    let s: Vec<_> = (0..=8)
        .map(|c| bogoliubov_energy(&pot, &modes_within(1, c, Geometry::Ball).unwrap()).unwrap())
        .collect();
    let top = s[8].ebog_truncated;
    let monotone = s
        .windows(2)
        .all(|w| w[1].ebog_truncated <= w[0].ebog_truncated);
    let bracketed = s[..8]
        .iter()
        .all(|x| top <= x.ebog_truncated && top >= x.ebog_truncated - x.tail_bound);
    let elapsed = start.elapsed();
    outcome(
        monotone && bracketed && elapsed < Duration::from_secs(1),
        format!(
            "E^Bog(8) = {top:.12}, tail(1) = {:.3e}, {elapsed:.2?}",
            s[1].tail_bound
        ),
    )
}

fn default_config() -> ExperimentConfig {
    ExperimentConfig::for_potential(&Potential::default_example())
}

fn random_sector_instances() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut feasible, mut infeasible, mut failures) = (0usize, 0usize, Vec::new());
    while feasible < 150 && feasible + infeasible < 1000 {
        let dim = rng.random_range(1..=2);
        let mut half = Vec::new();
        for m in modes_within(dim, 2, Geometry::Box).unwrap().iter() {
            let first = m.coords().iter().find(|&&c| c != 0).copied().unwrap_or(0);
            if first > 0 && rng.random_bool(0.5) {
                half.push((m.coords().to_vec(), rng.random_range(0.0..8.0)));
            }
        }
        let pot = symmetric(dim, &half, rng.random_range(0.0..5.0));
        let target = MomentumMode::new((0..dim).map(|_| rng.random_range(-3..=3)).collect());
        let e_min = modes_within(dim, 3, Geometry::Box)
            .unwrap()
            .iter()
            .filter(|m| !m.is_zero())
            .map(|m| dispersion(&pot, m).unwrap())
            .fold(f64::INFINITY, f64::min);
        // every excitation costs at least e_min, so ≤ 4 fit the budget
        let budget = rng.random_range(1.0..4.99) * e_min;
        let radius = ((budget.sqrt() / TWO_PI).floor() as u32).max(1);
        let search = modes_within(dim, radius, Geometry::Box).unwrap();
        let fast = sector_minimum(&pot, &target, Some(budget)).unwrap();
        let slow = brute_force_sector_min(&pot, &target, 4, &search).unwrap();
        match slow.value.filter(|&v| v <= budget) {
            Some(v) => {
                feasible += 1;
                let ok = fast
                    .value
                    .is_some_and(|f| (f - v).abs() <= 1e-10 * v.max(1.0))
                    && fast.occupations == slow.occupations
                    && fast.value.unwrap() >= fast.lower_bound;
                if !ok {
                    failures.push(format!("{target}: {:?} vs {v}", fast.value));
                }
            }
            None => {
                infeasible += 1;
                if fast.value.is_some() {
                    failures.push(format!("{target}: spurious {:?}", fast.value));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures.is_empty() && feasible >= 100 && elapsed < Duration::from_secs(60),
        format!(
            "{feasible} feasible + {infeasible} infeasible instances, {} mismatches {:?}, {elapsed:.2?}",
            failures.len(),
            failures.iter().take(3).collect::<Vec<_>>()
        ),
    )
}

fn boost_identity() -> Outcome {
    let config = ExperimentConfig {
        n_values: (2..=6).collect(),
        sectors: Some((-1..=1).map(|k| MomentumMode::new(vec![k])).collect()),
        boost_n_max: 6,
        ..default_config()
    };
    let rows = run_boost_check(&config).unwrap();
    let worst = rows.iter().map(|r| r.max_deviation).fold(0.0, f64::max);
    outcome(
        rows.iter().all(|r| r.pass) && rows.len() == 3 * 5 * 2 * 3,
        format!("{} spectra compared, max deviation {worst:.2e}", rows.len()),
    )
}

fn two_by_two() -> Outcome {
    let p2 = TWO_PI_SQ;
    let expected = (p2 + 2.0) - (p2 * p2 + 2.0).sqrt();
    let frozen = 1.974677825141100186;
    let modes = modes_within(1, 1, Geometry::Ball).unwrap();
    let basis = enumerate_basis(&modes, 2, &MomentumMode::zero(1)).unwrap();
    let h = build_hn(&basis, &Potential::default_example()).unwrap();
    let mut values = Vec::new();
    for method in [MethodChoice::Dense, MethodChoice::Lanczos] {
        let opts = SolverOptions {
            method,
            ..SolverOptions::default()
        };
        values.push(
            lowest_eigenpairs_with(&h, 1, 1e-12, 5, &opts)
                .unwrap()
                .values[0],
        );
    }
    let ok = h.dim() == 2
        && (expected - frozen).abs() < 1e-15
        && values.iter().all(|v| (v - expected).abs() <= 1e-9);
    outcome(
        ok,
        format!(
            "dense {:.15}, lanczos {:.15}, closed form {expected:.15}",
            values[0], values[1]
        ),
    )
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    results.push((1, "exact quasiparticle algebra", exact_algebra()));
    results.push((2, "E^Bog truncation certificate", ebog_certificate()));

    let start = Instant::now();
    let report = run_verify(&default_config()).expect("default sweep runs");
    let sweep_time = start.elapsed();

    let ground_ok = report
        .bounds
        .ground
        .iter()
        .all(|r| r.margin_upper >= -1e-9 && r.margin_lower >= -1e-9);
    let states_ok = report
        .bounds
        .states
        .iter()
        .all(|r| r.margin_kinetic_lower >= -1e-9 && r.margin_kinetic_upper >= -1e-9);
    let min_ground = report
        .bounds
        .ground
        .iter()
        .map(|r| r.margin_upper.min(r.margin_lower))
        .fold(f64::INFINITY, f64::min);
    results.push((
        3,
        "ground and kinetic energy bounds",
        outcome(
            ground_ok && states_ok && report.bounds.ground.len() == 33,
            format!(
                "{} ground states (min margin {min_ground:.3e}), {} window states, sweep {sweep_time:.1?}",
                report.bounds.ground.len(),
                report.bounds.states.len()
            ),
        ),
    ));

    let min_product = report
        .bounds
        .states
        .iter()
        .map(|r| r.margin_product)
        .fold(f64::INFINITY, f64::min);
    let min_from_ground = report
        .bounds
        .states
        .iter()
        .map(|r| r.margin_product_from_ground)
        .fold(f64::INFINITY, f64::min);
    results.push((
        4,
        "product bound",
        outcome(
            min_product >= -1e-6,
            format!("min margin {min_product:.4} (measured from the ground energy: {min_from_ground:.4})"),
        ),
    ));

    let rows: Vec<_> = report
        .convergence
        .at_cutoff(3)
        .into_iter()
        .filter(|r| r.n >= 4)
        .collect();
    let monotone = rows
        .windows(2)
        .all(|w| w[1].delta.abs() <= w[0].delta.abs());
    let (first, last) = (rows.first().unwrap(), rows.last().unwrap());
    let halved = last.n == 12 && first.n == 4 && last.delta.abs() <= 0.5 * first.delta.abs();
    let gamma = report
        .convergence
        .fits
        .iter()
        .find(|f| f.cutoff == 3)
        .unwrap()
        .gamma;
    results.push((
        5,
        "ground-state deviation decay",
        outcome(
            monotone && halved,
            format!(
                "|Δ(4)| = {:.4e}, |Δ(12)| = {:.4e}, fitted exponent {:.3}",
                first.delta.abs(),
                last.delta.abs(),
                gamma.unwrap_or(f64::NAN)
            ),
        ),
    ));

    let free = ExperimentConfig {
        sectors: Some((-2..=2).map(|k| MomentumMode::new(vec![k])).collect()),
        ..ExperimentConfig::for_potential(&Potential::constant(1, 2.0).unwrap())
    };
    let free_report = run_excitations(&free).unwrap();
    let one = MomentumMode::new(vec![1]);
    let gap = |n: usize| {
        report.excitations.block(3, n, &one)[0]
            .discrepancy
            .expect("lowest sector-1 level has a prediction")
    };
    let (gap4, gap12) = (gap(4), gap(12));
    results.push((
        6,
        "excitation spectrum",
        outcome(
            free_report.max_discrepancy() <= 1e-9
                && free_report.count_mismatches() == 0
                && gap12.abs() < gap4.abs(),
            format!(
                "free case max discrepancy {:.1e} over {} levels; sector-1 gap error {gap4:.4e} (N=4) -> {gap12:.4e} (N=12)",
                free_report.max_discrepancy(),
                free_report.rows.len()
            ),
        ),
    ));

    results.push((
        7,
        "sector minimum against enumeration",
        random_sector_instances(),
    ));
    results.push((8, "boost covariance", boost_identity()));

    let solver = run_solver_check(&default_config()).unwrap();
    let tol = default_config().solver.tol;
    let worst_diff = solver.iter().map(|r| r.max_difference).fold(0.0, f64::max);
    let worst_res = solver
        .iter()
        .map(|r| r.max_relative_residual)
        .fold(0.0, f64::max);
    let refinement_ok = report.convergence.refinement.iter().all(|r| r.pass);
    results.push((
        9,
        "solver integrity",
        outcome(
            worst_diff <= 1e-8 && worst_res <= tol && refinement_ok && !solver.is_empty(),
            format!(
                "{} bases, max |dense - lanczos| {worst_diff:.1e}, max residual {worst_res:.1e}, {} refinement pairs",
                solver.len(),
                report.convergence.refinement.len()
            ),
        ),
    ));
    results.push((10, "two-particle benchmark", two_by_two()));

    let mut failed = 0;
    for (k, name, o) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {k:>2}: {name}: {}", o.detail);
        failed += usize::from(!o.pass);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
