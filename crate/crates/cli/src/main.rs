use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use bogolab_core::bogoliubov::{bogoliubov_energy, quasiparticle_table};
use bogolab_core::eigensolver::{
    eigenpairs_in_window, lowest_eigenpairs_with, MethodChoice, SolverOptions,
    DEFAULT_DENSE_THRESHOLD,
};
use bogolab_core::fock::{enumerate_basis_with_guard, DEFAULT_BASIS_GUARD};
use bogolab_core::hamiltonian::{build_hbog, build_hn};
use bogolab_core::harness::{run_verify, ExperimentConfig};
use bogolab_core::lattice::{modes_within, Geometry, MomentumMode};
use bogolab_core::potential::Potential;
use bogolab_core::sector::sector_minimum;

/// Bogoliubov predictions and exact diagonalization for bosons on the torus.
#[derive(Parser)]
#[command(name = "bogolab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quasiparticle table: one row per nonzero mode within the cutoff.
    Dispersion(DispersionArgs),
    /// Truncated ground-state correction and tail bound per cutoff.
    Ebog(EbogArgs),
    /// Lowest quasiparticle energy in a momentum sector.
    SectorMin(SectorArgs),
    /// Exact diagonalization in one sector.
    Ed(EdArgs),
    /// Run every experiment of a config and write the reports.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Default,
    Strong,
}

#[derive(Args)]
struct PotentialArgs {
    /// Potential JSON file.
    #[arg(long, conflicts_with_all = ["config", "preset"])]
    potential: Option<PathBuf>,
    /// Experiment config; its potential is used.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
}

impl PotentialArgs {
    fn load(&self) -> Result<Potential> {
        if let Some(path) = &self.potential {
            return Potential::load(path).with_context(|| format!("reading {}", path.display()));
        }
        if let Some(path) = &self.config {
            let config = ExperimentConfig::load(path)
                .with_context(|| format!("reading {}", path.display()))?;
            return Ok(config.potential()?);
        }
        Ok(match self.preset.unwrap_or(Preset::Default) {
            Preset::Default => Potential::default_example(),
            Preset::Strong => Potential::strong_coupling(),
        })
    }
}

#[derive(Args)]
struct DispersionArgs {
    #[command(flatten)]
    potential: PotentialArgs,
    #[arg(long, default_value_t = 3)]
    cutoff: u32,
    #[arg(long, default_value = "ball")]
    geometry: Geometry,
    /// CSV destination; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Summary JSON destination.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct EbogArgs {
    #[command(flatten)]
    potential: PotentialArgs,
    /// Comma-separated cutoffs.
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3, 4, 5, 6, 7, 8])]
    cutoffs: Vec<u32>,
    #[arg(long, default_value = "ball")]
    geometry: Geometry,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct SectorArgs {
    #[command(flatten)]
    potential: PotentialArgs,
    /// Total momentum, e.g. `2` or `1,-1`.
    #[arg(long, allow_hyphen_values = true)]
    target: MomentumMode,
    /// Largest admissible configuration energy; defaults to `e_P`.
    #[arg(long)]
    budget: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Hn,
    Hbog,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Auto,
    Dense,
    Lanczos,
}

#[derive(Args)]
struct EdArgs {
    #[command(flatten)]
    potential: PotentialArgs,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    cutoff: u32,
    #[arg(long, default_value = "ball")]
    geometry: Geometry,
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    sector: MomentumMode,
    #[arg(long, value_enum, default_value = "hn")]
    kind: Kind,
    /// Number of eigenpairs.
    #[arg(long, default_value_t = 6)]
    m: usize,
    /// Return every level up to this far above the lowest instead of `m`.
    #[arg(long)]
    window: Option<f64>,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_DENSE_THRESHOLD)]
    dense_threshold: usize,
    #[arg(long, value_enum, default_value = "auto")]
    method: MethodArg,
    #[arg(long, default_value_t = DEFAULT_BASIS_GUARD)]
    basis_guard: usize,
    /// Write the basis as CSV.
    #[arg(long)]
    dump_basis: Option<PathBuf>,
    /// Write the matrix in Matrix Market format.
    #[arg(long)]
    dump_matrix: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    config: PathBuf,
    /// Report directory; overrides the config's `out_dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    dense_threshold: Option<usize>,
    #[arg(long)]
    window: Option<f64>,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn dispersion(args: DispersionArgs) -> Result<()> {
    let pot = args.potential.load()?;
    let modes = modes_within(pot.dim(), args.cutoff, args.geometry)?;
    let table = quasiparticle_table(&pot, &modes)?;
    let summary = bogoliubov_energy(&pot, &modes)?;

    let mut w = csv::Writer::from_writer(output(args.out.as_deref())?);
    let mut header: Vec<String> = (1..=pot.dim()).map(|i| format!("m_{i}")).collect();
    header.extend(["p2", "e_p", "alpha_p", "beta_p"].map(String::from));
    w.write_record(&header)?;
    for q in table.entries() {
        let mut row: Vec<String> = q.mode.coords().iter().map(|c| c.to_string()).collect();
        row.extend([q.p2, q.e, q.alpha, q.beta].map(|x| x.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    if let Some(path) = &args.summary {
        write_json(
            path,
            &json!({"ebog": summary.ebog_truncated, "tail_bound": summary.tail_bound}),
        )?;
    }
    Ok(())
}

fn ebog(args: EbogArgs) -> Result<()> {
    let pot = args.potential.load()?;
    let mut w = csv::Writer::from_writer(output(args.out.as_deref())?);
    w.write_record(["cutoff", "modes", "ebog", "tail_bound"])?;
    let mut last = None;
    for &cutoff in &args.cutoffs {
        let modes = modes_within(pot.dim(), cutoff, args.geometry)?;
        let s = bogoliubov_energy(&pot, &modes)?;
        w.write_record([
            cutoff.to_string(),
            modes.len().to_string(),
            s.ebog_truncated.to_string(),
            s.tail_bound.to_string(),
        ])?;
        last = Some(s);
    }
    w.flush()?;
    if let (Some(path), Some(s)) = (&args.summary, last) {
        write_json(
            path,
            &json!({"ebog": s.ebog_truncated, "tail_bound": s.tail_bound}),
        )?;
    }
    Ok(())
}

fn sector_min(args: SectorArgs) -> Result<()> {
    let pot = args.potential.load()?;
    let r = sector_minimum(&pot, &args.target, args.budget)?;
    let occupations: Vec<_> = r
        .occupations
        .iter()
        .map(|(m, n)| json!({"mode": m.coords(), "count": n}))
        .collect();
    let value = json!({
        "target": r.target.coords(),
        "value": r.value,
        "occupations": occupations,
        "excitations": r.excitations(),
        "lower_bound": r.lower_bound,
        "degeneracy": r.degeneracy,
    });
    println!("{}", serde_json::to_string_pretty(&value)?);
    Ok(())
}

fn ed(args: EdArgs) -> Result<()> {
    let pot = args.potential.load()?;
    let modes = modes_within(pot.dim(), args.cutoff, args.geometry)?;
    let basis = enumerate_basis_with_guard(&modes, args.n, &args.sector, args.basis_guard)?;
    if basis.is_empty() {
        bail!(
            "sector {} is empty for N = {} at cutoff {}",
            args.sector,
            args.n,
            args.cutoff
        );
    }
    if let Some(path) = &args.dump_basis {
        basis.write_csv(BufWriter::new(File::create(path)?))?;
    }
    let h = match args.kind {
        Kind::Hn => build_hn(&basis, &pot)?,
        Kind::Hbog => build_hbog(&basis, &pot)?,
    };
    if let Some(path) = &args.dump_matrix {
        h.write_matrix_market(BufWriter::new(File::create(path)?))?;
    }
    let opts = SolverOptions {
        dense_threshold: args.dense_threshold,
        method: match args.method {
            MethodArg::Auto => MethodChoice::Auto,
            MethodArg::Dense => MethodChoice::Dense,
            MethodArg::Lanczos => MethodChoice::Lanczos,
        },
        ..SolverOptions::default()
    };
    let result = match args.window {
        Some(w) => eigenpairs_in_window(&h, w, args.tol, args.seed, &opts)?,
        None => lowest_eigenpairs_with(&h, args.m.min(h.dim()), args.tol, args.seed, &opts)?,
    };
    let mut w = csv::Writer::from_writer(output(args.out.as_deref())?);
    w.write_record(["level", "energy", "residual"])?;
    for (i, (e, r)) in result.values.iter().zip(&result.residuals).enumerate() {
        w.write_record([i.to_string(), e.to_string(), r.to_string()])?;
    }
    w.flush()?;
    eprintln!(
        "basis dimension {}, {} nonzeros, {:?} ({} iterations)",
        h.dim(),
        h.nnz(),
        result.method,
        result.iterations
    );
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<bool> {
    let mut config = ExperimentConfig::load(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    if let Some(seed) = args.seed {
        config.solver.seed = seed;
    }
    if let Some(tol) = args.tol {
        config.solver.tol = tol;
    }
    if let Some(t) = args.dense_threshold {
        config.solver.dense_threshold = t;
    }
    if args.window.is_some() {
        config.window = args.window;
    }
    let out_dir = args
        .out_dir
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("bogolab-report"));
    let report = run_verify(&config)?;
    report.write(&out_dir)?;
    let s = &report.summary;
    for check in &s.checks {
        let tag = if check.failed == 0 {
            "ok"
        } else if check.hard {
            "FAIL"
        } else {
            "note"
        };
        println!(
            "{tag:>4}  {}: {} passed, {} failed",
            check.name, check.passed, check.failed
        );
    }
    for warning in &s.warnings {
        println!("warning: {warning}");
    }
    println!(
        "{} passed, {} failed; reports in {}",
        s.passed,
        s.failed,
        out_dir.display()
    );
    Ok(s.all_passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Dispersion(a) => dispersion(a).map(|_| true),
        Command::Ebog(a) => ebog(a).map(|_| true),
        Command::SectorMin(a) => sector_min(a).map(|_| true),
        Command::Ed(a) => ed(a).map(|_| true),
        Command::Verify(a) => verify(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
