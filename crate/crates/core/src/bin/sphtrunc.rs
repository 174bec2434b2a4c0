use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sphtrunc::ensembles::{mode_table, rho_grid, WishartConfig};
use sphtrunc::experiments::{
    default_beta_grid, fit_study, read_study_csv, write_study_csv, ExperimentConfig, StudyManifest,
};
use sphtrunc::reconstruction::{solve, Scheme, SolverConfig};
use sphtrunc::ruben::{Spectrum, DEFAULT_EPSILON};
use sphtrunc::truncation::{check_feasibility, mu_bounds, truncate_spectrum, TruncatedSpectrum};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "sphtrunc", version, about = "Spherical truncation of normal covariances and its inversion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the modes of the ordered Wishart eigenvalues (CSV).
    Modes(ModesArgs),
    /// Truncated spectrum μ of a spectrum λ (JSON).
    Truncate(TruncateArgs),
    /// Reconstruct λ from a truncated spectrum μ (JSON).
    Reconstruct(ReconstructArgs),
    /// Monte Carlo convergence study (CSV plus a JSON manifest).
    Study(StudyArgs),
    /// Fit the scaling law to a study CSV (JSON).
    Fit(FitArgs),
}

#[derive(Args)]
struct ModesArgs {
    #[arg(long)]
    v: usize,
    /// Wishart degrees of freedom; defaults to 2v.
    #[arg(long)]
    p: Option<usize>,
    #[arg(long, default_value_t = 100_000)]
    n_samples: usize,
    /// Grenander lag; defaults to N/100.
    #[arg(long)]
    r: Option<usize>,
    /// Grenander exponent.
    #[arg(long)]
    s: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args)]
struct TruncateArgs {
    /// Eigenvalues, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    lambda: Vec<f64>,
    #[arg(long)]
    rho: f64,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value = "gjor")]
    scheme: String,
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    /// Fixed relaxation factor; defaults to ω_opt from the Jacobian at μ.
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long, default_value_t = 1e-7)]
    eps_t: f64,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = 40)]
    warmup: usize,
    #[arg(long, default_value_t = 1_000_000)]
    max_iter: usize,
}

#[derive(Args)]
struct ReconstructArgs {
    /// Truncated eigenvalues, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    mu: Vec<f64>,
    #[arg(long)]
    rho: f64,
    #[command(flatten)]
    solver: SolverArgs,
    /// Include every iterate in the output.
    #[arg(long)]
    history: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StudyArgs {
    #[arg(long)]
    v: usize,
    #[arg(long)]
    p: Option<usize>,
    /// Spectra per (ρ, β) point.
    #[arg(long, default_value_t = 100)]
    n_samples: usize,
    /// Ball radius squared; repeatable.
    #[arg(long, conflicts_with = "rho_from_modes")]
    rho: Vec<f64>,
    /// Use {½Mo[λ_1], Mo[λ_1..λ_v], 2Mo[λ_v]} from a fresh mode table.
    #[arg(long)]
    rho_from_modes: bool,
    /// Samples for the mode table behind --rho-from-modes.
    #[arg(long, default_value_t = 100_000)]
    mode_samples: usize,
    #[arg(long, default_value = "gjor")]
    scheme: String,
    /// Boost slope; repeatable.
    #[arg(long)]
    beta: Vec<f64>,
    /// Comma-separated β values; without a value, 0 to 2 in steps of 1/5.
    #[arg(long, num_args = 0..=1, value_delimiter = ',')]
    beta_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1e-7)]
    eps_t: f64,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = 40)]
    warmup: usize,
    #[arg(long, default_value_t = 1_000_000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// CSV destination; the manifest goes next to it with a .json suffix.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct FitArgs {
    /// Study CSV.
    #[arg(long)]
    input: PathBuf,
    /// Upper end of the fit window in ρ.
    #[arg(long, default_value_t = 1.0)]
    rho_max: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

type CliResult = Result<(), Box<dyn std::error::Error>>;

fn output(path: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: Serialize>(path: &Option<PathBuf>, value: &T) -> CliResult {
    let mut out = output(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn set_threads(threads: usize) {
    if threads > 0 {
        // Fails only if the global pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
}

fn modes(args: ModesArgs) -> CliResult {
    set_threads(args.threads);
    let cfg = WishartConfig::new(args.v, args.p.unwrap_or(2 * args.v))?;
    let table = mode_table(cfg, args.n_samples, args.r, args.s, args.seed)?;
    let mut out = output(&args.out)?;
    table.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct TruncateOutput {
    lambda: Vec<f64>,
    rho: f64,
    epsilon: f64,
    mu: Vec<f64>,
    bounds: Vec<(f64, f64)>,
    in_h: bool,
}

fn truncate(args: TruncateArgs) -> CliResult {
    let spectrum = Spectrum::from_unsorted(args.lambda)?;
    let t = truncate_spectrum(&spectrum, args.rho, args.epsilon)?;
    let report = TruncateOutput {
        bounds: mu_bounds(&spectrum, args.rho)?,
        in_h: check_feasibility(&t.mu, args.rho).in_h,
        lambda: spectrum.into_vec(),
        rho: args.rho,
        epsilon: args.epsilon,
        mu: t.mu,
    };
    write_json(&args.out, &report)
}

impl SolverArgs {
    fn config(&self, record_history: bool) -> Result<SolverConfig, sphtrunc::Error> {
        let cfg = SolverConfig {
            scheme: self.scheme.parse()?,
            omega: self.omega,
            beta: self.beta,
            eps_t: self.eps_t,
            max_iter: self.max_iter,
            warmup: self.warmup,
            epsilon: self.epsilon,
            record_history,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Serialize)]
struct ReconstructOutput {
    config: SolverConfig,
    mu: TruncatedSpectrum,
    trace: sphtrunc::reconstruction::SolverTrace,
}

fn reconstruct(args: ReconstructArgs) -> CliResult {
    let config = args.solver.config(args.history)?;
    let mut mu = args.mu;
    mu.sort_by(f64::total_cmp);
    let mu = TruncatedSpectrum::new(mu, args.rho)?;
    let trace = solve(&mu, &config)?;
    write_json(&args.out, &ReconstructOutput { config, mu, trace })
}

fn study(args: StudyArgs) -> CliResult {
    let p = args.p.unwrap_or(2 * args.v);
    let scheme: Scheme = args.scheme.parse()?;
    let rho_values = if args.rho_from_modes {
        set_threads(args.threads);
        let table = mode_table(WishartConfig::new(args.v, p)?, args.mode_samples, None, None, args.seed)?;
        rho_grid(&table.modes)?
    } else if args.rho.is_empty() {
        return Err("give --rho at least once or --rho-from-modes".into());
    } else {
        args.rho
    };
    let beta_grid = match args.beta_grid {
        Some(g) if g.is_empty() => default_beta_grid(),
        Some(g) => g,
        None if args.beta.is_empty() => vec![0.0],
        None => args.beta,
    };
    let cfg = ExperimentConfig {
        v: args.v,
        p,
        n_samples: args.n_samples,
        rho_values,
        scheme,
        beta_grid,
        eps_t: args.eps_t,
        epsilon: args.epsilon,
        warmup: args.warmup,
        max_iter: args.max_iter,
        seed: args.seed,
    };
    cfg.validate()?;
    if let Some(path) = &args.out {
        let manifest = manifest_path(path);
        write_json(&Some(manifest), &StudyManifest::new(cfg.clone()))?;
    }
    let mut out = output(&args.out)?;
    write_study_csv(&cfg, args.threads, &mut out)?;
    out.flush()?;
    Ok(())
}

fn manifest_path(csv: &Path) -> PathBuf {
    let mut name = csv.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

fn fit(args: FitArgs) -> CliResult {
    let records = read_study_csv(File::open(&args.input)?)?;
    write_json(&args.out, &fit_study(&records, args.rho_max))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Modes(a) => modes(a),
        Command::Truncate(a) => truncate(a),
        Command::Reconstruct(a) => reconstruct(a),
        Command::Study(a) => study(a),
        Command::Fit(a) => fit(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
