use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use kdmc_cli::config::{parse_sampler, parse_solvers, ConfigFile, Experiment, PAPER_PRESET};
use kdmc_cli::{output, run_experiment, CliError, RunOptions};

/// Kinetic-diffusion Monte Carlo experiments for 1D neutral transport.
#[derive(Debug, Parser)]
#[command(name = "kdmc", version)]
struct Args {
    /// Flat TOML file with experiment keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset: paper-1d-reflecting-drift, paper-desk or smoke.
    #[arg(long)]
    preset: Option<String>,
    /// Solvers to run (kinetic, fluid, kdmc_kin, kdmc_fluid or all); repeatable or comma-separated.
    #[arg(long)]
    solver: Vec<String>,
    /// KDMC time steps; repeatable or comma-separated.
    #[arg(long, value_delimiter = ',')]
    dt: Vec<f64>,
    #[arg(long)]
    particles: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Boundary sampler: basic or efficient.
    #[arg(long)]
    sampler: Option<String>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads; defaults to all cores.
    #[arg(long, env = "KDMC_THREADS")]
    threads: Option<usize>,
    /// Reuse the `ref` column of an earlier density.csv instead of running
    /// the kinetic reference.
    #[arg(long)]
    ref_from: Option<PathBuf>,
    #[arg(long, short)]
    quiet: bool,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kdmc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(args: Args) -> Result<(), CliError> {
    let file = match &args.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let preset = args.preset.as_deref().or(file.preset.as_deref()).unwrap_or(PAPER_PRESET);
    let mut exp = Experiment::preset(preset)?;
    exp.apply_file(&file)?;
    if !args.solver.is_empty() {
        exp.solvers = parse_solvers(&args.solver)?;
    }
    if !args.dt.is_empty() {
        exp.dts = args.dt.clone();
    }
    if let Some(n) = args.particles {
        exp.particles = n;
    }
    if let Some(seed) = args.seed {
        exp.seed = seed;
    }
    if let Some(s) = &args.sampler {
        exp.sampler = parse_sampler(s)?;
    }
    exp.validate()?;

    let opts = RunOptions { ref_from: args.ref_from.clone(), verbose: !args.quiet };
    let threads = args.threads.or(file.threads);
    let report = with_threads(threads, || run_experiment(&exp, &opts))??;
    output::write_all(&report, &args.out_dir)?;
    if !args.quiet {
        for row in report.summary_rows() {
            let f = |v: Option<f64>| v.map(|x| format!("{x:.4e}")).unwrap_or_else(|| "-".into());
            eprintln!(
                "dt={:<8} error fluid={} old={} new={}",
                output::dt_label(row.dt),
                f(row.error_fluid),
                f(row.error_old),
                f(row.error_new)
            );
        }
        eprintln!("wrote {}", args.out_dir.display());
    }
    Ok(())
}

#[cfg(feature = "parallel")]
fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(CliError::Config("threads must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Config(format!("cannot start {n} threads: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn with_threads<T>(_threads: Option<usize>, f: impl FnOnce() -> T) -> Result<T, CliError> {
    Ok(f())
}
