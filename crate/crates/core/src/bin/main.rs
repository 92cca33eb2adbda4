//! `cellfree-ris`: runs a Monte Carlo experiment and writes CSV files.
//!
//! Exit codes: 0 success, 1 I/O or other error, 2 configuration error,
//! 3 solver failure in at least half of the trials.

use clap::Parser;
use std::path::PathBuf;
use std::process::ExitCode;

use cellfree_ris::experiment::{run_experiment, write_outputs, ExperimentConfig, ExperimentKind};
use cellfree_ris::Error;

#[derive(Parser, Debug)]
#[command(name = "cellfree-ris", version, about = "Max-min rate experiments for RIS-assisted cell-free downlinks")]
struct Cli {
    /// Experiment TOML file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// line_sweep, cdf, element_sweep or convergence; overrides the file.
    #[arg(long)]
    experiment: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Default bits for alg2/alg6 entries without a suffix.
    #[arg(long)]
    bits: Option<u32>,
    /// Elements per RIS (for element_sweep: the only sweep value).
    #[arg(long)]
    elements: Option<usize>,
    #[arg(long, short)]
    verbose: bool,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut cfg = match (&cli.config, &cli.experiment) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(name)) => ExperimentConfig::for_kind(name.parse()?),
        (None, None) => return Err(Error::Config("either --config or --experiment is required".into())),
    };
    if let Some(name) = &cli.experiment {
        cfg.experiment = name.parse::<ExperimentKind>()?;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.trials {
        cfg.trials = t;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(b) = cli.bits {
        cfg.bits = b;
    }
    if let Some(n) = cli.elements {
        cfg.scenario.elements = n;
        cfg.sweep.elements = vec![n];
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let out = match run_experiment(&cfg, cli.jobs) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(if matches!(e.root(), Error::Config(_)) { 2 } else { 1 });
        }
    };
    match write_outputs(&out, &cfg.out) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    if out.mostly_failed() {
        eprintln!(
            "error: solver failures in {} of {} trials",
            out.failed_trials, out.total_trials
        );
        return ExitCode::from(3);
    }
    ExitCode::SUCCESS
}
