use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use rfk_cli::commands::{run, RunError};
use rfk_cli::config::{Config, ConfigError, Experiment, ExperimentConfig};

/// Exit codes: 0 all checks pass, 1 some check failed, 2 bad config or
/// usage, 3 the computation itself failed.
const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "rfk", version, about = "Feynman-Kac exit-time experiments on model manifolds")]
struct Cli {
    /// estimate, field, exitdist, kernelcheck (alias verify-kernels),
    /// dirichletcheck, calibrate, restart, boundary, eigenscan or accept.
    command: Experiment,

    /// Flat `section.key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Overrides `sim.seed`.
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads; falls back to RFK_THREADS, then to all cores.
    #[arg(long)]
    threads: Option<usize>,

    /// CSV destination; falls back to the config's `output`, then stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, ConfigError> {
    let mut raw = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError::new(format!("cannot read {}: {e}", path.display())))?;
            Config::parse(&text)?
        }
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        raw.set("sim.seed", seed.to_string());
    }
    ExperimentConfig::from_config(raw, Some(cli.command))
}

fn threads(cli: &Cli) -> Result<Option<usize>, ConfigError> {
    if let Some(k) = cli.threads {
        return Ok(Some(k));
    }
    match std::env::var("RFK_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| ConfigError::new(format!("RFK_THREADS `{v}` is not a thread count"))),
        Err(_) => Ok(None),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("rfk: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let workers = match threads(&cli) {
        Ok(Some(0)) => {
            eprintln!("rfk: thread count must be at least 1");
            return ExitCode::from(EXIT_CONFIG);
        }
        Ok(k) => k,
        Err(e) => {
            eprintln!("rfk: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(k) = workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("rfk: cannot start worker pool: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    }

    let table = match run(&cfg, &mut |line| eprintln!("{line}")) {
        Ok(t) => t,
        Err(RunError::Config(e)) => {
            eprintln!("rfk: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(e) => {
            eprintln!("rfk: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };

    let out = cli.out.clone().or_else(|| cfg.output.as_ref().map(PathBuf::from));
    match out {
        Some(path) => {
            if let Err(e) = table.write(&path) {
                eprintln!("rfk: cannot write {}: {e}", path.display());
                return ExitCode::from(EXIT_RUNTIME);
            }
        }
        None => print!("{}", table.render()),
    }
    if table.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAIL)
    }
}
