use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use nearfield_polar::config::parse_config;
use nearfield_polar::experiments::{run_experiment, Experiment, RunOptions};

/// Figure-data experiments for polar-domain near-field dictionaries.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Cli {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,

    /// coherence-sweep | level-curves | grid-export | design-surface |
    /// nmse-vs-power | se-vs-power. Defaults to `experiment.name`.
    #[arg(long)]
    experiment: Option<String>,

    /// Overrides `monte_carlo.seed`.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory. Defaults to `experiment.output_dir`, then `out`.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Overwrite results produced by a different configuration.
    #[arg(long)]
    force: bool,
}

const CONFIG_ERROR: u8 = 1;
const RUNTIME_ERROR: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();

    let config = match parse_config(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    let Some(name) = cli
        .experiment
        .clone()
        .or_else(|| config.experiment.name.clone())
    else {
        eprintln!("error: no experiment given (use --experiment or experiment.name)");
        return ExitCode::from(CONFIG_ERROR);
    };
    let experiment: Experiment = match name.parse() {
        Ok(e) => e,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    let opts = RunOptions {
        out_dir: cli
            .out
            .or_else(|| config.experiment.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out")),
        seed: cli.seed,
        force: cli.force,
    };
    match run_experiment(experiment, &config, &opts) {
        Ok(summary) => {
            for f in &summary.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(RUNTIME_ERROR)
        }
    }
}
