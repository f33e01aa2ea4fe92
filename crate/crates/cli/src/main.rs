use clap::{Parser, Subcommand};
use nucomplete_cli::config::DatasetConfig;
use nucomplete_cli::{commands, config};
use std::path::PathBuf;
use std::process::ExitCode;

/// Weighted trace-norm matrix completion under non-uniform sampling.
#[derive(Parser)]
#[command(name = "nucomplete", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment configuration file (flat key = value format).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the plan seed (and the synthetic data seed).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the worker count for experiment cells.
    #[arg(long, global = true)]
    parallelism: Option<usize>,

    /// Override the output directory.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset (ground truth, sampling matrix, draws).
    Generate,
    /// Estimate the sampling matrix from the configured dataset.
    EstimateSampling,
    /// Construct the weight matrix and report bound diagnostics.
    ConstructWeights,
    /// Fit every configured method on the full dataset.
    Fit,
    /// Run the full replicated experiment and write reports.
    Experiment,
    /// Recompute fairness regressions from persisted predictions.
    Fairness,
}

fn load_config(cli: &Cli) -> Result<config::ExperimentConfig, nucomplete::Error> {
    let path = cli.config.as_ref().ok_or_else(|| {
        nucomplete::Error::Config("--config is required for this command".into())
    })?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| nucomplete::Error::io(path.display().to_string(), e))?;
    let mut cfg = config::parse_config(&text)?;
    if let Some(seed) = cli.seed {
        cfg.plan.rng_seed = seed;
        if let DatasetConfig::Synthetic { spec, .. } = &mut cfg.dataset {
            spec.seed = seed;
        }
    }
    if let Some(parallelism) = cli.parallelism {
        if parallelism == 0 {
            return Err(nucomplete::Error::Config("parallelism must be >= 1".into()));
        }
        cfg.parallelism = parallelism;
    }
    if let Some(dir) = &cli.output_dir {
        cfg.output_dir = dir.clone();
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::default().filter_or("NUCOMPLETE_LOG", "warn"),
    )
    .format_timestamp(None)
    .init();

    let cli = Cli::parse();
    let cfg = match load_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };

    let result = match cli.command {
        Command::Generate => commands::cmd_generate(&cfg),
        Command::EstimateSampling => commands::cmd_estimate_sampling(&cfg),
        Command::ConstructWeights => commands::cmd_construct_weights(&cfg),
        Command::Fit => commands::cmd_fit(&cfg),
        Command::Experiment => {
            return match commands::cmd_experiment(&cfg) {
                Ok(status) if status.failed_cells == 0 => {
                    println!(
                        "experiment complete: {} cells -> {}",
                        status.total_cells,
                        cfg.output_dir.display()
                    );
                    ExitCode::SUCCESS
                }
                Ok(status) => {
                    eprintln!(
                        "experiment finished with {}/{} failed cells (see cells.json)",
                        status.failed_cells, status.total_cells
                    );
                    ExitCode::FAILURE
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            };
        }
        Command::Fairness => commands::cmd_fairness(&cfg),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
