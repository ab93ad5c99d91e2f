use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use stairclear::executor::PredictionMode;

use stairclear_cli::batch;
use stairclear_cli::config::{self, Severity};

/// Scenario-driven simulation of clutter clearing on staircases.
#[derive(Parser)]
#[command(name = "stairclear", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a batch of trials for one scenario.
    Run {
        /// Scenario file path.
        config: PathBuf,
        /// Output directory for record and summary files.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the trial count.
        #[arg(long)]
        trials: Option<u32>,
        /// Override the prediction mode (feedback | baseline).
        #[arg(long)]
        mode: Option<String>,
        /// Also write one record per control tick (large files).
        #[arg(long)]
        tick_log: bool,
    },
    /// Run feedback and open-loop baseline on identical seeds and emit a
    /// paired comparison.
    Compare {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<u32>,
    },
    /// Check a scenario file without running anything.
    Validate { config: PathBuf },
}

fn load_config(
    path: &PathBuf,
    seed: Option<u64>,
    trials: Option<u32>,
    mode: Option<&str>,
) -> Result<config::ScenarioConfig> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let (mut cfg, diags) = match config::parse(&text) {
        Ok(v) => v,
        Err(e) => {
            for d in &e.diagnostics {
                eprintln!("{d}");
            }
            anyhow::bail!("invalid scenario file {}", path.display());
        }
    };
    for d in &diags {
        eprintln!("{d}");
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(m) = mode {
        cfg.mode = match m {
            "feedback" => PredictionMode::Feedback,
            "baseline" | "open_loop" => PredictionMode::OpenLoopBaseline,
            other => anyhow::bail!("unknown mode `{other}` (expected feedback|baseline)"),
        };
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            trials,
            mode,
            tick_log,
        } => {
            let cfg = load_config(&config, seed, trials, mode.as_deref())?;
            let summary = batch::run_batch_to(&cfg, &out, tick_log)?;
            print!("{}", batch::summary_table(&summary));
            println!("records written to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare {
            config,
            out,
            seed,
            trials,
        } => {
            let cfg = load_config(&config, seed, trials, None)?;
            let report = batch::compare_modes(&cfg);
            batch::write_compare(&report, &out)?;
            print!("{}", batch::compare_table(&report));
            println!("records written to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { config } => {
            let text = fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            match config::parse(&text) {
                Ok((cfg, diags)) => {
                    for d in &diags {
                        println!("{d}");
                    }
                    println!(
                        "ok: scenario `{}` with {} object(s), {} plan step(s), {} trial(s)",
                        cfg.name,
                        cfg.objects.len(),
                        cfg.plan.len(),
                        cfg.trials
                    );
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => {
                    for d in &e.diagnostics {
                        println!("{d}");
                    }
                    let errors = e
                        .diagnostics
                        .iter()
                        .filter(|d| d.severity == Severity::Error)
                        .count();
                    println!("invalid: {errors} error(s)");
                    Ok(ExitCode::FAILURE)
                }
            }
        }
    }
}
