mod commands;
mod config;
mod error;
mod output;
mod report;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::config::{ExperimentConfig, Settings, SEED_ENV};
use crate::error::CliResult;

/// Survey non-response experiments: data generation, training, model
/// selection and interpretation.
#[derive(Debug, Parser)]
#[command(name = "nonresp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// key=value config file; flags override its settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one setting, e.g. `--set model.k=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
    #[arg(long, global = true)]
    model: Option<String>,
    /// Defaults to $NONRESP_SEED, then 0.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// CSV path, or `synth` for generated data.
    #[arg(long, global = true)]
    data: Option<String>,
    #[arg(long, global = true)]
    schema: Option<PathBuf>,
    /// Also render curves as SVG.
    #[arg(long, global = true)]
    svg: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset and its schema.
    Synth,
    /// Fit on a train split, evaluate on the held-out rows.
    TrainEval,
    /// Score one hyperparameter over a list of values with shuffle splits.
    ValidationCurve,
    /// Score the cross product of `grid.<param>` value lists.
    GridSearch,
    /// Permutation importance plus feature correlation clustering.
    Importance,
}

fn settings(cli: &Cli) -> CliResult<Settings> {
    let mut s = Settings::default();
    if let Ok(seed) = std::env::var(SEED_ENV) {
        s.set("seed", &seed);
    }
    if let Some(path) = &cli.config {
        s.merge_file(path)?;
    }
    for pair in &cli.sets {
        s.merge_pair(pair)?;
    }
    if let Some(m) = &cli.model {
        s.set("model", m);
    }
    if let Some(seed) = cli.seed {
        s.set("seed", &seed.to_string());
    }
    if let Some(out) = &cli.out {
        s.set("out", &out.display().to_string());
    }
    if let Some(d) = &cli.data {
        s.set("data", d);
    }
    if let Some(p) = &cli.schema {
        s.set("schema", &p.display().to_string());
    }
    if cli.svg {
        s.set("svg", "true");
    }
    Ok(s)
}

fn run(cli: &Cli) -> CliResult<()> {
    let started = Instant::now();
    let cfg = ExperimentConfig::from_settings(&settings(cli)?)?;
    let outputs = match cli.command {
        Command::Synth => commands::synth(&cfg)?,
        Command::TrainEval => commands::train_eval(&cfg, started)?,
        Command::ValidationCurve => commands::validation(&cfg)?,
        Command::GridSearch => commands::grid(&cfg)?,
        Command::Importance => commands::importance(&cfg)?,
    };
    for path in outputs.commit(&cfg.out)? {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
