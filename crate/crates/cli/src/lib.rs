//! Command-line front end: run configuration, run-directory layout and the
//! `train`, `calibrate`, `evaluate`, `score` and `synth` subcommands.

pub mod commands;
pub mod config;
pub mod run;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use crate::commands::{ScoreArgs, TrainArgs};

#[derive(Debug, Parser)]
#[command(name = "qanogan", version, about = "Quantum and classical WGAN anomaly detection runs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one or more runs from a config file.
    Train {
        #[arg(short, long)]
        config: Option<PathBuf>,
        /// Override a config key, e.g. `--set train.generator_iters=100`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output directory [default: config out_dir, then $QANOGAN_OUT_DIR, then ./runs].
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Train this many runs with seeds seed, seed+1, ... into run-NN subdirectories.
        #[arg(long, default_value_t = 1)]
        repeat: usize,
        /// Calibrate and evaluate every run afterwards and write report.csv.
        #[arg(long)]
        evaluate: bool,
        /// Save the checkpoint and loss history every N generator iterations.
        #[arg(long, value_name = "N")]
        checkpoint_every: Option<usize>,
    },
    /// Choose the F1-optimal threshold for a trained run.
    Calibrate {
        run_dir: PathBuf,
        #[arg(long, default_value = "calibration")]
        split: String,
        /// Override scoring keys of the stored config, e.g. `anomaly.latent_iters=200`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Score the test split of each run and report metrics.
    Evaluate {
        #[arg(required = true)]
        run_dirs: Vec<PathBuf>,
        /// Use this threshold instead of each run's threshold.toml.
        #[arg(long, allow_hyphen_values = true)]
        threshold: Option<f64>,
        /// Also write the report to this file.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Score a single row against a trained run.
    Score {
        run_dir: PathBuf,
        /// Comma-separated feature values in source column order.
        #[arg(long, allow_hyphen_values = true)]
        row: String,
        #[arg(long, allow_hyphen_values = true)]
        threshold: Option<f64>,
        /// The row is already selected and normalized model input.
        #[arg(long)]
        normalized: bool,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Write a synthetic dataset in the Time, features, Class CSV layout.
    Synth {
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(short, long)]
        out: PathBuf,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config, overrides, out, repeat, evaluate, checkpoint_every } => {
            commands::cmd_train(&TrainArgs { config, overrides, out, repeat, evaluate, checkpoint_every })
        }
        Command::Calibrate { run_dir, split, overrides } => {
            commands::cmd_calibrate(&run_dir, &split, &overrides)
        }
        Command::Evaluate { run_dirs, threshold, report, overrides } => {
            commands::cmd_evaluate(&run_dirs, threshold, report.as_deref(), &overrides)
        }
        Command::Score { run_dir, row, threshold, normalized, overrides } => commands::cmd_score(
            &ScoreArgs { run_dir, row, threshold, normalized, overrides },
            &mut std::io::stdout().lock(),
        ),
        Command::Synth { config, overrides, out } => commands::cmd_synth(config.as_deref(), &overrides, &out),
    }
}
