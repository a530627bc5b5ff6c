//! Command line and HTTP front end.
//!
//! Exit codes: 0 on success, 1 for bad input or usage, 2 for failures of
//! the environment such as unwritable output.

pub mod commands;
pub mod config;
pub mod server;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use slipway_core::Error;

#[derive(Debug, Parser)]
#[command(name = "slipway", version, about = "Runway slipperiness assessment from weather, runway reports and landing telemetry")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, Default, Args)]
pub struct Common {
    /// Seed for every random step; overrides the config file
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML settings file
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic airport: weather.csv, snowtam.csv, landings.csv and ground_truth.csv
    Simulate {
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate raw inputs and write the friction label of every landing as CSV
    Ingest {
        /// Directory holding weather.csv, snowtam.csv and landings.csv
        #[arg(long)]
        data: PathBuf,
        /// Output CSV; stdout if omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the labeled feature table from raw inputs
    Featurize {
        /// Directory holding weather.csv, snowtam.csv and landings.csv
        #[arg(long)]
        data: PathBuf,
        /// Output dataset CSV
        #[arg(long)]
        out: PathBuf,
        /// Leave the runway-report columns empty
        #[arg(long)]
        met_only: bool,
    },
    /// Tune by randomized search, fit both models on all rows and save the bundle
    Train {
        /// Dataset CSV from `featurize`
        #[arg(long)]
        data: PathBuf,
        /// Output model bundle (JSON)
        #[arg(long)]
        out: PathBuf,
        /// Use weather columns only
        #[arg(long)]
        met_only: bool,
        /// Probability shown as 50% on the gauge; defaults to the training positive rate
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Nested cross-validation of the models against the rule-based baselines
    Evaluate {
        /// Dataset CSV from `featurize`
        #[arg(long)]
        data: PathBuf,
        /// Also evaluate on weather columns only and print both side by side
        #[arg(long)]
        met_only: bool,
        /// Directory for report.json and roc.csv
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score every landing of a dataset
    Predict {
        /// Model bundle from `train`
        #[arg(long)]
        model: PathBuf,
        /// Dataset CSV from `featurize`
        #[arg(long)]
        data: PathBuf,
        /// Decision threshold; defaults to the bundle's expected positive rate
        #[arg(long)]
        threshold: Option<f64>,
        /// Output CSV; stdout if omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// SHAP attributions of the classifier for selected landings
    Explain {
        /// Model bundle from `train`
        #[arg(long)]
        model: PathBuf,
        /// Dataset CSV from `featurize`
        #[arg(long)]
        data: PathBuf,
        /// Landing ids to explain; the first `--limit` rows if omitted
        #[arg(long = "landing")]
        landings: Vec<String>,
        #[arg(long, default_value_t = 20)]
        limit: usize,
        /// Explain the friction regressor instead
        #[arg(long)]
        regression: bool,
        /// Output JSON; stdout if omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve assessments over HTTP
    Serve {
        /// Model bundle from `train`
        #[arg(long)]
        model: PathBuf,
        /// Directory holding weather.csv and snowtam.csv
        #[arg(long)]
        data: PathBuf,
        /// roc.csv from `evaluate`, served at /v1/roc
        #[arg(long)]
        roc: Option<PathBuf>,
        /// Listen address; overrides the config file
        #[arg(long)]
        addr: Option<String>,
    },
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_input_error() {
        1
    } else {
        2
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
