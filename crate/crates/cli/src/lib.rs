//! Command-line front end for the spatiotemporal GP toolkit: configuration,
//! file formats, the individual verbs and the benchmark suite.

pub mod benchmark;
pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod io;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
pub use experiment::Experiment;

#[derive(Debug, Parser)]
#[command(
    name = "stgp",
    version,
    about = "Geometry-aware spatiotemporal Gaussian processes on surface meshes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Experiment configuration (JSON). Defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Override the configured root seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory (overrides the configured one).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Laplace-Beltrami eigenpairs of the mesh.
    Eigs,
    /// Aliev-Panfilov ground truth and its noisy observation.
    Simulate,
    /// Fit hyperparameters on a training design and predict the full field.
    FitPredict,
    /// Run the active-learning protocol for the configured strategies.
    ActiveLearn,
    /// Eigenpair sweep, kernel comparison and strategy comparison.
    Benchmark {
        /// Restrict to these sections.
        #[arg(long, value_enum, value_delimiter = ',')]
        only: Vec<benchmark::Section>,
    },
}

/// Executes a parsed command line and returns the JSON summary.
pub fn run(cli: &Cli) -> Result<serde_json::Value> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let out = cli.out.clone().unwrap_or_else(|| config.output_dir());
    let exp = Experiment::new(config)?;
    match &cli.command {
        Command::Eigs => commands::eigs(&exp, &out),
        Command::Simulate => commands::simulate(&exp, &out),
        Command::FitPredict => commands::fit_predict(&exp, &out),
        Command::ActiveLearn => commands::active_learn(&exp, &out),
        Command::Benchmark { only } => {
            let sections = if only.is_empty() {
                &benchmark::ALL_SECTIONS[..]
            } else {
                &only[..]
            };
            benchmark::run(&exp, &out, sections)
        }
    }
}
