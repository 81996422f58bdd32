//! Command-line front end: dataset synthesis, training, evaluation,
//! forensic analysis and splice-fixture generation.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "blinkscan", version, about = "Eye-blink based screening of face videos")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub args: CommonArgs,
}

#[derive(Debug, Subcommand, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Render the synthetic dataset: labelled crops, landmarks, face clips.
    Synth,
    /// Train the frame classifier, then the LRCN on its frozen features.
    Train,
    /// ROC curves of each method on the held-out videos.
    Eval,
    /// Blink report and verdict for one video (exit 2 when suspect).
    Analyze,
    /// Splice a source face into every frame of a target clip.
    Composite,
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Classifier name(s): cnn, lrcn, ear.
    #[arg(long, global = true, value_delimiter = ',')]
    pub method: Vec<String>,
    #[arg(long, global = true)]
    pub input: Vec<PathBuf>,
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true)]
    pub checkpoint: Vec<PathBuf>,
    #[arg(long, global = true)]
    pub fps: Option<f64>,
}

/// What a successful run concluded.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Done,
    Authentic,
    Suspect,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Done | Outcome::Authentic => 0,
            Outcome::Suspect => 2,
        }
    }
}

/// Exit code for any error.
pub const EXIT_ERROR: u8 = 1;

pub fn run(cli: &Cli) -> Result<Outcome> {
    let mut config = match &cli.args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.args.seed {
        config.seed = seed;
    }
    let a = &cli.args;
    match cli.command {
        Command::Synth => commands::synth::run(&config, a),
        Command::Train => commands::train::run(&config, a),
        Command::Eval => commands::eval::run(&config, a),
        Command::Analyze => commands::analyze::run(&config, a),
        Command::Composite => commands::composite::run(&config, a),
    }
}

/// Parses `args` (program name first) and runs.
pub fn run_args<I, S>(args: I) -> Result<Outcome>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    run(&Cli::try_parse_from(args)?)
}
