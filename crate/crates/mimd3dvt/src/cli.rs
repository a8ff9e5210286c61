//! Argument parsing and dispatch for the `mimd3dvt` binary.

use std::io::Write;

use clap::{Parser, Subcommand};

use crate::commands::{compare, cv, eval, select, synth, train, tune};
use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "mimd3dvt", version, about = "Mixed-input 3D vision transformer for AD/CN classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset of volumes, ROI masks and a subject manifest.
    Synth(synth::SynthArgs),
    /// Pick the slice window and crop centre of each subject's ROI.
    Select(select::SelectArgs),
    /// Train one model on a stratified train/validation/test split.
    Train(train::TrainArgs),
    /// Stratified k-fold cross-validation.
    Cv(cv::CvArgs),
    /// Hyperband search over training hyperparameters.
    Tune(tune::TuneArgs),
    /// Score a saved model.
    Eval(eval::EvalArgs),
    /// Test whether runs differ in per-fold accuracy.
    Compare(compare::CompareArgs),
}

pub fn dispatch(command: &Command) -> Result<String> {
    match command {
        Command::Synth(a) => synth::run(a),
        Command::Select(a) => select::run(a),
        Command::Train(a) => train::run(a),
        Command::Cv(a) => cv::run(a),
        Command::Tune(a) => tune::run(a),
        Command::Eval(a) => eval::run(a),
        Command::Compare(a) => compare::run(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli.command) {
        Ok(text) => {
            let _ = std::io::stdout().write_all(text.as_bytes());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
