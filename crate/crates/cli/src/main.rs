//! `post`: run sequential heterogeneous-effect tests over batch files, drive
//! simulation studies and inspect checkpoints.

mod commands;
mod config;
mod error;
mod input;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{checkpoint, generate, simulate, test_multi, test_run};
use crate::config::TestArgs;

#[derive(Debug, Parser)]
#[command(name = "post", version, about = "Penalized online sequential tests for heterogeneous treatment effects")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Stream the batches of one experiment directory through the test.
    TestRun {
        /// Directory holding manifest.json and the batch files.
        #[arg(long)]
        input: PathBuf,
        /// Continue from a checkpoint written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[command(flatten)]
        args: TestArgs,
    },
    /// Test several experiments on a common batch schedule with a
    /// multiplicity correction.
    TestMulti {
        /// Experiment directories; repeat the flag once per experiment.
        #[arg(long = "input", required = true)]
        inputs: Vec<PathBuf>,
        /// bc, bh or by.
        #[arg(long)]
        procedure: Option<String>,
        #[command(flatten)]
        args: TestArgs,
    },
    /// Run a synthetic study and write its metrics table.
    Simulate(simulate::SimulateArgs),
    /// Write a synthetic experiment directory.
    Generate(generate::GenerateArgs),
    /// Inspect a checkpoint file.
    Checkpoint {
        #[command(subcommand)]
        action: checkpoint::Action,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::TestRun { input, resume, args } => test_run::run(&input, resume.as_deref(), &args),
        Command::TestMulti { inputs, procedure, args } => test_multi::run(&inputs, procedure.as_deref(), &args),
        Command::Simulate(args) => simulate::run(&args),
        Command::Generate(args) => generate::run(&args),
        Command::Checkpoint { action } => checkpoint::run(&action),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("post: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
