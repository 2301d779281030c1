use std::path::PathBuf;

use clap::Subcommand;
use post_core::ExperimentState;
use serde::Serialize;

use crate::error::{CliError, CliResult, EXIT_DECISION};

#[derive(Debug, Subcommand)]
pub enum Action {
    /// Print a summary of the stored state as JSON.
    Show { path: PathBuf },
    /// Check the header, length and digest; exits nonzero when rejected.
    Verify { path: PathBuf },
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    experiment: &'a str,
    family: &'static str,
    penalty: &'static str,
    alpha: f64,
    horizon: usize,
    batches_ingested: u64,
    n_control: usize,
    n_treat: usize,
    running_p: Option<f64>,
    status: &'static str,
    first_crossing: Option<usize>,
    looks: usize,
    skipped_looks: usize,
}

fn load(path: &PathBuf) -> CliResult<ExperimentState> {
    let bytes =
        std::fs::read(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(ExperimentState::restore(&bytes)?)
}

pub fn run(action: &Action) -> CliResult<i32> {
    match action {
        Action::Show { path } => {
            let s = load(path)?;
            let summary = Summary {
                experiment: &s.experiment_id,
                family: s.family.kind().name(),
                penalty: s.penalty.kind().name(),
                alpha: s.alpha,
                horizon: s.max_horizon,
                batches_ingested: s.batches_ingested(),
                n_control: s.control_data.len(),
                n_treat: s.treat_data.len(),
                running_p: s.running_min_p,
                status: s.status.label(),
                first_crossing: s.first_crossing,
                looks: s.stat_history.len(),
                skipped_looks: s.skipped.len(),
            };
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Action::Verify { path } => {
            let s = load(path)?;
            println!("ok: {} at batch {}", s.experiment_id, s.batches_ingested());
        }
    }
    Ok(EXIT_DECISION)
}
