use std::path::Path;

use post_core::formats::{write_envelope, REPORT_FORMAT};
use post_core::ExperimentState;
use serde::Serialize;

use super::{advance, check_family, new_state, rejected_at, status_exit, TrajectoryRow};
use crate::config::TestArgs;
use crate::error::{CliError, CliResult};
use crate::input::ExperimentInput;
use crate::report::{ensure_dir, write_bytes, write_table};

pub const TRAJECTORY: &str = "trajectory";
pub const DECISION_FILE: &str = "decision.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.jsonl";

#[derive(Debug, Clone, Serialize)]
pub struct DecisionRecord {
    pub experiment: String,
    pub family: String,
    pub penalty: String,
    pub alpha: f64,
    pub horizon: usize,
    pub batches_ingested: u64,
    pub n_per_arm: usize,
    pub running_p: Option<f64>,
    pub status: String,
    pub rejected_at: Option<usize>,
    pub exit_code: i32,
}

impl DecisionRecord {
    pub fn of(state: &ExperimentState) -> Self {
        Self {
            experiment: state.experiment_id.clone(),
            family: state.family.kind().name().to_string(),
            penalty: state.penalty.kind().name().to_string(),
            alpha: state.alpha,
            horizon: state.max_horizon,
            batches_ingested: state.batches_ingested(),
            n_per_arm: state.n(),
            running_p: state.running_min_p,
            status: state.status.label().to_string(),
            rejected_at: rejected_at(state.status),
            exit_code: status_exit(state.status),
        }
    }
}

pub fn run(dir: &Path, resume: Option<&Path>, args: &TestArgs) -> CliResult<i32> {
    let settings = args.resolve()?;
    let input = ExperimentInput::load(dir)?;
    let horizon = input.horizon(settings.horizon);
    let mut state = match resume {
        Some(path) => {
            let bytes = std::fs::read(path)
                .map_err(|e| CliError::usage(format!("cannot read checkpoint {}: {e}", path.display())))?;
            let state = ExperimentState::restore(&bytes)?;
            check_family(state.family.kind(), input.manifest.family, &input.label)?;
            if state.dim() != input.manifest.p + 1 {
                return Err(CliError::usage(format!(
                    "checkpoint has dimension {}, {} has p = {}",
                    state.dim(),
                    input.label,
                    input.manifest.p
                )));
            }
            state
        }
        None => new_state(&input, &settings, horizon)?,
    };

    let start = state.batches_ingested() as usize;
    let mut rows: Vec<TrajectoryRow> = Vec::new();
    for k in start..input.batches.len() {
        if state.status.is_terminal() {
            break;
        }
        rows.push(advance(&mut state, &input, k)?);
    }

    ensure_dir(&settings.output)?;
    write_table(&settings.output, TRAJECTORY, &rows, settings.format)?;
    write_bytes(&settings.output, CHECKPOINT_FILE, &state.checkpoint()?)?;
    let record = DecisionRecord::of(&state);
    write_bytes(&settings.output, DECISION_FILE, &write_envelope(REPORT_FORMAT, &record)?)?;
    println!(
        "{}: {} after {} batches (n = {} per arm, running p = {})",
        record.experiment,
        record.status,
        record.batches_ingested,
        record.n_per_arm,
        record.running_p.map_or("none".to_string(), |p| format!("{p:.6}"))
    );
    Ok(record.exit_code)
}
