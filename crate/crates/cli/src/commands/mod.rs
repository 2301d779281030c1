pub mod checkpoint;
pub mod generate;
pub mod simulate;
pub mod test_multi;
pub mod test_run;

use post_core::sequential::{LookOutcome, Status};
use post_core::{ExperimentState, FamilyKind};
use serde::Serialize;

use crate::config::Settings;
use crate::error::{CliError, CliResult, EXIT_ACCEPTED, EXIT_DECISION, EXIT_RUNNING};
use crate::input::ExperimentInput;

/// One row of a per-batch trajectory file.
#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRow {
    pub experiment: String,
    pub batch: u64,
    pub file: String,
    pub n_control: usize,
    pub n_treat: usize,
    pub lambda_stat: Option<f64>,
    pub p_value: Option<f64>,
    pub running_p: Option<f64>,
    pub status: String,
    pub note: String,
}

pub fn status_exit(status: Status) -> i32 {
    match status {
        Status::RejectedAt(_) => EXIT_DECISION,
        Status::AcceptedAtHorizon => EXIT_ACCEPTED,
        Status::Running => EXIT_RUNNING,
    }
}

pub fn rejected_at(status: Status) -> Option<usize> {
    match status {
        Status::RejectedAt(n) => Some(n),
        _ => None,
    }
}

/// Fresh state for one experiment directory under the resolved settings.
pub fn new_state(input: &ExperimentInput, settings: &Settings, horizon: usize) -> CliResult<ExperimentState> {
    let family = input.manifest.glm_family()?;
    if let Some(expected) = settings.family {
        check_family(expected, family.kind(), &input.label)?;
    }
    let dim = input.manifest.p + 1;
    let mut state = ExperimentState::new(input.label.clone(), family, settings.penalty.clone(), dim, settings.alpha, horizon)?
        .with_seed(settings.seed);
    if let Some(n) = settings.batch_size {
        state = state.with_batch_size(n);
    } else if let Some(b) = input.batches.first() {
        state = state.with_batch_size(b.observations.len() / 2);
    }
    if let Some(b0) = &settings.beta0 {
        state = state.with_beta0(b0.clone()).map_err(|e| CliError::usage(e.to_string()))?;
    }
    Ok(state)
}

pub fn check_family(expected: FamilyKind, found: FamilyKind, label: &str) -> CliResult<()> {
    if expected != found {
        return Err(CliError::usage(format!(
            "--family {} disagrees with the manifest of {label} ({})",
            expected.name(),
            found.name()
        )));
    }
    Ok(())
}

/// Ingests batch `k` of `input` and returns its trajectory row.
pub fn advance(state: &mut ExperimentState, input: &ExperimentInput, k: usize) -> CliResult<TrajectoryRow> {
    let batch = input.batches[k].clone();
    let outcome = state.ingest_batch(batch)?;
    let (lambda_stat, p_value, note) = match &outcome {
        LookOutcome::Computed(r) => (Some(r.lambda_stat), Some(r.p_value), String::new()),
        LookOutcome::Skipped(s) => (None, None, format!("skipped: {}", s.reason)),
    };
    Ok(TrajectoryRow {
        experiment: state.experiment_id.clone(),
        batch: input.batches[k].sequence_number,
        file: input.file_name(k),
        n_control: state.control_data.len(),
        n_treat: state.treat_data.len(),
        lambda_stat,
        p_value,
        running_p: state.running_min_p,
        status: state.status.label().to_string(),
        note,
    })
}
