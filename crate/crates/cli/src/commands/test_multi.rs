use std::path::PathBuf;

use post_core::formats::{write_envelope, REPORT_FORMAT};
use post_core::multiple::{MultipleTestInput, Procedure};
use post_core::sequential::Status;
use post_core::ExperimentState;
use rayon::prelude::*;
use serde::Serialize;

use super::{advance, new_state, rejected_at, TrajectoryRow};
use crate::config::TestArgs;
use crate::error::{CliError, CliResult, EXIT_ACCEPTED, EXIT_DECISION, EXIT_RUNNING};
use crate::input::ExperimentInput;
use crate::report::{ensure_dir, write_bytes, write_table};

pub const DECISIONS: &str = "decisions";
pub const TRAJECTORY: &str = "trajectory";
pub const DECISION_FILE: &str = "decision.jsonl";
pub const CHECKPOINT_DIR: &str = "checkpoints";

#[derive(Debug, Clone, Serialize)]
pub struct DecisionRow {
    pub experiment: String,
    pub input: String,
    pub p_value: f64,
    pub decision: u8,
    pub status: String,
    pub first_crossing: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
struct MultiDecision {
    procedure: Procedure,
    alpha: f64,
    batches: usize,
    experiments: Vec<DecisionRow>,
    exit_code: i32,
}

fn decide(states: &[ExperimentState], alpha: f64, procedure: Procedure) -> CliResult<Vec<u8>> {
    let p = states.iter().map(|s| s.running_min_p.unwrap_or(1.0)).collect();
    let labels = states.iter().map(|s| s.experiment_id.clone()).collect();
    let input = MultipleTestInput::new(p, alpha, labels)?;
    let mut d = vec![0u8; states.len()];
    for i in procedure.apply(&input) {
        d[i] = 1;
    }
    Ok(d)
}

/// Experiments keep collecting after crossing their own threshold so that
/// every running p-value is observed at the same look; the correction is
/// applied after each common look and the last one is reported.
pub fn run(dirs: &[PathBuf], procedure: Option<&str>, args: &TestArgs) -> CliResult<i32> {
    let settings = args.resolve()?;
    let procedure: Procedure = match procedure.map(str::to_string).or(settings.procedure.clone()) {
        Some(s) => s.parse().map_err(|e: post_core::Error| CliError::usage(e.to_string()))?,
        None => Procedure::BenjaminiYekutieli,
    };
    let inputs = dirs.iter().map(|d| ExperimentInput::load(d)).collect::<CliResult<Vec<_>>>()?;
    let mut labels: Vec<&str> = inputs.iter().map(|i| i.label.as_str()).collect();
    labels.sort_unstable();
    if labels.windows(2).any(|w| w[0] == w[1]) {
        return Err(CliError::usage("experiment directories must have distinct names"));
    }
    let batches = inputs[0].batches.len();
    if let Some(bad) = inputs.iter().find(|i| i.batches.len() != batches) {
        return Err(CliError::Core(post_core::Error::InvalidArgument(format!(
            "{} has {} batches, {} has {batches}; experiments must share a batch schedule",
            bad.label,
            bad.batches.len(),
            inputs[0].label
        ))));
    }
    let mut states = inputs
        .iter()
        .map(|i| Ok(new_state(i, &settings, i.horizon(settings.horizon))?.with_stop_on_reject(false)))
        .collect::<CliResult<Vec<_>>>()?;

    let mut rows: Vec<TrajectoryRow> = Vec::new();
    let mut decisions = vec![0u8; states.len()];
    let mut looks = 0;
    for k in 0..batches {
        if states.iter().all(|s| s.status.is_terminal()) {
            break;
        }
        let step: Vec<Option<TrajectoryRow>> = states
            .par_iter_mut()
            .zip(inputs.par_iter())
            .map(|(s, i)| if s.status.is_terminal() { Ok(None) } else { advance(s, i, k).map(Some) })
            .collect::<CliResult<Vec<_>>>()?;
        rows.extend(step.into_iter().flatten());
        decisions = decide(&states, settings.alpha, procedure)?;
        looks = k + 1;
    }

    let experiments: Vec<DecisionRow> = states
        .iter()
        .zip(&inputs)
        .zip(&decisions)
        .map(|((s, i), d)| DecisionRow {
            experiment: s.experiment_id.clone(),
            input: i.label.clone(),
            p_value: s.running_min_p.unwrap_or(1.0),
            decision: *d,
            status: s.status.label().to_string(),
            first_crossing: s.first_crossing.or(rejected_at(s.status)),
        })
        .collect();
    let exit_code = if decisions.contains(&1) {
        EXIT_DECISION
    } else if states.iter().all(|s| matches!(s.status, Status::AcceptedAtHorizon | Status::RejectedAt(_))) {
        EXIT_ACCEPTED
    } else {
        EXIT_RUNNING
    };

    let out = &settings.output;
    ensure_dir(out)?;
    write_table(out, DECISIONS, &experiments, settings.format)?;
    write_table(out, TRAJECTORY, &rows, settings.format)?;
    let record = MultiDecision { procedure, alpha: settings.alpha, batches: looks, experiments, exit_code };
    write_bytes(out, DECISION_FILE, &write_envelope(REPORT_FORMAT, &record)?)?;
    let cp_dir = out.join(CHECKPOINT_DIR);
    ensure_dir(&cp_dir)?;
    for s in &states {
        write_bytes(&cp_dir, &format!("{}.jsonl", s.experiment_id), &s.checkpoint()?)?;
    }
    let picked: Vec<&str> =
        record.experiments.iter().filter(|r| r.decision == 1).map(|r| r.experiment.as_str()).collect();
    println!("{}: {} of {} rejected {:?}", procedure.short_name(), picked.len(), record.experiments.len(), picked);
    Ok(exit_code)
}

