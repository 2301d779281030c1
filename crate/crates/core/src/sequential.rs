//! Batch ingestion and the running-minimum p-value process.
//!
//! Each look refits the control arm on everything accumulated so far and
//! scores the full treatment arm. The reported p-value is the minimum of the
//! pointwise p-values seen so far, so it never increases.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::select_lambda;
use crate::formats::{read_envelope, write_envelope, CHECKPOINT_FORMAT};
use crate::glm::{GlmFamily, Observation};
use crate::penalty::PenaltyConfig;
use crate::score::{score_components, test_statistic, TestResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    pub observations: Vec<Observation>,
    pub sequence_number: u64,
}

impl Batch {
    pub fn new(sequence_number: u64, observations: Vec<Observation>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::invalid(format!("batch {sequence_number} is empty")));
        }
        Ok(Self { observations, sequence_number })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "state", content = "n")]
pub enum Status {
    Running,
    /// Per-arm sample size at the first look whose running p crossed α.
    RejectedAt(usize),
    AcceptedAtHorizon,
}

impl Status {
    pub fn is_terminal(&self) -> bool {
        !matches!(self, Status::Running)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Status::Running => "running",
            Status::RejectedAt(_) => "rejected",
            Status::AcceptedAtHorizon => "accepted",
        }
    }
}

/// One computed look.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatRecord {
    pub sequence_number: u64,
    pub n_control: usize,
    pub n_treat: usize,
    pub lambda_stat: f64,
    pub p_value: f64,
    pub u0: f64,
    pub regularized: bool,
    pub lambda: f64,
    pub active_set_size: usize,
}

/// A look that produced no statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedLook {
    pub sequence_number: u64,
    pub n_control: usize,
    pub n_treat: usize,
    pub reason: String,
}

/// Result of one ingest.
#[derive(Debug, Clone, PartialEq)]
pub enum LookOutcome {
    Computed(StatRecord),
    Skipped(SkippedLook),
}

/// Coefficients from the most recent successful control-arm fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub theta_hat: Vec<f64>,
    pub active_set: Vec<usize>,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentState {
    pub experiment_id: String,
    pub family: GlmFamily,
    pub penalty: PenaltyConfig,
    pub beta0: Vec<f64>,
    pub alpha: f64,
    /// Per-arm sample size at which the experiment stops without rejection.
    pub max_horizon: usize,
    pub batch_size_nominal: usize,
    pub control_data: Vec<Observation>,
    pub treat_data: Vec<Observation>,
    pub stat_history: Vec<StatRecord>,
    pub skipped: Vec<SkippedLook>,
    pub running_min_p: Option<f64>,
    pub status: Status,
    pub rng_seed: u64,
    /// When false the experiment keeps collecting after crossing α and only
    /// reports the crossing once the horizon is reached.
    pub stop_on_reject: bool,
    pub first_crossing: Option<usize>,
    pub last_sequence: Option<u64>,
    pub last_fit: Option<FitSummary>,
}

impl ExperimentState {
    /// `dim` counts the intercept. β₀ defaults to zero.
    pub fn new(
        experiment_id: impl Into<String>,
        family: GlmFamily,
        penalty: PenaltyConfig,
        dim: usize,
        alpha: f64,
        max_horizon: usize,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must include the intercept"));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        if max_horizon == 0 {
            return Err(Error::invalid("horizon must be positive"));
        }
        Ok(Self {
            experiment_id: experiment_id.into(),
            family,
            penalty,
            beta0: vec![0.0; dim],
            alpha,
            max_horizon,
            batch_size_nominal: 0,
            control_data: Vec::new(),
            treat_data: Vec::new(),
            stat_history: Vec::new(),
            skipped: Vec::new(),
            running_min_p: None,
            status: Status::Running,
            rng_seed: 0,
            stop_on_reject: true,
            first_crossing: None,
            last_sequence: None,
            last_fit: None,
        })
    }

    pub fn with_beta0(mut self, beta0: Vec<f64>) -> Result<Self> {
        if beta0.len() != self.beta0.len() {
            return Err(Error::DimensionMismatch(format!(
                "beta0 has length {}, expected {}",
                beta0.len(),
                self.beta0.len()
            )));
        }
        if beta0.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("beta0 must be finite"));
        }
        self.beta0 = beta0;
        Ok(self)
    }

    pub fn with_batch_size(mut self, n: usize) -> Self {
        self.batch_size_nominal = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn with_stop_on_reject(mut self, stop: bool) -> Self {
        self.stop_on_reject = stop;
        self
    }

    pub fn dim(&self) -> usize {
        self.beta0.len()
    }

    /// Per-arm sample size: the smaller arm.
    pub fn n(&self) -> usize {
        self.control_data.len().min(self.treat_data.len())
    }

    pub fn batches_ingested(&self) -> u64 {
        self.last_sequence.map_or(0, |s| s + 1)
    }

    /// Running minimum of the pointwise p-values.
    pub fn current_p_value(&self) -> Result<f64> {
        self.running_min_p.ok_or(Error::NoData)
    }

    /// Appends a batch, recomputes the statistic and updates the decision.
    /// On error the state is left unchanged.
    pub fn ingest_batch(&mut self, batch: Batch) -> Result<LookOutcome> {
        if self.status.is_terminal() {
            return Err(Error::Terminal(self.experiment_id.clone()));
        }
        let expected = self.batches_ingested();
        if batch.sequence_number != expected {
            return Err(Error::OutOfOrder { expected, got: batch.sequence_number });
        }
        if batch.observations.is_empty() {
            return Err(Error::invalid(format!("batch {} is empty", batch.sequence_number)));
        }
        for (i, obs) in batch.observations.iter().enumerate() {
            if obs.dim() != self.dim() {
                return Err(Error::DimensionMismatch(format!(
                    "batch {} observation {i} has {} covariates, expected {}",
                    batch.sequence_number,
                    obs.dim(),
                    self.dim()
                )));
            }
            self.family.validate_response(obs.y)?;
        }

        let (control_len, treat_len) = (self.control_data.len(), self.treat_data.len());
        for obs in batch.observations {
            if obs.treated {
                self.treat_data.push(obs);
            } else {
                self.control_data.push(obs);
            }
        }
        match self.look(batch.sequence_number) {
            Ok(outcome) => {
                self.last_sequence = Some(batch.sequence_number);
                self.apply(&outcome);
                Ok(outcome)
            }
            Err(e) => {
                self.control_data.truncate(control_len);
                self.treat_data.truncate(treat_len);
                Err(e)
            }
        }
    }

    fn look(&mut self, sequence_number: u64) -> Result<LookOutcome> {
        let (n_control, n_treat) = (self.control_data.len(), self.treat_data.len());
        let skip = |reason: String| Ok(LookOutcome::Skipped(SkippedLook { sequence_number, n_control, n_treat, reason }));
        if n_control == 0 || n_treat == 0 {
            return skip("an arm is empty".into());
        }
        let enough = n_control > self.dim() && n_treat > self.dim();
        let model = match select_lambda(&self.control_data, &self.family, &self.penalty, None) {
            Ok((_, m)) => m,
            Err(e) if e.is_data_dependent() => return skip(e.to_string()),
            Err(e) if !enough => return skip(e.to_string()),
            Err(e) => return Err(e),
        };
        if !enough && !model.converged {
            return skip("too few observations and the fit did not converge".into());
        }
        let comp = score_components(&model.theta_hat, &model.sigma_hat, &self.beta0, &self.treat_data, &self.family)?;
        let result: TestResult = test_statistic(&comp, &self.beta0)?;
        self.last_fit =
            Some(FitSummary { theta_hat: model.theta_hat.clone(), active_set: model.active_set.clone(), lambda: model.lambda });
        Ok(LookOutcome::Computed(StatRecord {
            sequence_number,
            n_control,
            n_treat,
            lambda_stat: result.lambda_stat,
            p_value: result.p_value_pointwise,
            u0: result.u0,
            regularized: result.regularized,
            lambda: model.lambda,
            active_set_size: model.active_set.len(),
        }))
    }

    fn apply(&mut self, outcome: &LookOutcome) {
        let n = self.n();
        match outcome {
            LookOutcome::Computed(rec) => {
                let p = match self.running_min_p {
                    Some(prev) => prev.min(rec.p_value),
                    None => rec.p_value,
                };
                self.running_min_p = Some(p);
                self.stat_history.push(rec.clone());
                if p <= self.alpha && self.first_crossing.is_none() {
                    self.first_crossing = Some(n);
                    if self.stop_on_reject {
                        self.status = Status::RejectedAt(n);
                        return;
                    }
                }
            }
            LookOutcome::Skipped(s) => self.skipped.push(s.clone()),
        }
        if n >= self.max_horizon {
            self.status = match self.first_crossing {
                Some(at) => Status::RejectedAt(at),
                None => Status::AcceptedAtHorizon,
            };
        }
    }

    pub fn checkpoint(&self) -> Result<Vec<u8>> {
        write_envelope(CHECKPOINT_FORMAT, self)
    }

    pub fn restore(bytes: &[u8]) -> Result<Self> {
        let state: Self = read_envelope(CHECKPOINT_FORMAT, bytes)?;
        state.validate()?;
        Ok(state)
    }

    fn validate(&self) -> Result<()> {
        let recomputed = self.stat_history.iter().map(|r| r.p_value).reduce(f64::min);
        if recomputed != self.running_min_p {
            return Err(Error::Checkpoint("running minimum disagrees with the recorded history".into()));
        }
        if self.control_data.iter().chain(&self.treat_data).any(|o| o.dim() != self.dim()) {
            return Err(Error::Checkpoint("stored observations do not match the model dimension".into()));
        }
        Ok(())
    }
}
