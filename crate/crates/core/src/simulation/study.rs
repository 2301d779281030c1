use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{FamilyKind, GlmFamily};
use crate::multiple::{run_multiple_post, Procedure};
use crate::penalty::{PenaltyConfig, PenaltyKind};
use crate::sequential::{Batch, ExperimentState, LookOutcome, Status};

use super::design::{gen_covariates, gen_response, to_observations, CovariateSetting, STRUCTURED_COLUMNS};
use super::metrics::{block_mean_std, mean_std, quantile, MeanStd};

/// Replications per block when estimating the spread of a rejection rate.
pub const REJECTION_BLOCK: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    PostMcp,
    PostScad,
    PostAdaLasso,
    /// Unpenalized maximum likelihood on the control arm.
    SstMle,
}

impl Method {
    pub fn penalty(&self) -> PenaltyConfig {
        match self {
            Method::PostMcp => PenaltyConfig::mcp(),
            Method::PostScad => PenaltyConfig::scad(),
            Method::PostAdaLasso => PenaltyConfig::adalasso(),
            Method::SstMle => PenaltyConfig::none(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::PostMcp => "post-mcp",
            Method::PostScad => "post-scad",
            Method::PostAdaLasso => "post-adalasso",
            Method::SstMle => "sst-mle",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.parse::<PenaltyKind>()? {
            PenaltyKind::Mcp => Ok(Method::PostMcp),
            PenaltyKind::Scad => Ok(Method::PostScad),
            PenaltyKind::AdaLasso => Ok(Method::PostAdaLasso),
            PenaltyKind::None => Ok(Method::SstMle),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub covariate_setting: CovariateSetting,
    pub family: GlmFamily,
    /// Effect size placed at every index in `beta_indices`.
    pub b: f64,
    pub theta0: Vec<f64>,
    pub beta_indices: Vec<usize>,
    pub p: usize,
    /// Observations per arm per batch.
    pub batch_n: usize,
    /// Per-arm sample size at which an experiment stops.
    pub horizon_n: usize,
    pub replications: usize,
    pub alpha: f64,
    pub method: Method,
    pub seed: u64,
}

impl SimulationConfig {
    pub fn new(family: GlmFamily, covariate_setting: CovariateSetting, method: Method, b: f64) -> Self {
        let p = 30;
        Self {
            covariate_setting,
            family,
            b,
            theta0: default_theta0(p),
            beta_indices: vec![1, 4],
            p,
            batch_n: 100,
            horizon_n: 1000,
            replications: 100,
            alpha: 0.05,
            method,
            seed: 0,
        }
    }

    pub fn beta(&self) -> Vec<f64> {
        let mut beta = vec![0.0; self.p + 1];
        for &j in &self.beta_indices {
            beta[j] = self.b;
        }
        beta
    }

    pub fn looks(&self) -> usize {
        self.horizon_n.div_ceil(self.batch_n)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < STRUCTURED_COLUMNS + 1 {
            return Err(Error::invalid(format!("p must be at least 7, got {}", self.p)));
        }
        if self.theta0.len() != self.p + 1 {
            return Err(Error::DimensionMismatch(format!("theta0 has length {}, expected {}", self.theta0.len(), self.p + 1)));
        }
        if let Some(j) = self.beta_indices.iter().find(|j| **j > self.p) {
            return Err(Error::invalid(format!("effect index {j} exceeds p = {}", self.p)));
        }
        if !self.b.is_finite() {
            return Err(Error::invalid("effect size must be finite"));
        }
        if self.batch_n == 0 || self.horizon_n < self.batch_n {
            return Err(Error::invalid("need 0 < batch_n <= horizon_n"));
        }
        if self.replications == 0 {
            return Err(Error::invalid("at least one replication is required"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }

    fn experiment(&self, id: String, seed: u64) -> Result<ExperimentState> {
        Ok(ExperimentState::new(id, self.family, self.method.penalty(), self.p + 1, self.alpha, self.horizon_n)?
            .with_batch_size(self.batch_n)
            .with_seed(seed))
    }
}

/// `(0, 1, 1, 1, −1, −1, −1, 0, …, 0)` of length `p + 1`.
pub fn default_theta0(p: usize) -> Vec<f64> {
    let mut t = vec![0.0; p + 1];
    for (j, v) in [1.0, 1.0, 1.0, -1.0, -1.0, -1.0].iter().enumerate() {
        if j < p {
            t[j + 1] = *v;
        }
    }
    t
}

/// Alternative effect sizes used in the multiple-testing design.
pub fn default_alt_effects(kind: FamilyKind) -> Vec<f64> {
    match kind {
        FamilyKind::GaussianIdentity => vec![0.2, 0.4, 0.6, 0.8],
        FamilyKind::BernoulliLogit => vec![1.0, 2.0, 3.0, 4.0],
        FamilyKind::PoissonLog => vec![0.1, 0.2, 0.3, 0.4],
    }
}

/// One batch with `batch_n` control and `batch_n` treated subjects.
pub fn gen_batch(cfg: &SimulationConfig, beta: &[f64], sequence_number: u64, rng: &mut ChaCha8Rng) -> Result<Batch> {
    let n = 2 * cfg.batch_n;
    let x = gen_covariates(cfg.covariate_setting, n, cfg.p, rng)?;
    let treated: Vec<bool> = (0..n).map(|i| i >= cfg.batch_n).collect();
    let y = gen_response(&cfg.family, &cfg.theta0, beta, &x, &treated, rng)?;
    Batch::new(sequence_number, to_observations(&x, &y, &treated)?)
}

/// Independent stream for replication `rep` (and experiment `exp` in the
/// multiple design) under the master seed.
pub fn replication_rng(seed: u64, rep: usize, exp: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((rep as u64) << 16) | exp as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LookTrace {
    pub sequence_number: u64,
    pub n_control: usize,
    pub n_treat: usize,
    pub lambda_stat: Option<f64>,
    pub p_value: Option<f64>,
    pub running_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationOutcome {
    pub replication: usize,
    pub rejected: bool,
    pub stopping_n: Option<usize>,
    pub coverage: Option<f64>,
    pub filter: Option<f64>,
    pub looks: Vec<LookTrace>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyMetrics {
    pub replications: usize,
    pub failures: usize,
    pub rejection_rate: MeanStd,
    pub coverage_ratio: Option<MeanStd>,
    pub filter_ratio: Option<MeanStd>,
    pub fdr: Option<MeanStd>,
    pub tpr: Option<MeanStd>,
    pub stopping_time_median: Option<f64>,
    pub stopping_time_p90: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleStudyReport {
    pub config: SimulationConfig,
    pub metrics: StudyMetrics,
    pub replications: Vec<ReplicationOutcome>,
}

/// Fraction of the structured covariates selected, and fraction of the
/// noise covariates (intercept excluded) left out.
pub fn selection_ratios(theta_hat: &[f64]) -> (f64, f64) {
    let p = theta_hat.len() - 1;
    let useful = 1..=STRUCTURED_COLUMNS.min(p);
    let n_useful = useful.clone().count();
    let coverage = useful.filter(|&j| theta_hat[j] != 0.0).count() as f64 / n_useful as f64;
    let noise = (STRUCTURED_COLUMNS + 1)..=p;
    let n_noise = noise.clone().count();
    let filter = if n_noise == 0 {
        1.0
    } else {
        noise.filter(|&j| theta_hat[j] == 0.0).count() as f64 / n_noise as f64
    };
    (coverage, filter)
}

fn trace_of(outcome: &LookOutcome, running: Option<f64>) -> LookTrace {
    match outcome {
        LookOutcome::Computed(r) => LookTrace {
            sequence_number: r.sequence_number,
            n_control: r.n_control,
            n_treat: r.n_treat,
            lambda_stat: Some(r.lambda_stat),
            p_value: Some(r.p_value),
            running_p: running,
        },
        LookOutcome::Skipped(s) => LookTrace {
            sequence_number: s.sequence_number,
            n_control: s.n_control,
            n_treat: s.n_treat,
            lambda_stat: None,
            p_value: None,
            running_p: running,
        },
    }
}

/// Runs one seeded sequential experiment to its decision.
pub fn run_replication(cfg: &SimulationConfig, rep: usize) -> ReplicationOutcome {
    let mut out = ReplicationOutcome {
        replication: rep,
        rejected: false,
        stopping_n: None,
        coverage: None,
        filter: None,
        looks: Vec::new(),
        failure: None,
    };
    let beta = cfg.beta();
    let mut rng = replication_rng(cfg.seed, rep, 0);
    let mut state = match cfg.experiment(format!("rep{rep}"), cfg.seed) {
        Ok(s) => s,
        Err(e) => {
            out.failure = Some(e.to_string());
            return out;
        }
    };
    for k in 0..cfg.looks() {
        let step = gen_batch(cfg, &beta, k as u64, &mut rng).and_then(|b| state.ingest_batch(b));
        match step {
            Ok(outcome) => out.looks.push(trace_of(&outcome, state.running_min_p)),
            Err(e) => {
                out.failure = Some(e.to_string());
                return out;
            }
        }
        if state.status.is_terminal() {
            break;
        }
    }
    if let Status::RejectedAt(n) = state.status {
        out.rejected = true;
        out.stopping_n = Some(n);
    }
    if let Some(fit) = &state.last_fit {
        let (c, f) = selection_ratios(&fit.theta_hat);
        out.coverage = Some(c);
        out.filter = Some(f);
    }
    out
}

pub fn run_single_study(cfg: &SimulationConfig) -> Result<SingleStudyReport> {
    cfg.validate()?;
    let replications: Vec<ReplicationOutcome> =
        (0..cfg.replications).into_par_iter().map(|rep| run_replication(cfg, rep)).collect();
    let ok: Vec<&ReplicationOutcome> = replications.iter().filter(|r| r.failure.is_none()).collect();
    let rejections: Vec<f64> = ok.iter().map(|r| if r.rejected { 1.0 } else { 0.0 }).collect();
    let coverage: Vec<f64> = ok.iter().filter_map(|r| r.coverage).collect();
    let filter: Vec<f64> = ok.iter().filter_map(|r| r.filter).collect();
    let mut stops: Vec<f64> = ok.iter().filter_map(|r| r.stopping_n.map(|n| n as f64)).collect();
    stops.sort_by(f64::total_cmp);
    let metrics = StudyMetrics {
        replications: replications.len(),
        failures: replications.len() - ok.len(),
        rejection_rate: block_mean_std(&rejections, REJECTION_BLOCK),
        coverage_ratio: mean_std(&coverage),
        filter_ratio: mean_std(&filter),
        fdr: None,
        tpr: None,
        stopping_time_median: quantile(&stops, 0.5),
        stopping_time_p90: quantile(&stops, 0.9),
    };
    Ok(SingleStudyReport { config: cfg.clone(), metrics, replications })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultipleStudyConfig {
    /// Shared design; its `b` is ignored.
    pub base: SimulationConfig,
    pub m: usize,
    pub null_count: usize,
    pub alt_effect_sizes: Vec<f64>,
    pub procedure: Procedure,
}

impl MultipleStudyConfig {
    pub fn new(base: SimulationConfig) -> Self {
        let alt = default_alt_effects(base.family.kind());
        Self { base, m: 32, null_count: 24, alt_effect_sizes: alt, procedure: Procedure::BenjaminiYekutieli }
    }

    /// Effect size of each experiment: nulls first, then alternatives
    /// spread evenly over the listed sizes.
    pub fn effects(&self) -> Vec<f64> {
        let n_alt = self.m - self.null_count;
        let mut b = vec![0.0; self.null_count];
        let k = self.alt_effect_sizes.len();
        b.extend((0..n_alt).map(|i| self.alt_effect_sizes[i * k / n_alt]));
        b
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.m == 0 || self.null_count > self.m {
            return Err(Error::invalid(format!("need 0 <= nulls <= m with m > 0, got {} of {}", self.null_count, self.m)));
        }
        if self.null_count < self.m && self.alt_effect_sizes.is_empty() {
            return Err(Error::invalid("alternatives need at least one effect size"));
        }
        if self.m > 1 << 16 {
            return Err(Error::invalid("at most 65536 experiments per replication"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultipleReplication {
    pub replication: usize,
    /// False-discovery proportion after each batch.
    pub fdr_by_batch: Vec<f64>,
    /// True-positive proportion after each batch; absent without
    /// alternatives.
    pub tpr_by_batch: Vec<Option<f64>>,
    pub decisions: Vec<u8>,
    pub p_values: Vec<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub batch: usize,
    pub n_per_arm: usize,
    pub fdr: f64,
    pub tpr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultipleStudyReport {
    pub config: MultipleStudyConfig,
    pub metrics: StudyMetrics,
    pub trajectory: Vec<TrajectoryPoint>,
    pub replications: Vec<MultipleReplication>,
}

fn proportions(decisions: &[u8], is_alt: &[bool]) -> (f64, Option<f64>) {
    let rejected = decisions.iter().filter(|d| **d == 1).count();
    let false_rej = decisions.iter().zip(is_alt).filter(|(d, a)| **d == 1 && !**a).count();
    let true_rej = rejected - false_rej;
    let n_alt = is_alt.iter().filter(|a| **a).count();
    let fdr = if rejected == 0 { 0.0 } else { false_rej as f64 / rejected as f64 };
    let tpr = (n_alt > 0).then(|| true_rej as f64 / n_alt as f64);
    (fdr, tpr)
}

pub fn run_multiple_replication(cfg: &MultipleStudyConfig, rep: usize) -> MultipleReplication {
    let base = &cfg.base;
    let effects = cfg.effects();
    let is_alt: Vec<bool> = effects.iter().map(|b| *b != 0.0).collect();
    let mut out = MultipleReplication {
        replication: rep,
        fdr_by_batch: Vec::new(),
        tpr_by_batch: Vec::new(),
        decisions: vec![0; cfg.m],
        p_values: vec![1.0; cfg.m],
        failure: None,
    };
    let width = cfg.m.to_string().len();
    let mut experiments = Vec::with_capacity(cfg.m);
    let mut rngs = Vec::with_capacity(cfg.m);
    let mut betas = Vec::with_capacity(cfg.m);
    for (i, &b) in effects.iter().enumerate() {
        let sim = SimulationConfig { b, ..base.clone() };
        betas.push(sim.beta());
        match base.experiment(format!("e{i:0width$}"), base.seed) {
            Ok(e) => experiments.push(e.with_stop_on_reject(false)),
            Err(e) => {
                out.failure = Some(e.to_string());
                return out;
            }
        }
        rngs.push(replication_rng(base.seed, rep, i));
    }
    for k in 0..base.looks() {
        for i in 0..cfg.m {
            let step = gen_batch(base, &betas[i], k as u64, &mut rngs[i]).and_then(|b| experiments[i].ingest_batch(b));
            if let Err(e) = step {
                out.failure = Some(format!("experiment {i}: {e}"));
                return out;
            }
        }
        match run_multiple_post(&experiments, base.alpha, cfg.procedure) {
            Ok(d) => {
                let (fdr, tpr) = proportions(&d, &is_alt);
                out.fdr_by_batch.push(fdr);
                out.tpr_by_batch.push(tpr);
                out.decisions = d;
            }
            Err(e) => {
                out.failure = Some(e.to_string());
                return out;
            }
        }
    }
    out.p_values = experiments.iter().map(|e| e.running_min_p.unwrap_or(1.0)).collect();
    out
}

pub fn run_multiple_study(cfg: &MultipleStudyConfig) -> Result<MultipleStudyReport> {
    cfg.validate()?;
    let reps = cfg.base.replications;
    let replications: Vec<MultipleReplication> =
        (0..reps).into_par_iter().map(|rep| run_multiple_replication(cfg, rep)).collect();
    let ok: Vec<&MultipleReplication> = replications.iter().filter(|r| r.failure.is_none()).collect();
    let fdr: Vec<f64> = ok.iter().filter_map(|r| r.fdr_by_batch.last().copied()).collect();
    let tpr: Vec<f64> = ok.iter().filter_map(|r| r.tpr_by_batch.last().copied().flatten()).collect();
    let any_rejection: Vec<f64> =
        ok.iter().map(|r| if r.decisions.contains(&1) { 1.0 } else { 0.0 }).collect();
    let looks = cfg.base.looks();
    let trajectory = (0..looks)
        .map(|k| {
            let f: Vec<f64> = ok.iter().filter_map(|r| r.fdr_by_batch.get(k).copied()).collect();
            let t: Vec<f64> = ok.iter().filter_map(|r| r.tpr_by_batch.get(k).copied().flatten()).collect();
            TrajectoryPoint {
                batch: k,
                n_per_arm: ((k + 1) * cfg.base.batch_n).min(cfg.base.horizon_n),
                fdr: mean_std(&f).map_or(0.0, |m| m.mean),
                tpr: mean_std(&t).map(|m| m.mean),
            }
        })
        .collect();
    let metrics = StudyMetrics {
        replications: replications.len(),
        failures: replications.len() - ok.len(),
        rejection_rate: block_mean_std(&any_rejection, REJECTION_BLOCK),
        coverage_ratio: None,
        filter_ratio: None,
        fdr: mean_std(&fdr),
        tpr: mean_std(&tpr),
        stopping_time_median: None,
        stopping_time_p90: None,
    };
    Ok(MultipleStudyReport { config: cfg.clone(), metrics, trajectory, replications })
}
