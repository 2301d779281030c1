//! Synthetic study design, seeded replications and evaluation metrics.
//!
//! Every replication draws from its own ChaCha8 stream derived from the
//! master seed, so results do not depend on scheduling.

mod design;
mod metrics;
mod study;

pub use design::{
    gen_arms, gen_covariates, gen_response, sample_poisson, to_observations, CovariateSetting, MVN_CORRELATION,
    STRUCTURED_COLUMNS,
};
pub use metrics::{block_mean_std, mean_std, quantile, MeanStd};
pub use study::{
    default_alt_effects, default_theta0, gen_batch, replication_rng, run_multiple_replication, run_multiple_study,
    run_replication, run_single_study, selection_ratios, LookTrace, Method, MultipleReplication, MultipleStudyConfig,
    MultipleStudyReport, ReplicationOutcome, SimulationConfig, SingleStudyReport, StudyMetrics, TrajectoryPoint,
    REJECTION_BLOCK,
};
