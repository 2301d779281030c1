//! Penalized online sequential testing (POST) for heterogeneous treatment
//! effects in generalized linear models.
//!
//! The crate is organised bottom-up:
//!
//! * [`distributions`]: chi-squared (central and noncentral), multivariate
//!   normal log-density and a Cholesky factorization.
//! * [`glm`]: exponential-family semantics for the Gaussian/identity,
//!   Bernoulli/logit and Poisson/log models.
//! * [`penalty`]: adaptive lasso, SCAD and MCP penalties with their exact
//!   univariate thresholding rules.
//! * [`fit`]: IRLS + coordinate descent fitting on the control arm, BIC
//!   tuning and the active-set covariance of the estimator.
//! * [`score`]: the treatment-arm score statistic and its chi-squared
//!   calibration.
//! * [`sequential`]: batch ingestion, the running-minimum p-value process,
//!   stopping and checkpointing.
//! * [`multiple`]: Bonferroni, Benjamini–Hochberg and Benjamini–Yekutieli
//!   selection over many experiments.
//! * [`simulation`]: the synthetic study design and its metrics.
//! * [`formats`]: batch files, manifests and versioned record envelopes.

pub mod distributions;
pub mod error;
pub mod fit;
pub mod formats;
pub mod glm;
pub mod multiple;
pub mod penalty;
pub mod score;
pub mod sequential;
pub mod simulation;

pub use error::{Error, Result};
pub use fit::FittedModel;
pub use glm::{FamilyKind, GlmFamily, Observation};
pub use penalty::{PenaltyConfig, PenaltyKind};
pub use score::{ScoreComponents, TestResult};
pub use sequential::{Batch, ExperimentState, Status};
