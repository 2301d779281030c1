//! Distributions the test statistic and the p-value process depend on.

mod chisq;
mod cholesky;
mod gamma;
mod mvn;

pub use chisq::{
    chi2_sf, noncentral_chi2_quantile, noncentral_chi2_survival, NoncentralChiSq,
    DEFAULT_TAIL_MASS,
};
pub use cholesky::{cholesky_factor, Cholesky};
pub use gamma::{ln_gamma, regularized_gamma_p, regularized_gamma_q};
pub use mvn::mvn_log_density;
