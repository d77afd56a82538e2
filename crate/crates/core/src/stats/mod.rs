//! Inferential statistics: correlations with p-values and intervals,
//! Benjamini-Hochberg adjustment, one-way ANOVA and the special functions
//! behind their tail probabilities.

mod anova;
mod bootstrap;
mod correlation;
mod fdr;
pub mod special;

use thiserror::Error;

pub use anova::{anova_oneway, pooled_t_statistic, AnovaResult};
pub use bootstrap::{bootstrap_ci, percentile, BootstrapSpec, MIN_BOOTSTRAP_ITERS};
pub use correlation::{
    average_ranks, correlate, correlation_method, correlation_method_with, kendall_tau_b, pearson, spearman,
    CorrelationMethod, CorrelationResult, Interval, Kendall, Method, Pearson, Spearman,
    FISHER_Z_CRITICAL,
};
pub use fdr::bh_fdr;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("undefined: zero variance")]
    ZeroVariance,

    #[error("insufficient data: n={n}, need at least {required}")]
    InsufficientData { n: usize, required: usize },

    #[error("undefined: every value is tied")]
    AllTied,

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("numeric error: {0}")]
    Domain(String),
}

impl StatsError {
    /// True for the "result undefined for this data" markers, as opposed to
    /// caller mistakes.
    pub fn is_undefined_marker(&self) -> bool {
        matches!(
            self,
            StatsError::ZeroVariance | StatsError::InsufficientData { .. } | StatsError::AllTied
        )
    }
}

impl From<StatsError> for crate::Error {
    fn from(e: StatsError) -> Self {
        match e {
            StatsError::Domain(msg) => crate::Error::Numeric(msg),
            other => crate::Error::Validation(other.to_string()),
        }
    }
}
