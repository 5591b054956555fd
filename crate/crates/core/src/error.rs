use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the estimation core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("mixed coordinate metrics")]
    MixedMetrics,
    #[error("degenerate variance: input is constant")]
    DegenerateVariance,
    #[error("degenerate weights: {0}")]
    DegenerateWeights(String),
    #[error("singular design matrix")]
    SingularDesign,
    #[error("insufficient data: {n} observations for {k} parameters")]
    InsufficientData { n: usize, k: usize },
    #[error("degenerate residual moments")]
    DegenerateResiduals,
    #[error("robust LM denominator non-positive (D = {d}, T = {t}, d_lambda = {d_lambda}, d_rho = {d_rho})")]
    DiagnosticDegeneracy {
        d: f64,
        t: f64,
        d_lambda: f64,
        d_rho: f64,
    },
    #[error("estimation failed: {message}")]
    Estimation {
        message: String,
        /// `(coefficient, log-likelihood)` pairs visited before giving up.
        trace: Vec<(f64, f64)>,
    },
}

pub type Result<T> = core::result::Result<T, Error>;
