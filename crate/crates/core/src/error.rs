use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Fock cutoff {cutoff} too small: truncated population {tail:.3e}")]
    CutoffTooSmall { cutoff: usize, tail: f64 },

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("degenerate herald: probability {0:.3e}")]
    DegenerateHerald(f64),

    #[error("time grids differ")]
    GridMismatch,

    #[error("time grid too short: {0}")]
    GridTooShort(String),

    #[error("undersampled: dt = {dt:.3e} s but shortest time constant is {tau_min:.3e} s")]
    Undersampled { dt: f64, tau_min: f64 },

    #[error("event too close to trace edge: {0}")]
    EdgeViolation(String),

    #[error("series tail {0:.3e} exceeds tolerance")]
    SeriesTail(f64),

    #[error("quadrature density negative ({0:.3e})")]
    NegativeDensity(f64),

    #[error("model violation: {0}")]
    ModelViolation(String),

    #[error("optimizer did not converge: {0}")]
    NonConvergence(String),

    #[error("log-likelihood decreased at iteration {iteration}: {before} -> {after}")]
    LikelihoodDecrease { iteration: usize, before: f64, after: f64 },

    #[error("insufficient phase coverage: {0}")]
    PhaseCoverage(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short machine-readable kind, used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::CutoffTooSmall { .. } => "cutoff_too_small",
            Error::DimensionMismatch(..) => "dimension_mismatch",
            Error::DegenerateHerald(_) => "degenerate_herald",
            Error::GridMismatch => "grid_mismatch",
            Error::GridTooShort(_) => "grid_too_short",
            Error::Undersampled { .. } => "undersampled",
            Error::EdgeViolation(_) => "edge_violation",
            Error::SeriesTail(_) => "series_tail",
            Error::NegativeDensity(_) => "negative_density",
            Error::ModelViolation(_) => "model_violation",
            Error::NonConvergence(_) => "non_convergence",
            Error::LikelihoodDecrease { .. } => "likelihood_decrease",
            Error::PhaseCoverage(_) => "phase_coverage",
            Error::Config(_) => "config",
            Error::Schema(_) => "schema",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
