use thiserror::Error;

/// Errors raised anywhere in the fitting, diagnostics and interpretation stack.
#[derive(Debug, Error)]
pub enum LifeError {
    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("all weights are zero")]
    ZeroWeight,

    #[error("linear system is singular even with ridge {ridge:e}; raise the ridge parameter")]
    SingularSystem { ridge: f64 },

    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("training diverged to a non-finite loss at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("iteration {iteration} kept no neurons (observed subset ratios: {ratios:?})")]
    AllNeuronsDropped { iteration: usize, ratios: Vec<f64> },

    #[error("need at least {needed} base learners, found {found}")]
    TooFewLearners { needed: usize, found: usize },

    #[error("weights are not on the probability simplex (sum {sum}, min {min})")]
    WeightsOffSimplex { sum: f64, min: f64 },

    #[error("probability {value} outside the open interval (0, 1)")]
    ProbabilityOutOfRange { value: f64 },

    #[error("model output is constant on the supplied data")]
    DegenerateModel,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("target column `{0}` not found")]
    MissingTarget(String),

    #[error("column `{0}` has zero variance")]
    DegenerateColumn(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("sweep point cp = {cp}: {source}")]
    SweepPoint {
        cp: f64,
        #[source]
        source: Box<LifeError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, LifeError>;
