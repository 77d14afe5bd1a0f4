use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("profile is not positive: f({site:?}) = {value:e} (max {max:e})")]
    PositivityViolation { site: Vec<i64>, value: f64, max: f64 },

    #[error("spectral parameter outside the bulk: {0}")]
    OutsideBulk(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("symbol denominator nearly singular (min modulus {min_modulus:e})")]
    NearSingularSymbol { min_modulus: f64 },

    #[error("renormalized symbol is not a contraction (sup modulus {sup:e})")]
    ContractionFailure { sup: f64 },

    #[error("field does not sum to zero (sum {sum:e})")]
    SumZeroViolation { sum: f64 },

    #[error("support violation: {0}")]
    SupportViolation(String),

    #[error("dimension {d} too low for this limit (needs d >= {min})")]
    DimensionTooLow { d: usize, min: usize },

    #[error("quadrature did not converge: {0}")]
    NonConvergence(String),

    #[error("size cap exceeded: N = {n} > {cap}")]
    SizeCap { n: usize, cap: usize },

    #[error("solve failed: {0}")]
    SolveFailure(String),

    #[error("evaluation budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("unsupported label: {0}")]
    UnsupportedLabel(String),

    #[error("missing kernel: {0}")]
    MissingKernel(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("degenerate fit: {0}")]
    FitDegenerate(String),

    #[error("wraparound mass {mass:e} exceeds {limit:e}")]
    WraparoundMass { mass: f64, limit: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("decode error: {0}")]
    Decode(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config { .. }
                | Error::Decode(_)
                | Error::Json(_)
                | Error::InvalidArgument(_)
                | Error::InvalidGeometry(_)
                | Error::InvalidProfile(_)
                | Error::InvalidGraph(_)
                | Error::DimensionMismatch { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
