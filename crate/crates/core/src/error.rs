use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value for `{0}`")]
    NonFinite(&'static str),

    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },

    #[error("missing field `{0}`")]
    MissingField(String),

    #[error("malformed scenario document: {0}")]
    Parse(String),

    #[error("user {user} sits on the receiver (zero distance)")]
    ZeroDistance { user: usize },

    #[error("cannot recover interference locally: SINR is zero")]
    ZeroSinr,

    #[error("profile is not strictly interior (user {user})")]
    BoundaryProfile { user: usize },

    #[error("brute-force grid too large: {points:.3e} points (limit {limit:.1e})")]
    GridTooLarge { points: f64, limit: f64 },

    #[error("{solver} did not converge in {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("degenerate potential range: V_max = V_min = {0}")]
    DegenerateRange(f64),

    #[error("history window too short: {len} < {min}")]
    WindowTooShort { len: usize, min: usize },

    #[error("sweep grid is empty")]
    EmptyGrid,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Short machine-readable tag, used by the CLI error record.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonFinite(_) => "non_finite",
            Error::Invalid { .. } => "invalid",
            Error::MissingField(_) => "missing_field",
            Error::Parse(_) => "parse",
            Error::ZeroDistance { .. } => "zero_distance",
            Error::ZeroSinr => "zero_sinr",
            Error::BoundaryProfile { .. } => "boundary_profile",
            Error::GridTooLarge { .. } => "grid_too_large",
            Error::NonConvergence { .. } => "non_convergence",
            Error::DegenerateRange(_) => "degenerate_range",
            Error::WindowTooShort { .. } => "window_too_short",
            Error::EmptyGrid => "empty_grid",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
