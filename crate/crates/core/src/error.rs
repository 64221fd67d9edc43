use thiserror::Error;

/// Errors raised by the subsampling library.
#[derive(Debug, Error)]
pub enum FrameError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("barrier violation: {0}")]
    BarrierViolation(String),

    /// No candidate passed the selection test in some iteration.
    #[error(
        "no candidate satisfied the selection condition in iteration {iteration} \
         (scanned {scanned}); retry with a positive stability factor, e.g. delta = 1e-8"
    )]
    SelectionFailure { iteration: usize, scanned: usize },

    #[error("internal invariant violated: {0}")]
    InternalInvariant(String),

    /// Design matrix of a least-squares problem does not have full column rank.
    #[error("design matrix is rank deficient (smallest singular value {sigma_min:e})")]
    RankDeficient { sigma_min: f64 },

    #[error("invalid spectral model: {0}")]
    InvalidModel(String),

    #[error("node sampler exhausted after {attempts} attempts")]
    SamplerExhausted { attempts: usize },

    #[error("capability not available: {0}")]
    Capability(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl FrameError {
    /// Stable machine-readable code for error reports.
    pub fn code(&self) -> &'static str {
        match self {
            FrameError::InvalidInput(_) => "invalid-input",
            FrameError::InvalidConfig(_) => "invalid-config",
            FrameError::BarrierViolation(_) => "barrier-violation",
            FrameError::SelectionFailure { .. } => "selection-failure",
            FrameError::InternalInvariant(_) => "internal-invariant",
            FrameError::RankDeficient { .. } => "rank-error",
            FrameError::InvalidModel(_) => "invalid-model",
            FrameError::SamplerExhausted { .. } => "sampler-exhausted",
            FrameError::Capability(_) => "capability",
            FrameError::Parse(_) => "parse",
            FrameError::Io(_) => "io",
            FrameError::Json(_) => "json",
        }
    }

    /// Whether the error stems from validating user input rather than from
    /// running an algorithm.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            FrameError::InvalidInput(_)
                | FrameError::InvalidConfig(_)
                | FrameError::Parse(_)
                | FrameError::Io(_)
                | FrameError::Json(_)
                | FrameError::Capability(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, FrameError>;
