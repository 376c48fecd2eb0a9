use thiserror::Error;

/// Errors raised by tensor containers, range finding and the TT builder.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("tensor with {entries} entries exceeds the densification limit of {limit}")]
    Capacity { entries: u128, limit: u128 },

    #[error("reference tensor has zero Frobenius norm")]
    ZeroNorm,

    #[error("degenerate range: every sample vector is zero")]
    DegenerateRange,

    #[error("interpolation system is ill-conditioned (worst column residual {residual:.3e})")]
    IllConditionedInterpolation { residual: f64 },

    #[error(
        "needs backtracking: tau = {tau} interpolation fibers requested but core {core} only has rank {available}"
    )]
    NeedsBacktracking {
        tau: usize,
        core: usize,
        available: usize,
    },

    #[error("stage {stage}: {source}")]
    Stage {
        stage: usize,
        #[source]
        source: Box<CoreError>,
    },

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("unsupported file format version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("oracle failure: {0}")]
    Oracle(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CoreError {
    pub(crate) fn at_stage(self, stage: usize) -> Self {
        match self {
            e @ CoreError::Stage { .. } => e,
            e => CoreError::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    /// Strips any stage wrapping.
    pub fn root(&self) -> &CoreError {
        match self {
            CoreError::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T, E = CoreError> = std::result::Result<T, E>;
