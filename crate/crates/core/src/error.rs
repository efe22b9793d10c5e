use thiserror::Error;

/// Errors raised by the attention model and its numerical kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("grid {width}x{height} exceeds the {limit}x{limit} limit")]
    Size { width: usize, height: usize, limit: usize },

    #[error("position ({x}, {y}) lies outside the {width}x{height} grid")]
    Domain {
        x: f64,
        y: f64,
        width: usize,
        height: usize,
    },

    #[error("unstable configuration: {0}")]
    Stability(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("singular feature group at pixel ({x}, {y}): rank {rank}")]
    Singular { x: usize, y: usize, rank: usize },

    #[error("frame {frame}, stage {stage}: {source}")]
    Stage {
        frame: usize,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Wraps `self` with the frame index and pipeline stage it came from.
    pub fn at_stage(self, frame: usize, stage: &'static str) -> Self {
        Error::Stage {
            frame,
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping any stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
