use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point is behind the camera (z = {z:.3e} m)")]
    BehindCamera { z: f64 },

    #[error("not enough points: got {got}, need at least {need}")]
    NotEnoughPoints { got: usize, need: usize },

    #[error("degenerate point configuration (relative singular value {ratio:.3e})")]
    DegenerateConfiguration { ratio: f64 },

    #[error("optimization moved the model centroid behind the camera")]
    DivergedBehindCamera,

    #[error("pose fit rejected: reprojection RMSE {rmse:.2} px exceeds {limit:.2} px")]
    PoorFit { rmse: f64, limit: f64 },

    #[error("joint {joint} angle {angle:.4} rad outside [{lower:.4}, {upper:.4}]")]
    JointLimitViolation {
        joint: usize,
        angle: f64,
        lower: f64,
        upper: f64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }

    /// True for failures caused by the filesystem rather than by input content.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io(_) => true,
            Error::Csv(e) => e.is_io_error(),
            Error::Json(e) => e.is_io(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
