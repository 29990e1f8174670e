use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    Dimension(String),

    #[error("intensity {value} at index {index} exceeds the 10-bit sensor range")]
    IntensityRange { index: usize, value: u16 },

    #[error("face rectangle does not intersect the {width}x{height} image")]
    NoFace { width: usize, height: usize },

    #[error("expected {expected} landmarks, got {got} ({side})")]
    LandmarkCount {
        side: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("landmark {index} has a non-finite coordinate ({side})")]
    NonFiniteLandmark { side: &'static str, index: usize },

    #[error("landmark index {0} out of range 0..45")]
    IndexOutOfRange(usize),

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("singular least-squares fit along the {0} axis")]
    SingularFit(&'static str),

    #[error("point {index} lies behind the camera (z = {z})")]
    BehindCamera { index: usize, z: f64 },

    #[error("model expects {expected} input channels, got {got}")]
    ChannelMismatch { expected: usize, got: usize },

    #[error("evidence must be non-negative, got {0}")]
    NegativeEvidence(f64),

    #[error("score set must contain both live and spoof samples")]
    SingleClass,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed {what} at byte offset {offset}: {message}")]
    Format {
        what: &'static str,
        offset: u64,
        message: String,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
