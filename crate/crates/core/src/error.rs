use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("no contour pixels")]
    NoContour,

    #[error("gradient out of bounds at ({x}, {y})")]
    GradientOutOfBounds { x: f64, y: f64 },

    #[error("negative normalized radius {0}")]
    NegativeRadius(f64),

    #[error("point ({x}, {y}) is outside patch coverage")]
    OutsideCoverage { x: f64, y: f64 },

    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("patch index {index} out of range for {len} patches")]
    PatchIndex { index: usize, len: usize },

    #[error("degenerate warp: empty contour (level {level}, iteration {iteration})")]
    DegenerateWarp { level: usize, iteration: usize },

    #[error("non-finite energy at level {level}, iteration {iteration}: E_d={data}, E_c={consistency}")]
    NonFiniteEnergy {
        level: usize,
        iteration: usize,
        data: f64,
        consistency: f64,
    },

    #[error("too many pyramid levels: {levels} levels of a {width}x{height} image go below 16x16")]
    TooManyLevels {
        levels: usize,
        width: usize,
        height: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by the filesystem or malformed input files.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Image { .. } | Error::Parse { .. })
    }
}
