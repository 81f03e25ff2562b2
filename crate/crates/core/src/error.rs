use std::fmt;

/// Spatial extent of a grid, optionally with a leading channel/bin axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub channels: Option<usize>,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub fn hw(height: usize, width: usize) -> Self {
        Self { channels: None, height, width }
    }

    pub fn chw(channels: usize, height: usize, width: usize) -> Self {
        Self { channels: Some(channels), height, width }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.channels {
            Some(c) => write!(f, "{}x{}x{}", c, self.height, self.width),
            None => write!(f, "{}x{}", self.height, self.width),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: Shape, found: Shape },

    #[error("non-finite {field} at (y={y}, x={x})")]
    NonFinite { field: &'static str, y: usize, x: usize },

    #[error("negative {field} {value} at (y={y}, x={x})")]
    Negative { field: &'static str, y: usize, x: usize, value: f64 },

    #[error("negative probability {value} in bin {bin} at (y={y}, x={x})")]
    NegativeProbability { bin: usize, y: usize, x: usize, value: f64 },

    #[error("probabilities sum to {sum} at (y={y}, x={x})")]
    UnnormalizedProbability { y: usize, x: usize, sum: f64 },

    #[error("bin range inverted at (y={y}, x={x}): v_min {v_min} > v_max {v_max}")]
    InvertedRange { y: usize, x: usize, v_min: f64, v_max: f64 },

    #[error("bin index {index} out of range for {n_bins} bins at (y={y}, x={x})")]
    IndexOutOfRange { y: usize, x: usize, index: usize, n_bins: usize },

    #[error("candidate centers decrease at bin {bin}, (y={y}, x={x})")]
    UnorderedCenters { bin: usize, y: usize, x: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("no valid pixels")]
    NoValidPixels,

    #[error("empty point set")]
    EmptySet,

    #[error("provider failure: {0}")]
    Provider(String),

    #[error("unknown file format: {0}")]
    UnknownFormat(String),

    #[error("truncated file: {0}")]
    Truncated(String),

    #[error("bad magic: {0}")]
    BadMagic(String),

    #[error("dimension overflow: {0}")]
    DimensionOverflow(String),

    #[error("malformed file: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by reading or writing files rather than by
    /// invalid values.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io(_)
                | Error::UnknownFormat(_)
                | Error::Truncated(_)
                | Error::BadMagic(_)
                | Error::DimensionOverflow(_)
                | Error::Malformed(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_shape(expected: Shape, found: Shape) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::ShapeMismatch { expected, found })
    }
}
