use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Quaternion with non-finite or zero-norm components.
    InvalidQuaternion,
    /// Pose with a non-finite translation.
    InvalidPose,
    /// A least-squares scale fit whose denominator vanished.
    DegenerateScale,
    /// No pixel with strictly positive ground-truth depth.
    NoValidPixels,
    EmptyInput,
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    LengthMismatch {
        expected: usize,
        actual: usize,
    },
    TooShort {
        len: usize,
        min: usize,
    },
    /// Depth outside the representable range, in centimeters.
    OutOfRange {
        value: f64,
        min: f64,
        max: f64,
    },
    Consistency(String),
    Geometry(String),
    Plan(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidQuaternion => f.write_str("invalid quaternion (non-finite or zero norm)"),
            Error::InvalidPose => f.write_str("invalid pose (non-finite translation)"),
            Error::DegenerateScale => f.write_str("degenerate scale fit: predicted magnitudes are all zero"),
            Error::NoValidPixels => f.write_str("no valid pixels (ground-truth depth > 0)"),
            Error::EmptyInput => f.write_str("empty input"),
            Error::DimensionMismatch { expected, actual } => {
                write!(f, "dimension mismatch: expected {}x{}, got {}x{}", expected.0, expected.1, actual.0, actual.1)
            }
            Error::LengthMismatch { expected, actual } => {
                write!(f, "length mismatch: expected {expected}, got {actual}")
            }
            Error::TooShort { len, min } => {
                write!(f, "sequence too short: {len} element(s), need at least {min}")
            }
            Error::OutOfRange { value, min, max } => {
                write!(f, "value {value} outside [{min}, {max}]")
            }
            Error::Consistency(msg) => write!(f, "consistency error: {msg}"),
            Error::Geometry(msg) => write!(f, "geometry error: {msg}"),
            Error::Plan(msg) => write!(f, "trajectory plan error: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
