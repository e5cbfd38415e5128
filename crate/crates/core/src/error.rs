use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument fell outside the domain of the function.
    Domain { name: &'static str, value: f64 },
    /// Model parameters violate `alpha, beta, b >= 0`, `alpha + beta > 0`.
    InvalidParams(&'static str),
    /// Event times are not strictly increasing, not positive, or exceed the horizon.
    InvalidStream(&'static str),
    /// No usable values remain to build a sample.
    EmptySample,
    TooFewEvents { needed: usize, got: usize },
    InsufficientData { needed: usize, got: usize },
    /// The requested computation is not supported for these parameters.
    Unsupported(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain { name, value } => write!(f, "{name} out of domain: {value}"),
            Error::InvalidParams(msg) => write!(f, "invalid model parameters: {msg}"),
            Error::InvalidStream(msg) => write!(f, "invalid event stream: {msg}"),
            Error::EmptySample => f.write_str("empty sample"),
            Error::TooFewEvents { needed, got } => {
                write!(f, "too few events: need at least {needed}, got {got}")
            }
            Error::InsufficientData { needed, got } => {
                write!(f, "insufficient data: need at least {needed} usable points, got {got}")
            }
            Error::Unsupported(msg) => write!(f, "unsupported configuration: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn check_non_negative(name: &'static str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain { name, value })
    }
}
