use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

/// Error type shared by all modules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// A precondition on an argument was violated.
    InvalidArgument(String),
    /// A factor-base prime divides n; the caller should treat this as an
    /// immediate factorization success rather than an error.
    EarlyFactor { divisor: u64 },
    /// Hensel lifting hit a root r with p | r, which cannot be lifted.
    SingularRoot { root: u64, prime: u64 },
    /// A quantized weight set has more distinct values than the hardware
    /// allows on a single neuron.
    ConstraintViolation { distinct: usize, max_distinct: usize },
    /// A tonic period exceeds what a single hardware neuron can express.
    RangeError { modulus: u64, max: u64 },
    /// An ROC metric was requested for a score set without both classes.
    UndefinedMetric(String),
    /// The factorization driver ran out of interval doublings or
    /// dependencies without finding a nontrivial factor.
    Exhausted(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::EarlyFactor { divisor } => {
                write!(f, "factor base prime {divisor} divides n")
            }
            Error::SingularRoot { root, prime } => {
                write!(f, "singular root {root} (divisible by {prime}) cannot be lifted")
            }
            Error::ConstraintViolation { distinct, max_distinct } => write!(
                f,
                "{distinct} distinct synaptic weights exceed the limit of {max_distinct}"
            ),
            Error::RangeError { modulus, max } => {
                write!(f, "tonic period {modulus} exceeds hardware maximum {max}")
            }
            Error::UndefinedMetric(msg) => write!(f, "undefined metric: {msg}"),
            Error::Exhausted(msg) => write!(f, "exhausted: {msg}"),
        }
    }
}

impl std::error::Error for Error {}
