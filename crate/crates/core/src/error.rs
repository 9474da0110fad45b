use thiserror::Error;

/// Errors raised by the library.
///
/// Variants fall into three families that the CLI maps onto exit codes:
/// configuration/argument problems, violated mathematical hypotheses, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("representation mismatch: {system} cannot act on a {point} point")]
    RepresentationMismatch {
        system: &'static str,
        point: &'static str,
    },

    #[error("exact horizon exceeded at n = {n}: only {budget} iterates available")]
    HorizonExceeded { n: u64, budget: u64 },

    #[error("modulus {den} is too large for exact torus arithmetic (limit 2^63)")]
    ModulusOverflow { den: u64 },

    #[error("measure underflow: ball received no Birkhoff hits over {orbit_len} iterates; enlarge the orbit length or the radius")]
    MeasureUnderflow { orbit_len: u64 },

    #[error("interval image of the ball exploded beyond {budget} pieces at n = {n}; use a smaller n")]
    PieceBudget { n: u32, budget: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("all {attempted} sampled centers were excluded as very-short-return centers; use a smaller horizon constant or a larger radius")]
    AllCentersExcluded { attempted: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn hypothesis(msg: impl Into<String>) -> Self {
        Error::Hypothesis(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code used by the CLI: 2 config, 3 hypothesis violation, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Hypothesis(_) => 3,
            Error::Io { .. } => 4,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
