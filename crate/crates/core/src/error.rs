use std::path::PathBuf;

/// Errors surfaced by the simulator library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid config at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("failed to parse config: {0}")]
    ConfigParse(String),

    #[error("degenerate topology: no SBS-user pair is within communication range, so the core delay rule is undefined; supply an explicit core delay")]
    DegenerateTopology,

    #[error("trace parse error at {path}:{line}: {message}")]
    TraceParse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("trace at {path} contains no events")]
    EmptyTrace { path: PathBuf },

    #[error("exhaustive search space {size} exceeds the cap {cap}")]
    BruteForceCap { size: u128, cap: u128 },

    #[error("initial placement violates the per-SBS cache budget")]
    BudgetViolation,

    #[error("perturbed term is undefined for a key that was never observed")]
    UnseenKey,

    #[error("regret is only defined for stationary workloads")]
    RegretUnavailable,

    #[error("replication series have mismatched lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("replication {replication} failed")]
    Replication {
        replication: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("learner `{learner}` requires static delays and cannot run with per-slot mobility")]
    MobilityUnsupported { learner: String },

    #[error("{context}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
