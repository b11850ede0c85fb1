use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates its documented domain. `name` is the parameter
    /// (or configuration key) that failed.
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("spatial grid mismatch between operands")]
    GridMismatch,

    #[error("wave packet reached the grid edge at t = {time_fs:.2} fs (edge density {density:.3e}); enable the absorber or enlarge the grid")]
    GridEdgeReached { time_fs: f64, density: f64 },

    #[error("wave functions have no overlapping support above the density floor")]
    NoOverlap,

    #[error("time {time_fs} fs is outside the recorded trajectory [{start_fs}, {end_fs}] fs or not on a snapshot")]
    TimeOutOfRange {
        time_fs: f64,
        start_fs: f64,
        end_fs: f64,
    },

    #[error("delay {delay_fs} fs aliases in a {window_fs} fs synthesis window")]
    DelayAliased { delay_fs: f64, window_fs: f64 },

    #[error("negative dication yield {value:.3e} at R = {r:.4} bohr: inconsistent magnitudes")]
    NegativeYield { r: f64, value: f64 },

    #[error("time-of-flight {t_ns} ns is outside every species window")]
    UnassignedHit { t_ns: f64 },

    #[error("unknown species id {0}")]
    UnknownSpecies(i64),

    #[error("scan point {0} has no shots")]
    EmptyScanPoint(f64),

    #[error("not enough samples: need {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("sampling is not uniform (step {index} differs from the first step)")]
    NonUniformSampling { index: usize },

    #[error("all-zero input: {0}")]
    ZeroInput(&'static str),

    #[error("{path}:{line}: {reason}")]
    Malformed {
        path: PathBuf,
        line: u64,
        reason: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("acceptance failure: {0}")]
    Acceptance(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    /// Exit code used by the command-line front end: 1 for bad input, 2 for
    /// numerical or acceptance failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter { .. }
            | Error::Config(_)
            | Error::Malformed { .. }
            | Error::UnknownSpecies(_)
            | Error::Io(_)
            | Error::Csv(_) => 1,
            _ => 2,
        }
    }
}
