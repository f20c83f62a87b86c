use std::path::PathBuf;

use crate::network::{BranchId, BusId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed case file: {0}")]
    MalformedCase(String),

    #[error("duplicate bus id {0}")]
    DuplicateBus(BusId),

    #[error("branch {branch} refers to nonexistent bus {bus}")]
    DanglingEndpoint { branch: BranchId, bus: BusId },

    #[error("invalid branch {branch}: {reason}")]
    InvalidBranch { branch: BranchId, reason: String },

    #[error("invalid bus {bus}: {reason}")]
    InvalidBus { bus: BusId, reason: String },

    #[error("expected exactly one reference bus, found {0}")]
    ReferenceBus(usize),

    #[error("network is not connected: {isolated} bus(es) unreachable from the reference bus")]
    Disconnected { isolated: usize },

    #[error("invalid PMU placement: {0}")]
    InvalidPlacement(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("singular Jacobian ({origin}): pivot {pivot:.3e} below floor {floor:.3e}")]
    SingularJacobian {
        origin: String,
        pivot: f64,
        floor: f64,
    },

    #[error("sample index {found} does not follow {previous}")]
    NonIncreasingSample { previous: u64, found: u64 },

    #[error("sample gap of {gap} exceeds the tolerated maximum of {max}")]
    SampleGap { gap: u64, max: u64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("scenario set is empty")]
    EmptyScenarioSet,

    #[error("unknown scenario {0}")]
    UnknownScenario(usize),

    #[error("stream error: {0}")]
    Stream(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
