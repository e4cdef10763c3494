use std::path::PathBuf;

/// Crate-wide error type. Variants are grouped by the subsystem that
/// raises them so callers can map them onto process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid operator index {index}: space has {size} operators")]
    OperatorIndex { index: u32, size: u32 },

    #[error("descriptor field {field} has value {value} outside its enumerated set")]
    DescriptorField { field: &'static str, value: u32 },

    #[error("groups {groups} does not divide channels {c_in}->{c_out}")]
    GroupDivision { groups: u32, c_in: u32, c_out: u32 },

    #[error("empty genome")]
    EmptyGenome,

    #[error("genome has {got} cells, expected {expected}")]
    GenomeLength { got: usize, expected: usize },

    #[error("invalid genome text {text:?}: {reason}")]
    GenomeParse { text: String, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("objective vectors have mismatched lengths ({a} vs {b})")]
    ObjectiveArity { a: usize, b: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("population is empty")]
    EmptyPopulation,

    #[error("rank or crowding not populated; sort the population first")]
    Unranked,

    #[error("episode batch is empty")]
    EmptyBatch,

    #[error("hypervolume supports 2 or 3 objectives, got {0}")]
    HypervolumeArity(usize),

    #[error("reference point does not dominate point {index} of the front")]
    HypervolumeReference { index: usize },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("evaluator {id} reported inconsistent psnr={psnr} vs mse={mse}")]
    PsnrMseMismatch { id: u64, psnr: f64, mse: f64 },

    #[error("evaluation timed out for genome {genome}")]
    EvalTimeout { genome: String },

    #[error("worker pool error: {0}")]
    Worker(String),

    #[error("checkpoint integrity failure: stored {stored}, computed {computed}")]
    CheckpointIntegrity { stored: String, computed: String },

    #[error("checkpoint schema version {got} is not supported (expected {expected})")]
    CheckpointVersion { got: u64, expected: u64 },

    #[error("checkpoint field {field}: {reason}")]
    CheckpointField { field: &'static str, reason: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
