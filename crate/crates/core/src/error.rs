use thiserror::Error;

use crate::model::{Pattern, Violation};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),

    #[error("invalid parameters: {}", join_violations(.0))]
    InvalidParameters(Vec<Violation>),

    #[error("pattern has {got} cells, model expects {expected}")]
    PatternShape { expected: usize, got: usize },

    #[error("category {label} out of range for response {response} at occasion {occasion} (expected < {categories})")]
    CategoryOutOfRange {
        response: usize,
        occasion: usize,
        label: u16,
        categories: usize,
    },

    #[error("pattern {0} has zero probability under the current parameters")]
    ZeroProbability(Pattern),

    #[error("exact entropy enumeration over {configurations} latent configurations exceeds the cap of {cap}; use the chain decomposition")]
    EnumerationCap { configurations: u128, cap: u64 },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("all {starts} EM starts failed: {reasons}")]
    AllStartsFailed { starts: usize, reasons: String },

    #[error("unknown scenario {0:?} (expected 1-5)")]
    UnknownScenario(String),

    #[error("invalid scenario request: {0}")]
    InvalidScenario(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed data at line {line}, column {column}: {message}")]
    MalformedData {
        line: u64,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
