//! Use-based battery wear: cycles from a dispatch schedule, a semi-empirical
//! per-cycle wear model, a 5-20-10-1 neural surrogate trained on it, and the
//! lifetime cost of the capacity consumed.

mod cost;
mod cycles;
mod mlp;
mod oracle;

use std::path::Path;

use thiserror::Error;

pub use cost::{annual_degradation, degradation_cost, features_of, DegradationOutcome, Evaluator};
pub use cycles::{extract_cycles, Cycle, CycleKind, IDLE_KW, REFERENCE_TEMP_C};
pub use mlp::{mlp_predict, r_squared, train_mlp, MlpModel, TrainConfig, TrainOutcome, LAYER_SIZES};
pub use oracle::{
    generate_training_set, generate_training_set_with, oracle_degradation, oracle_degradation_with, read_training_csv,
    save_training_csv, write_training_csv, DegradationFeatures, FeatureRanges, OracleParams, Sample,
};

#[derive(Debug, Error)]
pub enum DegradationError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid model: {0}")]
    Model(String),
    #[error("training failed: {0}")]
    Training(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Write(#[from] std::io::Error),
}

impl DegradationError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        DegradationError::Io { path: path.display().to_string(), source }
    }
}

pub type Result<T> = std::result::Result<T, DegradationError>;
