//! End-to-end flows: scenario loading, the iterative sizing and
//! degradation loop, cost sensitivity sweeps, and report files.

mod heuristic;
mod report;
mod scenario;
mod sweep;

use std::path::Path;

use orem_solver::MilpStatus;
use thiserror::Error;

pub use heuristic::{
    fleet_lifetime_cost, run_remo, IterationRecord, IterationStats, RunReport, StopReason, DIAGNOSIS_SHED_PENALTY,
};
pub use report::{emit_report, Report};
pub use scenario::{
    fit_load, EvaluatorKind, HeuristicConfig, Scenario, ScenarioFile, SolverSettings, SurrogateSource,
    TrainedSurrogate, VariantChoice, VariantSelection,
};
pub use sweep::{sensitivity_sweep, SweepRow, SweepTable};

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Ingest(#[from] orem_core::IngestError),
    #[error(transparent)]
    Cost(#[from] orem_core::CostError),
    #[error(transparent)]
    Sizing(#[from] orem_sizing::SizingError),
    #[error(transparent)]
    Degradation(#[from] orem_degradation::DegradationError),
    #[error("the scenario is infeasible{}", .diagnosis.as_ref().map(|d| format!("; {d}")).unwrap_or_default())]
    Infeasible { diagnosis: Option<String> },
    #[error("the solver stopped without a solution ({0:?})")]
    NoSolution(MilpStatus),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl OrchestratorError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        OrchestratorError::Io { path: path.display().to_string(), source }
    }

    /// Process exit code: 2 for infeasible scenarios, 3 for bad input,
    /// 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use orem_sizing::SizingError as S;
        match self {
            OrchestratorError::Infeasible { .. } => 2,
            OrchestratorError::Input(_) | OrchestratorError::Ingest(_) | OrchestratorError::Cost(_) => 3,
            OrchestratorError::Sizing(S::InvalidInput(_) | S::GridMismatch { .. } | S::SimplifiedWithMarine(_)) => 3,
            OrchestratorError::Degradation(
                orem_degradation::DegradationError::Io { .. }
                | orem_degradation::DegradationError::Json(_)
                | orem_degradation::DegradationError::Model(_),
            ) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, OrchestratorError>;
