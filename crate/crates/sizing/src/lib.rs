//! Mixed-integer sizing program for an islanded offshore microgrid: unit
//! counts per device size, modular battery blocks, and an hourly battery
//! schedule over a representative year.
//!
//! A built model has `9 × cells` rows (plus one throughput row when
//! throttled) and `candidates + 1 + 6 × cells` columns (plus one shed column
//! per cell when load shedding is enabled); see [`constraint_census`] and
//! [`variable_census`].

mod model;
mod solution;
mod verify;

use std::time::Duration;

use orem_solver::{solve_milp, BnbOptions, MilpStatus, SolverError};
use thiserror::Error;

pub use model::{
    build_milp, constraint_census, variable_census, BessParams, IterationConstraintSet, Role, SizingModel,
    SizingProblem, TimeGrid, VarMap, Variant, Wrap,
};
pub use solution::{extract_from, extract_solution, AssetCost, Dispatch, SizingSolution, UnitChoice, INTEGRALITY_TOL};
pub use verify::{verify_solution, DiagnosticsReport, ThrottleAudit, ACTIVE_KW};

#[derive(Debug, Error)]
pub enum SizingError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("candidate `{candidate}` has {profile_cells} profile cells but the load has {load_cells}")]
    GridMismatch { candidate: String, profile_cells: usize, load_cells: usize },
    #[error("the simplified variant excludes wave and tidal devices, but `{0}` is present")]
    SimplifiedWithMarine(String),
    #[error("variable `{variable}` = {value} is not integral")]
    Fractional { variable: String, value: f64 },
    #[error("solver finished without a solution ({0:?})")]
    NoSolution(MilpStatus),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

pub type Result<T> = std::result::Result<T, SizingError>;

#[derive(Clone, Debug, PartialEq)]
pub struct SolveStats {
    pub status: MilpStatus,
    pub nodes: usize,
    pub lp_iterations: usize,
    pub wall_time: Duration,
    pub gap: f64,
    pub rows: usize,
    pub columns: usize,
}

#[derive(Clone, Debug)]
pub struct SizingRun {
    pub solution: Option<SizingSolution>,
    pub stats: SolveStats,
}

/// Builds and solves one sizing program. An infeasible program yields
/// `solution: None` with the solver status in `stats`.
pub fn solve_sizing(
    problem: &SizingProblem,
    variant: Variant,
    iteration: Option<&IterationConstraintSet>,
    opts: &BnbOptions,
) -> Result<SizingRun> {
    let model = build_milp(problem, variant, iteration)?;
    let raw = solve_milp(&model.milp, opts)?;
    let stats = SolveStats {
        status: raw.status,
        nodes: raw.nodes,
        lp_iterations: raw.lp_iterations,
        wall_time: raw.wall_time,
        gap: raw.gap,
        rows: model.milp.num_constraints(),
        columns: model.milp.num_vars(),
    };
    let solution = if raw.has_incumbent() { Some(extract_solution(&model, &raw.x)?) } else { None };
    Ok(SizingRun { solution, stats })
}
