//! Self-contained MILP toolkit: a sparse bounded-variable revised simplex,
//! a best-bound branch-and-bound driver, and an exhaustive enumeration
//! oracle for cross-checking small instances.

pub mod bnb;
pub mod enumerate;
pub mod error;
pub mod instance;
pub mod lp;
mod lu;
pub mod model;

pub use bnb::{solve_milp, BnbOptions, BranchingRule, MilpSolution, MilpStatus, NodeLogEntry, NodeSelection};
pub use enumerate::enumerate_oracle;
pub use error::{Result, SolverError};
pub use lp::{solve_lp, Basis, LpOptions, LpProblem, LpSolution, LpStatus, VarStatus};
pub use model::{Constraint, MilpModel, Sense, VarId, VarKind, Variable};

/// Anything that can solve a [`MilpModel`] to a [`MilpSolution`]. Model
/// builders depend on this rather than on a concrete engine.
pub trait MilpEngine {
    fn solve(&self, model: &MilpModel) -> Result<MilpSolution>;
}

impl MilpEngine for BnbOptions {
    fn solve(&self, model: &MilpModel) -> Result<MilpSolution> {
        solve_milp(model, self)
    }
}
