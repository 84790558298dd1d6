//! Generic mixed-integer linear program: variables with kinds and bounds,
//! sparse linear rows, and a linear objective (always minimized).

use crate::error::{Result, SolverError};

/// Index of a variable inside a [`MilpModel`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Integer,
    Binary,
}

impl VarKind {
    pub fn is_integral(self) -> bool {
        !matches!(self, VarKind::Continuous)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lb: f64,
    pub ub: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub coeffs: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    /// Lower and upper limits on the row activity implied by the sense.
    pub fn range(&self) -> (f64, f64) {
        match self.sense {
            Sense::Le => (f64::NEG_INFINITY, self.rhs),
            Sense::Ge => (self.rhs, f64::INFINITY),
            Sense::Eq => (self.rhs, self.rhs),
        }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(v, a)| a * x[v.0]).sum()
    }

    /// Amount by which `x` violates this row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        let (lo, hi) = self.range();
        (lo - act).max(act - hi).max(0.0)
    }
}

/// A minimization MILP. Binary variables always carry bounds within [0, 1].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MilpModel {
    pub vars: Vec<Variable>,
    pub objective: Vec<f64>,
    pub objective_constant: f64,
    pub constraints: Vec<Constraint>,
}

impl MilpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lb: f64, ub: f64, obj: f64) -> VarId {
        let (lb, ub) = match kind {
            VarKind::Binary => (lb.max(0.0), ub.min(1.0)),
            _ => (lb, ub),
        };
        self.vars.push(Variable { name: name.into(), kind, lb, ub });
        self.objective.push(obj);
        VarId(self.vars.len() - 1)
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> usize {
        self.constraints.push(Constraint { name: name.into(), coeffs, sense, rhs });
        self.constraints.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name).map(VarId)
    }

    pub fn integer_vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.vars.iter().enumerate().filter(|(_, v)| v.kind.is_integral()).map(|(i, _)| VarId(i))
    }

    /// Checks structural consistency: every row references registered
    /// variables and every bound pair is ordered and not NaN.
    pub fn validate(&self) -> Result<()> {
        if self.vars.is_empty() {
            return Err(SolverError::EmptyModel);
        }
        for v in &self.vars {
            if v.lb.is_nan() || v.ub.is_nan() || v.lb > v.ub {
                return Err(SolverError::InvalidBounds { name: v.name.clone(), lb: v.lb, ub: v.ub });
            }
        }
        for (row, c) in self.constraints.iter().enumerate() {
            if let Some(&(v, _)) = c.coeffs.iter().find(|(v, _)| v.0 >= self.vars.len()) {
                return Err(SolverError::UnknownVariable { row, var: v.0 });
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_constant + self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    /// Largest row or bound violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.constraints.iter().map(|c| c.violation(x)).fold(0.0, f64::max);
        let bounds = self.vars.iter().zip(x).map(|(v, &val)| (v.lb - val).max(val - v.ub).max(0.0)).fold(0.0, f64::max);
        rows.max(bounds)
    }

    /// Largest distance of an integer-kind variable from the nearest integer.
    pub fn max_fractionality(&self, x: &[f64]) -> f64 {
        self.integer_vars().map(|v| (x[v.0] - x[v.0].round()).abs()).fold(0.0, f64::max)
    }

    /// Copy of the model with every variable made continuous.
    pub fn relaxed(&self) -> MilpModel {
        let mut m = self.clone();
        for v in &mut m.vars {
            v.kind = VarKind::Continuous;
        }
        m
    }

    /// Column-wise view: for each variable the rows it appears in.
    pub fn columns(&self) -> Vec<Vec<(usize, f64)>> {
        let mut cols = vec![Vec::new(); self.vars.len()];
        for (i, c) in self.constraints.iter().enumerate() {
            for &(v, a) in &c.coeffs {
                if a != 0.0 {
                    cols[v.0].push((i, a));
                }
            }
        }
        cols
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn violation_respects_sense() {
        let mut m = MilpModel::new();
        let x = m.add_var("x", VarKind::Continuous, 0.0, 10.0, 1.0);
        m.add_constraint("c", vec![(x, 1.0)], Sense::Ge, 3.0);
        assert_eq!(m.max_violation(&[1.0]), 2.0);
        assert_eq!(m.max_violation(&[3.0]), 0.0);
        assert_eq!(m.max_violation(&[11.0]), 1.0);
    }

    #[test]
    fn binary_bounds_are_clamped() {
        let mut m = MilpModel::new();
        let b = m.add_var("b", VarKind::Binary, -1.0, 5.0, 0.0);
        assert_eq!((m.var(b).lb, m.var(b).ub), (0.0, 1.0));
    }

    #[test]
    fn validate_catches_unknown_variable() {
        let mut m = MilpModel::new();
        m.add_var("x", VarKind::Continuous, 0.0, 1.0, 0.0);
        m.add_constraint("bad", vec![(VarId(4), 1.0)], Sense::Le, 1.0);
        assert!(matches!(m.validate(), Err(SolverError::UnknownVariable { row: 0, var: 4 })));
    }
}
