//! Exhaustive enumeration over general-integer combinations.
//!
//! For every combination of the `Integer` variables the remaining problem is
//! solved as an LP with the `Binary` variables relaxed. A relaxed solution
//! is accepted only when its fractional binaries can be rounded to 0/1
//! without moving any continuous variable. Otherwise the offending binaries
//! are fixed to every explicit 0/1 pattern and each pattern is re-solved.
//! The routine shares the LP core with branch-and-bound but none of the
//! tree search, repair, or warm-start logic.

use std::time::Instant;

use crate::bnb::{root_bounds, MilpSolution, MilpStatus};
use crate::error::{Result, SolverError};
use crate::lp::{LpOptions, LpProblem, LpStatus};
use crate::model::{MilpModel, VarKind};

pub const MAX_COMBINATIONS: f64 = 1e5;
pub const MAX_PATTERN_BINARIES: usize = 12;

const INT_TOL: f64 = 1e-6;
const FEAS_TOL: f64 = 1e-7;

struct Oracle<'a> {
    model: &'a MilpModel,
    problem: LpProblem,
    cols: Vec<Vec<(usize, f64)>>,
    ranges: Vec<(f64, f64)>,
    binaries: Vec<usize>,
    lp_opts: LpOptions,
    lp_iterations: usize,
}

impl Oracle<'_> {
    /// Tries to round the fractional binaries of `x` in place without
    /// changing the objective. On failure returns the fractional binaries
    /// of every row-connected group that could not be rounded.
    fn complete(&self, x: &mut [f64]) -> std::result::Result<(), Vec<usize>> {
        let frac: Vec<usize> =
            self.binaries.iter().copied().filter(|&j| (x[j] - x[j].round()).abs() > INT_TOL).collect();
        for &j in &self.binaries {
            if !frac.contains(&j) {
                x[j] = x[j].round() + 0.0;
            }
        }
        if frac.is_empty() {
            return Ok(());
        }
        // union-find over fractional binaries sharing a row
        let mut parent: Vec<usize> = (0..frac.len()).collect();
        fn find(p: &mut [usize], i: usize) -> usize {
            let mut r = i;
            while p[r] != r {
                r = p[r];
            }
            p[i] = r;
            r
        }
        let mut row_owner = vec![usize::MAX; self.ranges.len()];
        for (k, &j) in frac.iter().enumerate() {
            for &(i, _) in &self.cols[j] {
                if row_owner[i] == usize::MAX {
                    row_owner[i] = k;
                } else {
                    let (a, b) = (find(&mut parent, row_owner[i]), find(&mut parent, k));
                    parent[a] = b;
                }
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut group_of = vec![usize::MAX; frac.len()];
        for k in 0..frac.len() {
            let r = find(&mut parent, k);
            if group_of[r] == usize::MAX {
                group_of[r] = groups.len();
                groups.push(Vec::new());
            }
            groups[group_of[r]].push(frac[k]);
        }

        let mut conflicts = Vec::new();
        for group in groups {
            // rounding a costed binary would change the objective
            let costed = group.iter().any(|&j| self.model.objective[j] != 0.0);
            if costed || group.len() > MAX_PATTERN_BINARIES {
                conflicts.extend(group);
                continue;
            }
            let mut rows: Vec<usize> = group.iter().flat_map(|&j| self.cols[j].iter().map(|&(i, _)| i)).collect();
            rows.sort_unstable();
            rows.dedup();
            let orig: Vec<f64> = group.iter().map(|&j| x[j]).collect();
            let mut found = false;
            for pattern in 0u32..(1 << group.len()) {
                for (b, &j) in group.iter().enumerate() {
                    x[j] = f64::from((pattern >> b) & 1);
                }
                let ok = group.iter().all(|&j| x[j] >= self.model.vars[j].lb && x[j] <= self.model.vars[j].ub)
                    && rows.iter().all(|&i| {
                        let act = self.model.constraints[i].activity(x);
                        let (lo, hi) = self.ranges[i];
                        act >= lo - FEAS_TOL * (1.0 + lo.abs()) && act <= hi + FEAS_TOL * (1.0 + hi.abs())
                    });
                if ok {
                    found = true;
                    break;
                }
            }
            if !found {
                for (&j, &v) in group.iter().zip(&orig) {
                    x[j] = v;
                }
                conflicts.extend(group);
            }
        }
        if conflicts.is_empty() {
            Ok(())
        } else {
            Err(conflicts)
        }
    }

    /// Best feasible point for one integer combination (`bounds` already
    /// fixes the general integers).
    fn solve_combination(&mut self, bounds: &[(f64, f64)], cutoff: f64) -> Result<Option<(Vec<f64>, f64)>> {
        let mut fixed_set: Vec<usize> = Vec::new();
        loop {
            if fixed_set.len() > MAX_PATTERN_BINARIES {
                return Err(SolverError::EnumerationRefused(format!(
                    "{} binaries need explicit patterns (limit {MAX_PATTERN_BINARIES})",
                    fixed_set.len()
                )));
            }
            let mut best: Option<(Vec<f64>, f64)> = None;
            let mut new_conflicts: Vec<usize> = Vec::new();
            let mut local = bounds.to_vec();
            for pattern in 0u32..(1 << fixed_set.len()) {
                for (b, &j) in fixed_set.iter().enumerate() {
                    let v = f64::from((pattern >> b) & 1);
                    if v < bounds[j].0 || v > bounds[j].1 {
                        local[j] = (1.0, 0.0);
                    } else {
                        local[j] = (v, v);
                    }
                }
                if fixed_set.iter().any(|&j| local[j].0 > local[j].1) {
                    continue;
                }
                let sol = self.problem.solve_with(&local, None, &self.lp_opts)?;
                self.lp_iterations += sol.iterations;
                match sol.status {
                    LpStatus::Optimal => {}
                    LpStatus::Infeasible => continue,
                    LpStatus::Unbounded => {
                        return Err(SolverError::Numerical("relaxation unbounded during enumeration".into()))
                    }
                    s => return Err(SolverError::Numerical(format!("LP stopped with {s:?} during enumeration"))),
                }
                let bound = best.as_ref().map_or(cutoff, |b| b.1.min(cutoff));
                if sol.objective >= bound {
                    continue;
                }
                let mut x = sol.x;
                match self.complete(&mut x) {
                    Ok(()) => {
                        let obj = self.model.objective_value(&x);
                        best = Some((x, obj));
                    }
                    Err(conf) => new_conflicts.extend(conf),
                }
            }
            new_conflicts.retain(|j| !fixed_set.contains(j));
            if new_conflicts.is_empty() {
                return Ok(best);
            }
            new_conflicts.sort_unstable();
            new_conflicts.dedup();
            fixed_set.extend(new_conflicts);
        }
    }
}

/// Exhaustively solves `model`. Refuses when the general-integer box holds
/// more than [`MAX_COMBINATIONS`] points.
pub fn enumerate_oracle(model: &MilpModel) -> Result<MilpSolution> {
    let start = Instant::now();
    let problem = LpProblem::new(model)?;
    let base = root_bounds(model, INT_TOL)?;
    let generals: Vec<usize> = (0..model.num_vars()).filter(|&j| model.vars[j].kind == VarKind::Integer).collect();
    let binaries: Vec<usize> = (0..model.num_vars()).filter(|&j| model.vars[j].kind == VarKind::Binary).collect();

    let mut space = 1.0f64;
    for &j in &generals {
        let (lb, ub) = base[j];
        space *= (ub - lb + 1.0).max(0.0);
    }
    if space > MAX_COMBINATIONS {
        return Err(SolverError::EnumerationRefused(format!(
            "{space} integer combinations exceed the limit of {MAX_COMBINATIONS}"
        )));
    }

    let mut oracle = Oracle {
        model,
        problem,
        cols: model.columns(),
        ranges: model.constraints.iter().map(|c| c.range()).collect(),
        binaries,
        lp_opts: LpOptions::default(),
        lp_iterations: 0,
    };

    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut combos = 0usize;
    if space >= 1.0 {
        let mut bounds = base.clone();
        let mut values: Vec<f64> = generals.iter().map(|&j| base[j].0).collect();
        'outer: loop {
            for (k, &j) in generals.iter().enumerate() {
                bounds[j] = (values[k], values[k]);
            }
            combos += 1;
            let cutoff = best.as_ref().map_or(f64::INFINITY, |b| b.1);
            if let Some((x, obj)) = oracle.solve_combination(&bounds, cutoff)? {
                if obj < cutoff {
                    best = Some((x, obj));
                }
            }
            // odometer step, first variable fastest
            for (k, &j) in generals.iter().enumerate() {
                if values[k] < base[j].1 {
                    values[k] += 1.0;
                    continue 'outer;
                }
                values[k] = base[j].0;
            }
            break;
        }
    }

    let lp_iterations = oracle.lp_iterations;
    Ok(match best {
        Some((x, objective)) => MilpSolution {
            status: MilpStatus::Optimal,
            x,
            objective,
            best_bound: objective,
            gap: 0.0,
            nodes: combos,
            lp_iterations,
            wall_time: start.elapsed(),
            log: Vec::new(),
        },
        None => MilpSolution {
            status: MilpStatus::Infeasible,
            x: Vec::new(),
            objective: f64::INFINITY,
            best_bound: f64::INFINITY,
            gap: f64::INFINITY,
            nodes: combos,
            lp_iterations,
            wall_time: start.elapsed(),
            log: Vec::new(),
        },
    })
}
