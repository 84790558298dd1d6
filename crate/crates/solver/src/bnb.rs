//! Best-bound branch-and-bound over the LP relaxation.
//!
//! Branching picks the most fractional integer variable (lowest index on
//! ties). Among open nodes with equal bounds the most recently created one
//! is processed first, which dives toward an incumbent without changing the
//! best-bound order. Before branching, integer variables with a zero
//! objective coefficient are rounded in place when every row they touch
//! stays satisfied: the rounded point is another optimum of the same node
//! LP, so this never cuts off a better solution.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;
use std::rc::Rc;
use std::time::{Duration, Instant};

use crate::error::{Result, SolverError};
use crate::lp::{Basis, LpOptions, LpProblem, LpStatus};
use crate::model::MilpModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BranchingRule {
    MostFractional,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeSelection {
    BestBound,
}

#[derive(Clone, Debug)]
pub struct BnbOptions {
    pub abs_gap: f64,
    pub rel_gap: f64,
    pub int_tol: f64,
    pub feasibility_tol: f64,
    pub node_limit: usize,
    pub time_limit: Duration,
    pub branching: BranchingRule,
    pub node_selection: NodeSelection,
    /// Start each child LP from its parent's optimal basis.
    pub warm_start: bool,
    pub lp: LpOptions,
}

impl Default for BnbOptions {
    fn default() -> Self {
        Self {
            abs_gap: 1e-6,
            rel_gap: 1e-6,
            int_tol: 1e-6,
            feasibility_tol: 1e-7,
            node_limit: 1_000_000,
            time_limit: Duration::from_secs(3600),
            branching: BranchingRule::MostFractional,
            node_selection: NodeSelection::BestBound,
            warm_start: true,
            lp: LpOptions::default(),
        }
    }
}

impl BnbOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.abs_gap >= 0.0
            && self.rel_gap >= 0.0
            && self.int_tol > 0.0
            && self.node_limit > 0
            && !self.time_limit.is_zero();
        if ok {
            Ok(())
        } else {
            Err(SolverError::Numerical(format!("invalid branch-and-bound options: {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NodeLimit,
    TimeLimit,
}

#[derive(Clone, Debug)]
pub struct NodeLogEntry {
    pub node: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub lp_objective: f64,
    pub incumbent: f64,
    pub best_bound: f64,
    pub gap: f64,
}

#[derive(Clone, Debug)]
pub struct MilpSolution {
    pub status: MilpStatus,
    /// Incumbent values, empty when none was found.
    pub x: Vec<f64>,
    pub objective: f64,
    pub best_bound: f64,
    /// Relative gap between incumbent and best bound (0 when proven).
    pub gap: f64,
    pub nodes: usize,
    pub lp_iterations: usize,
    pub wall_time: Duration,
    pub log: Vec<NodeLogEntry>,
}

impl MilpSolution {
    pub fn has_incumbent(&self) -> bool {
        !self.x.is_empty()
    }

    pub fn log_csv(&self) -> String {
        let mut out = String::from("node,parent,depth,lp_objective,incumbent,best_bound,gap\n");
        for e in &self.log {
            let parent = e.parent.map_or(String::new(), |p| p.to_string());
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                e.node, parent, e.depth, e.lp_objective, e.incumbent, e.best_bound, e.gap
            )
            .unwrap();
        }
        out
    }
}

struct Node {
    id: usize,
    parent: Option<usize>,
    depth: usize,
    bound: f64,
    branches: Rc<Branch>,
    warm: Option<Rc<Basis>>,
}

/// Persistent list of bound changes from the root.
enum Branch {
    Root,
    Step { var: usize, lb: f64, ub: f64, parent: Rc<Branch> },
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // max-heap: smaller bound is "greater"; on ties the newer node wins
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then(self.id.cmp(&other.id))
    }
}

fn relative_gap(incumbent: f64, bound: f64) -> f64 {
    if !incumbent.is_finite() {
        return f64::INFINITY;
    }
    let diff = (incumbent - bound).max(0.0);
    if diff == 0.0 {
        0.0
    } else {
        diff / incumbent.abs().max(1e-10)
    }
}

/// Integer bounds tightened to integral values.
pub(crate) fn root_bounds(model: &MilpModel, int_tol: f64) -> Result<Vec<(f64, f64)>> {
    model
        .vars
        .iter()
        .map(|v| {
            if v.kind.is_integral() {
                if !v.lb.is_finite() || !v.ub.is_finite() {
                    return Err(SolverError::UnboundedInteger(v.name.clone()));
                }
                Ok(((v.lb - int_tol).ceil(), (v.ub + int_tol).floor()))
            } else {
                Ok((v.lb, v.ub))
            }
        })
        .collect()
}

struct Repairer<'a> {
    model: &'a MilpModel,
    cols: Vec<Vec<(usize, f64)>>,
    ranges: Vec<(f64, f64)>,
    candidates: Vec<usize>,
}

impl<'a> Repairer<'a> {
    fn new(model: &'a MilpModel) -> Self {
        let cols = model.columns();
        let ranges = model.constraints.iter().map(|c| c.range()).collect();
        let candidates = model.integer_vars().map(|v| v.0).filter(|&j| model.objective[j] == 0.0).collect();
        Self { model, cols, ranges, candidates }
    }

    /// Rounds zero-cost fractional integers while all touched rows stay
    /// within tolerance. Returns the number of variables rounded.
    fn repair(&self, x: &mut [f64], bounds: &[(f64, f64)], int_tol: f64, feas_tol: f64) -> usize {
        let frac = |v: f64| (v - v.round()).abs() > int_tol;
        if !self.candidates.iter().any(|&j| frac(x[j])) {
            return 0;
        }
        let mut act: Vec<f64> = self.model.constraints.iter().map(|c| c.activity(x)).collect();
        let mut rounded = 0;
        for _pass in 0..4 {
            let mut changed = false;
            for &j in &self.candidates {
                let v = x[j];
                if !frac(v) {
                    continue;
                }
                let near = v.round();
                let far = if near > v { near - 1.0 } else { near + 1.0 };
                for cand in [near, far] {
                    if cand < bounds[j].0 || cand > bounds[j].1 {
                        continue;
                    }
                    let delta = cand - v;
                    let fits = self.cols[j].iter().all(|&(i, a)| {
                        let (lo, hi) = self.ranges[i];
                        let new = act[i] + a * delta;
                        new >= lo - feas_tol * (1.0 + lo.abs()) && new <= hi + feas_tol * (1.0 + hi.abs())
                    });
                    if fits {
                        for &(i, a) in &self.cols[j] {
                            act[i] += a * delta;
                        }
                        x[j] = cand;
                        rounded += 1;
                        changed = true;
                        break;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        rounded
    }
}

/// Branch-and-bound solve of `model` (minimization).
pub fn solve_milp(model: &MilpModel, opts: &BnbOptions) -> Result<MilpSolution> {
    opts.validate()?;
    let start = Instant::now();
    let problem = LpProblem::new(model)?;
    let root = root_bounds(model, opts.int_tol)?;
    let repairer = Repairer::new(model);
    let int_vars: Vec<usize> = model.integer_vars().map(|v| v.0).collect();

    let mut heap = BinaryHeap::new();
    let mut next_id = 0usize;
    heap.push(Node {
        id: next_id,
        parent: None,
        depth: 0,
        bound: f64::NEG_INFINITY,
        branches: Rc::new(Branch::Root),
        warm: None,
    });
    next_id += 1;

    let mut incumbent: Option<(Vec<f64>, f64, Option<Basis>)> = None;
    let mut nodes = 0usize;
    let mut lp_iterations = 0usize;
    let mut log = Vec::new();
    let mut limit: Option<MilpStatus> = None;
    let mut root_unbounded = false;
    let mut bounds = root.clone();

    let cutoff = |inc: f64| inc - opts.abs_gap.max(opts.rel_gap * inc.abs());

    while let Some(node) = heap.pop() {
        let inc_obj = incumbent.as_ref().map_or(f64::INFINITY, |i| i.1);
        if node.bound >= cutoff(inc_obj) {
            continue;
        }
        if nodes >= opts.node_limit {
            heap.push(node);
            limit = Some(MilpStatus::NodeLimit);
            break;
        }
        if start.elapsed() > opts.time_limit {
            heap.push(node);
            limit = Some(MilpStatus::TimeLimit);
            break;
        }
        nodes += 1;

        bounds.copy_from_slice(&root);
        let mut b = &*node.branches;
        let mut path = Vec::new();
        while let Branch::Step { var, lb, ub, parent } = b {
            path.push((*var, *lb, *ub));
            b = parent;
        }
        for &(var, lb, ub) in path.iter().rev() {
            bounds[var] = (lb, ub);
        }

        let warm = if opts.warm_start { node.warm.as_deref() } else { None };
        let mut sol = problem.solve_with(&bounds, warm, &opts.lp)?;
        if !matches!(sol.status, LpStatus::Optimal | LpStatus::Infeasible | LpStatus::Unbounded) && warm.is_some() {
            sol = problem.solve_with(&bounds, None, &opts.lp)?;
        }
        lp_iterations += sol.iterations;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                if node.depth == 0 {
                    root_unbounded = true;
                    break;
                }
                continue;
            }
            LpStatus::IterationLimit | LpStatus::TimeLimit => {
                return Err(SolverError::Numerical(format!(
                    "node {} LP stopped with {:?} after {} iterations",
                    node.id, sol.status, sol.iterations
                )));
            }
        }

        let node_obj = sol.objective;
        let open_bound = heap.peek().map_or(f64::INFINITY, |n: &Node| n.bound);
        let best_bound = node_obj.min(open_bound);
        log.push(NodeLogEntry {
            node: node.id,
            parent: node.parent,
            depth: node.depth,
            lp_objective: node_obj,
            incumbent: inc_obj,
            best_bound,
            gap: relative_gap(inc_obj, best_bound),
        });
        if node_obj >= cutoff(inc_obj) {
            continue;
        }

        let mut x = sol.x;
        repairer.repair(&mut x, &bounds, opts.int_tol, opts.feasibility_tol);

        let mut branch_var = None;
        let mut best_frac = opts.int_tol;
        for &j in &int_vars {
            let f = (x[j] - x[j].round()).abs();
            if f > best_frac {
                best_frac = f;
                branch_var = Some(j);
            }
        }

        match branch_var {
            None => {
                for &j in &int_vars {
                    // adding 0.0 turns a rounded -0.0 into 0.0
                    x[j] = x[j].round() + 0.0;
                }
                let obj = model.objective_value(&x);
                if obj < inc_obj {
                    log::debug!("node {}: incumbent {obj}", node.id);
                    incumbent = Some((x, obj, sol.basis));
                }
            }
            Some(j) => {
                let v = x[j];
                let warm = sol.basis.map(Rc::new);
                let down = Branch::Step { var: j, lb: bounds[j].0, ub: v.floor(), parent: Rc::clone(&node.branches) };
                let up = Branch::Step { var: j, lb: v.ceil(), ub: bounds[j].1, parent: Rc::clone(&node.branches) };
                for br in [up, down] {
                    heap.push(Node {
                        id: next_id,
                        parent: Some(node.id),
                        depth: node.depth + 1,
                        bound: node_obj,
                        branches: Rc::new(br),
                        warm: warm.clone(),
                    });
                    next_id += 1;
                }
            }
        }
    }

    if root_unbounded {
        return Ok(MilpSolution {
            status: MilpStatus::Unbounded,
            x: Vec::new(),
            objective: f64::NEG_INFINITY,
            best_bound: f64::NEG_INFINITY,
            gap: f64::INFINITY,
            nodes,
            lp_iterations,
            wall_time: start.elapsed(),
            log,
        });
    }

    let open_bound = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    let Some((mut x, mut objective, basis)) = incumbent else {
        let status = limit.unwrap_or(MilpStatus::Infeasible);
        return Ok(MilpSolution {
            status,
            x: Vec::new(),
            objective: f64::INFINITY,
            best_bound: if limit.is_some() { open_bound } else { f64::INFINITY },
            gap: f64::INFINITY,
            nodes,
            lp_iterations,
            wall_time: start.elapsed(),
            log,
        });
    };

    // Re-solve the continuous part with every integer fixed at its rounded
    // value so the returned point satisfies the rows to LP precision.
    let mut fixed = root.clone();
    for &j in &int_vars {
        fixed[j] = (x[j], x[j]);
    }
    let polish = problem.solve_with(&fixed, basis.as_ref(), &opts.lp)?;
    lp_iterations += polish.iterations;
    if polish.status == LpStatus::Optimal {
        let mut px = polish.x;
        for &j in &int_vars {
            px[j] = x[j];
        }
        let pobj = model.objective_value(&px);
        if pobj <= objective + opts.abs_gap.max(opts.rel_gap * objective.abs())
            && model.max_violation(&px) <= model.max_violation(&x).max(opts.feasibility_tol)
        {
            x = px;
            objective = pobj;
        }
    }

    let best_bound = if limit.is_some() { open_bound.min(objective) } else { objective.min(open_bound) };
    let status = limit.unwrap_or(MilpStatus::Optimal);
    let gap = if status == MilpStatus::Optimal {
        relative_gap(objective, best_bound.min(objective))
    } else {
        relative_gap(objective, best_bound)
    };
    Ok(MilpSolution { status, x, objective, best_bound, gap, nodes, lp_iterations, wall_time: start.elapsed(), log })
}
