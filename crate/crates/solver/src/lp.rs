//! Bounded-variable primal revised simplex.
//!
//! Every row `lo <= a x <= hi` gets a logical variable `r = a x` carrying
//! the row bounds, so the working form is `A x - r = 0` with all bounds on
//! variables. Phase 1 minimizes the sum of bound infeasibilities of the
//! basic variables, which also lets a solve start from any supplied basis.
//! The ratio test is Harris' two-pass rule; after a run of non-improving
//! pivots pricing falls back to Bland's rule until progress resumes.

use std::time::{Duration, Instant};

use crate::error::{Result, SolverError};
use crate::lu::BasisFactor;
use crate::model::MilpModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    TimeLimit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Zero,
}

/// Basis statuses for structurals followed by row logicals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Basis(pub Vec<VarStatus>);

#[derive(Clone, Debug)]
pub struct LpOptions {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub max_iterations: usize,
    pub refactor_interval: usize,
    /// Non-improving pivots tolerated before switching to Bland's rule.
    pub stall_limit: usize,
    pub time_limit: Option<Duration>,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-9,
            optimality_tol: 1e-9,
            max_iterations: 200_000,
            refactor_interval: 80,
            stall_limit: 400,
            time_limit: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Structural variable values (meaningful when optimal).
    pub x: Vec<f64>,
    pub objective: f64,
    pub row_duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
    pub basis: Option<Basis>,
}

impl LpSolution {
    /// Lagrangian dual objective implied by the stored duals, using the
    /// bound each multiplier's sign selects. Equals the primal objective at
    /// an optimal basis up to round-off.
    pub fn dual_objective(&self, model: &MilpModel, col_bounds: Option<&[(f64, f64)]>) -> f64 {
        let pick = |d: f64, lo: f64, hi: f64| -> f64 {
            if d > 0.0 && lo.is_finite() {
                d * lo
            } else if d < 0.0 && hi.is_finite() {
                d * hi
            } else {
                0.0
            }
        };
        let mut total = model.objective_constant;
        for (j, v) in model.vars.iter().enumerate() {
            let (lb, ub) = col_bounds.map_or((v.lb, v.ub), |b| b[j]);
            total += pick(self.reduced_costs[j], lb, ub);
        }
        for (i, c) in model.constraints.iter().enumerate() {
            let (lo, hi) = c.range();
            total += pick(self.row_duals[i], lo, hi);
        }
        total
    }
}

/// A model prepared for repeated LP solves under different column bounds:
/// scaled column-major constraint matrix plus scaled costs.
#[derive(Clone, Debug)]
pub struct LpProblem {
    n: usize,
    m: usize,
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    cost: Vec<f64>,
    row_lo: Vec<f64>,
    row_hi: Vec<f64>,
    col_scale: Vec<f64>,
    row_scale: Vec<f64>,
    obj_scale: f64,
    obj_constant: f64,
    default_bounds: Vec<(f64, f64)>,
}

fn pow2_round(x: f64) -> f64 {
    if !x.is_finite() || x <= 0.0 {
        return 1.0;
    }
    2f64.powi(x.log2().round() as i32)
}

impl LpProblem {
    pub fn new(model: &MilpModel) -> Result<Self> {
        model.validate()?;
        let n = model.num_vars();
        let m = model.num_constraints();
        let cols = model.columns();

        // geometric-mean equilibration, a few alternating passes
        let mut row_scale = vec![1.0; m];
        let mut col_scale = vec![1.0; n];
        for _ in 0..6 {
            let mut rmin = vec![f64::INFINITY; m];
            let mut rmax = vec![0.0f64; m];
            for (j, col) in cols.iter().enumerate() {
                for &(i, a) in col {
                    let v = (a * col_scale[j]).abs();
                    rmin[i] = rmin[i].min(v);
                    rmax[i] = rmax[i].max(v);
                }
            }
            for i in 0..m {
                if rmax[i] > 0.0 {
                    row_scale[i] = 1.0 / (rmin[i] * rmax[i]).sqrt();
                }
            }
            for (j, col) in cols.iter().enumerate() {
                let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
                for &(i, a) in col {
                    let v = (a * row_scale[i]).abs();
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                if hi > 0.0 {
                    col_scale[j] = 1.0 / (lo * hi).sqrt();
                }
            }
        }
        for s in row_scale.iter_mut().chain(col_scale.iter_mut()) {
            *s = pow2_round(*s);
        }

        let mut col_start = Vec::with_capacity(n + 1);
        let mut col_row = Vec::new();
        let mut col_val = Vec::new();
        col_start.push(0);
        for (j, col) in cols.iter().enumerate() {
            for &(i, a) in col {
                col_row.push(i);
                col_val.push(a * row_scale[i] * col_scale[j]);
            }
            col_start.push(col_row.len());
        }
        let cmax = model.objective.iter().zip(&col_scale).map(|(c, s)| (c * s).abs()).fold(0.0, f64::max);
        let obj_scale = if cmax > 0.0 { pow2_round(1.0 / cmax) } else { 1.0 };
        let cost = model.objective.iter().zip(&col_scale).map(|(c, s)| c * s * obj_scale).collect();
        let mut row_lo = Vec::with_capacity(m);
        let mut row_hi = Vec::with_capacity(m);
        for (i, c) in model.constraints.iter().enumerate() {
            let (lo, hi) = c.range();
            row_lo.push(lo * row_scale[i]);
            row_hi.push(hi * row_scale[i]);
        }
        let default_bounds = model.vars.iter().map(|v| (v.lb, v.ub)).collect();
        Ok(Self {
            n,
            m,
            col_start,
            col_row,
            col_val,
            cost,
            row_lo,
            row_hi,
            col_scale,
            row_scale,
            obj_scale,
            obj_constant: model.objective_constant,
            default_bounds,
        })
    }

    pub fn num_cols(&self) -> usize {
        self.n
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    pub fn default_bounds(&self) -> &[(f64, f64)] {
        &self.default_bounds
    }

    /// Solves with the model's own bounds.
    pub fn solve(&self, opts: &LpOptions) -> Result<LpSolution> {
        self.solve_with(&self.default_bounds, None, opts)
    }

    /// Solves with `col_bounds` replacing the structural bounds, optionally
    /// starting from `warm`.
    pub fn solve_with(&self, col_bounds: &[(f64, f64)], warm: Option<&Basis>, opts: &LpOptions) -> Result<LpSolution> {
        assert_eq!(col_bounds.len(), self.n);
        for (j, &(lb, ub)) in col_bounds.iter().enumerate() {
            if lb.is_nan() || ub.is_nan() || lb > ub {
                return Err(SolverError::InvalidBounds { name: format!("x{j}"), lb, ub });
            }
        }
        let mut s = Simplex::new(self, col_bounds, opts);
        s.run(warm)
    }
}

/// Solves the continuous relaxation of `model` with default options.
pub fn solve_lp(model: &MilpModel) -> Result<LpSolution> {
    LpProblem::new(model)?.solve(&LpOptions::default())
}

const NONE: usize = usize::MAX;
const PIVOT_TOL: f64 = 1e-9;

struct Simplex<'a> {
    p: &'a LpProblem,
    opts: &'a LpOptions,
    lb: Vec<f64>,
    ub: Vec<f64>,
    x: Vec<f64>,
    status: Vec<VarStatus>,
    basis: Vec<usize>,
    pos: Vec<usize>,
    factor: BasisFactor,
    work: Vec<f64>,
    iterations: usize,
    start: Instant,
}

enum Phase {
    One,
    Two,
}

impl<'a> Simplex<'a> {
    fn new(p: &'a LpProblem, col_bounds: &[(f64, f64)], opts: &'a LpOptions) -> Self {
        let (n, m) = (p.n, p.m);
        let mut lb = Vec::with_capacity(n + m);
        let mut ub = Vec::with_capacity(n + m);
        for (j, &(l, u)) in col_bounds.iter().enumerate() {
            lb.push(l / p.col_scale[j]);
            ub.push(u / p.col_scale[j]);
        }
        lb.extend_from_slice(&p.row_lo);
        ub.extend_from_slice(&p.row_hi);
        Self {
            p,
            opts,
            lb,
            ub,
            x: vec![0.0; n + m],
            status: vec![VarStatus::AtLower; n + m],
            basis: Vec::new(),
            pos: vec![NONE; n + m],
            factor: BasisFactor::default(),
            work: Vec::new(),
            iterations: 0,
            start: Instant::now(),
        }
    }

    fn nonbasic_status(&self, j: usize, hint: VarStatus) -> VarStatus {
        let (l, u) = (self.lb[j], self.ub[j]);
        match hint {
            VarStatus::AtUpper if u.is_finite() => VarStatus::AtUpper,
            VarStatus::AtLower if l.is_finite() => VarStatus::AtLower,
            _ if l.is_finite() => VarStatus::AtLower,
            _ if u.is_finite() => VarStatus::AtUpper,
            _ => VarStatus::Zero,
        }
    }

    fn set_nonbasic(&mut self, j: usize, st: VarStatus) {
        self.status[j] = st;
        self.pos[j] = NONE;
        self.x[j] = match st {
            VarStatus::AtLower => self.lb[j],
            VarStatus::AtUpper => self.ub[j],
            _ => 0.0,
        };
    }

    /// Column `j` of `[A | -I]` as sparse pairs.
    fn column(&self, j: usize) -> Vec<(usize, f64)> {
        if j < self.p.n {
            (self.p.col_start[j]..self.p.col_start[j + 1]).map(|t| (self.p.col_row[t], self.p.col_val[t])).collect()
        } else {
            vec![(j - self.p.n, -1.0)]
        }
    }

    fn install_basis(&mut self, warm: Option<&Basis>) {
        let (n, m) = (self.p.n, self.p.m);
        let usable = warm.filter(|b| b.0.len() == n + m && b.0.iter().filter(|&&s| s == VarStatus::Basic).count() == m);
        self.basis.clear();
        match usable {
            Some(b) => {
                for j in 0..n + m {
                    if b.0[j] == VarStatus::Basic {
                        self.pos[j] = self.basis.len();
                        self.basis.push(j);
                        self.status[j] = VarStatus::Basic;
                    } else {
                        let st = self.nonbasic_status(j, b.0[j]);
                        self.set_nonbasic(j, st);
                    }
                }
            }
            None => {
                for j in 0..n {
                    let st = self.nonbasic_status(j, VarStatus::AtLower);
                    self.set_nonbasic(j, st);
                }
                for i in 0..m {
                    self.pos[n + i] = i;
                    self.basis.push(n + i);
                    self.status[n + i] = VarStatus::Basic;
                }
            }
        }
    }

    /// Factorizes the current basis, swapping in logicals for any columns
    /// that make it singular, then recomputes basic values.
    fn refactor(&mut self) -> Result<()> {
        for _attempt in 0..5 {
            let cols: Vec<Vec<(usize, f64)>> = self.basis.iter().map(|&j| self.column(j)).collect();
            match BasisFactor::factorize(self.p.m, &cols) {
                Ok(f) => {
                    self.factor = f;
                    self.compute_basic_values();
                    return Ok(());
                }
                Err(sing) => {
                    for (&k, &row) in sing.positions.iter().zip(&sing.rows) {
                        let out = self.basis[k];
                        let logical = self.p.n + row;
                        let st = self.nonbasic_status(out, VarStatus::AtLower);
                        self.set_nonbasic(out, st);
                        // logical may currently be nonbasic elsewhere
                        self.basis[k] = logical;
                        self.pos[logical] = k;
                        self.status[logical] = VarStatus::Basic;
                    }
                }
            }
        }
        Err(SolverError::Numerical("basis remained singular after repair".into()))
    }

    fn compute_basic_values(&mut self) {
        let (n, m) = (self.p.n, self.p.m);
        let mut rhs = vec![0.0; m];
        for j in 0..n + m {
            if self.status[j] == VarStatus::Basic {
                continue;
            }
            let v = self.x[j];
            if v == 0.0 {
                continue;
            }
            if j < n {
                for t in self.p.col_start[j]..self.p.col_start[j + 1] {
                    rhs[self.p.col_row[t]] -= self.p.col_val[t] * v;
                }
            } else {
                rhs[j - n] += v;
            }
        }
        self.factor.ftran(&mut rhs, &mut self.work);
        for (k, &j) in self.basis.iter().enumerate() {
            self.x[j] = rhs[k];
        }
    }

    fn tol(&self, bound: f64) -> f64 {
        self.opts.feasibility_tol * (1.0 + bound.abs())
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        if v < self.lb[j] - self.tol(self.lb[j]) {
            self.lb[j] - v
        } else if v > self.ub[j] + self.tol(self.ub[j]) {
            v - self.ub[j]
        } else {
            0.0
        }
    }

    fn phase_costs(&self, phase: &Phase) -> Vec<f64> {
        match phase {
            Phase::Two => self.basis.iter().map(|&j| if j < self.p.n { self.p.cost[j] } else { 0.0 }).collect(),
            Phase::One => self
                .basis
                .iter()
                .map(|&j| {
                    let v = self.x[j];
                    if v < self.lb[j] - self.tol(self.lb[j]) {
                        -1.0
                    } else if v > self.ub[j] + self.tol(self.ub[j]) {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect(),
        }
    }

    fn phase_objective(&self, phase: &Phase) -> f64 {
        match phase {
            Phase::One => self.basis.iter().map(|&j| self.infeasibility(j)).sum(),
            Phase::Two => (0..self.p.n).map(|j| self.p.cost[j] * self.x[j]).sum(),
        }
    }

    fn run(&mut self, warm: Option<&Basis>) -> Result<LpSolution> {
        let (n, m) = (self.p.n, self.p.m);
        self.install_basis(warm);
        if m == 0 {
            // no rows: every variable sits at its cheapest bound
            for j in 0..n {
                let c = self.p.cost[j];
                let st = if c > 0.0 {
                    VarStatus::AtLower
                } else if c < 0.0 {
                    VarStatus::AtUpper
                } else {
                    self.nonbasic_status(j, VarStatus::AtLower)
                };
                if (c > 0.0 && !self.lb[j].is_finite()) || (c < 0.0 && !self.ub[j].is_finite()) {
                    return Ok(self.finish(LpStatus::Unbounded, Vec::new()));
                }
                self.set_nonbasic(j, st);
            }
            return Ok(self.finish(LpStatus::Optimal, Vec::new()));
        }
        self.refactor()?;

        let mut y = vec![0.0; m];
        let mut d = vec![0.0; n + m];
        let mut alpha = vec![0.0; m];
        let mut best_obj = f64::INFINITY;
        let mut stalled = 0usize;
        let mut bland = false;
        let mut last_phase_one = true;
        let mut confirm_passes = 0;

        loop {
            if self.iterations >= self.opts.max_iterations {
                return Ok(self.finish(LpStatus::IterationLimit, y));
            }
            if let Some(limit) = self.opts.time_limit {
                if self.start.elapsed() > limit {
                    return Ok(self.finish(LpStatus::TimeLimit, y));
                }
            }
            if self.factor.num_etas() >= self.opts.refactor_interval {
                self.refactor()?;
            }

            let infeasible = self.basis.iter().any(|&j| self.infeasibility(j) > 0.0);
            let phase = if infeasible { Phase::One } else { Phase::Two };
            if infeasible != last_phase_one {
                best_obj = f64::INFINITY;
                stalled = 0;
                bland = false;
                last_phase_one = infeasible;
            }

            // duals and reduced costs
            let cb = self.phase_costs(&phase);
            y.copy_from_slice(&cb);
            self.factor.btran(&mut y, &mut self.work);
            let mut entering = NONE;
            let mut best_score = 0.0;
            for j in 0..n + m {
                if self.status[j] == VarStatus::Basic {
                    continue;
                }
                let cj = match phase {
                    Phase::Two if j < n => self.p.cost[j],
                    _ => 0.0,
                };
                let dj = if j < n {
                    let mut s = cj;
                    for t in self.p.col_start[j]..self.p.col_start[j + 1] {
                        s -= y[self.p.col_row[t]] * self.p.col_val[t];
                    }
                    s
                } else {
                    y[j - n]
                };
                d[j] = dj;
                if self.lb[j] == self.ub[j] {
                    continue;
                }
                let eligible = match self.status[j] {
                    VarStatus::AtLower => dj < -self.opts.optimality_tol,
                    VarStatus::AtUpper => dj > self.opts.optimality_tol,
                    VarStatus::Zero => dj.abs() > self.opts.optimality_tol,
                    VarStatus::Basic => false,
                };
                if !eligible {
                    continue;
                }
                if bland {
                    if entering == NONE {
                        entering = j;
                    }
                } else if dj.abs() > best_score {
                    best_score = dj.abs();
                    entering = j;
                }
            }

            if entering == NONE {
                // confirm against a fresh factorization before declaring
                if self.factor.num_etas() > 0 && confirm_passes < 2 {
                    confirm_passes += 1;
                    self.refactor()?;
                    continue;
                }
                return Ok(match phase {
                    Phase::One => self.finish(LpStatus::Infeasible, y),
                    Phase::Two => {
                        let y_final = y.clone();
                        self.finish_optimal(y_final, &d)
                    }
                });
            }
            confirm_passes = 0;

            let q = entering;
            let dir = if d[q] < 0.0 { 1.0 } else { -1.0 };
            alpha.iter_mut().for_each(|a| *a = 0.0);
            for (i, v) in self.column(q) {
                alpha[i] = v;
            }
            self.factor.ftran(&mut alpha, &mut self.work);

            let (leave, theta, leave_to_upper) = self.ratio_test(&phase, &alpha, dir, bland);
            let range = self.ub[q] - self.lb[q];

            if leave == NONE {
                if range.is_finite() {
                    self.apply_step(q, dir, range, &alpha);
                    self.status[q] = if dir > 0.0 { VarStatus::AtUpper } else { VarStatus::AtLower };
                    self.x[q] = if dir > 0.0 { self.ub[q] } else { self.lb[q] };
                } else {
                    match phase {
                        Phase::Two => return Ok(self.finish(LpStatus::Unbounded, y)),
                        Phase::One => {
                            // round-off produced a phantom ray; rebuild and retry
                            self.refactor()?;
                            self.iterations += 1;
                            continue;
                        }
                    }
                }
            } else if range.is_finite() && range <= theta {
                self.apply_step(q, dir, range, &alpha);
                self.status[q] = if dir > 0.0 { VarStatus::AtUpper } else { VarStatus::AtLower };
                self.x[q] = if dir > 0.0 { self.ub[q] } else { self.lb[q] };
            } else {
                self.apply_step(q, dir, theta, &alpha);
                let r = leave;
                let out = self.basis[r];
                let st = if leave_to_upper { VarStatus::AtUpper } else { VarStatus::AtLower };
                self.set_nonbasic(out, st);
                self.basis[r] = q;
                self.pos[q] = r;
                self.status[q] = VarStatus::Basic;
                self.factor.push_eta(r, &alpha);
            }
            self.iterations += 1;

            let obj = self.phase_objective(&phase);
            let scale = 1.0 + best_obj.abs().min(obj.abs());
            if obj < best_obj - 1e-12 * scale {
                best_obj = obj;
                stalled = 0;
                bland = false;
            } else {
                stalled += 1;
                if stalled > self.opts.stall_limit {
                    bland = true;
                }
            }
        }
    }

    fn apply_step(&mut self, q: usize, dir: f64, theta: f64, alpha: &[f64]) {
        if theta == 0.0 {
            return;
        }
        self.x[q] += dir * theta;
        for (k, &j) in self.basis.iter().enumerate() {
            if alpha[k] != 0.0 {
                self.x[j] -= dir * theta * alpha[k];
            }
        }
    }

    /// Returns (leaving position, step length, leaves at upper bound).
    fn ratio_test(&self, phase: &Phase, alpha: &[f64], dir: f64, bland: bool) -> (usize, f64, bool) {
        // candidate: (position, exact ratio, relaxed ratio, to_upper)
        let mut cands: Vec<(usize, f64, f64, bool)> = Vec::new();
        for (k, &j) in self.basis.iter().enumerate() {
            let a = alpha[k];
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let delta = -dir * a;
            let v = self.x[j];
            let (l, u) = (self.lb[j], self.ub[j]);
            let below = v < l - self.tol(l);
            let above = v > u + self.tol(u);
            let cand = if matches!(phase, Phase::One) && below {
                (delta > 0.0).then(|| ((l - v) / delta, (l - v) / delta, false))
            } else if matches!(phase, Phase::One) && above {
                (delta < 0.0).then(|| ((v - u) / -delta, (v - u) / -delta, true))
            } else if delta < 0.0 {
                l.is_finite().then(|| ((v - l).max(0.0) / -delta, (v - l + self.tol(l)) / -delta, false))
            } else {
                u.is_finite().then(|| ((u - v).max(0.0) / delta, (u - v + self.tol(u)) / delta, true))
            };
            if let Some((exact, relaxed, up)) = cand {
                cands.push((k, exact, relaxed, up));
            }
        }
        if cands.is_empty() {
            return (NONE, f64::INFINITY, false);
        }
        if bland {
            let min = cands.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
            let tie = 1e-12 * (1.0 + min.abs());
            let best = cands.iter().filter(|c| c.1 <= min + tie).min_by_key(|c| self.basis[c.0]).unwrap();
            return (best.0, best.1, best.3);
        }
        let theta_max = cands.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
        let best = cands
            .iter()
            .filter(|c| c.1 <= theta_max)
            .max_by(|a, b| alpha[a.0].abs().total_cmp(&alpha[b.0].abs()).then(b.0.cmp(&a.0)))
            .unwrap();
        (best.0, best.1, best.3)
    }

    fn finish_optimal(&mut self, y: Vec<f64>, d: &[f64]) -> LpSolution {
        // clamp basic values that sit within tolerance outside their bounds
        for &j in &self.basis {
            let v = self.x[j];
            if v < self.lb[j] {
                self.x[j] = self.lb[j];
            } else if v > self.ub[j] {
                self.x[j] = self.ub[j];
            }
        }
        let mut sol = self.finish(LpStatus::Optimal, y);
        for j in 0..self.p.n {
            sol.reduced_costs[j] =
                if self.status[j] == VarStatus::Basic { 0.0 } else { d[j] / (self.p.col_scale[j] * self.p.obj_scale) };
        }
        sol
    }

    fn finish(&self, status: LpStatus, y: Vec<f64>) -> LpSolution {
        let n = self.p.n;
        let x: Vec<f64> = (0..n).map(|j| self.x[j] * self.p.col_scale[j]).collect();
        let objective = if status == LpStatus::Optimal {
            self.p.obj_constant + (0..n).map(|j| self.p.cost[j] * self.x[j]).sum::<f64>() / self.p.obj_scale
        } else {
            f64::NAN
        };
        let row_duals = if y.len() == self.p.m && status == LpStatus::Optimal {
            y.iter().zip(&self.p.row_scale).map(|(v, r)| v * r / self.p.obj_scale).collect()
        } else {
            vec![0.0; self.p.m]
        };
        LpSolution {
            status,
            x,
            objective,
            row_duals,
            reduced_costs: vec![0.0; n],
            iterations: self.iterations,
            basis: (status == LpStatus::Optimal).then(|| Basis(self.status.clone())),
        }
    }
}
