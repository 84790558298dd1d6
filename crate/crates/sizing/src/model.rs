//! Sizing program assembly: unit counts, battery dispatch, power balance,
//! and lifetime cost objective.

use orem_core::{lifetime_cost_per_unit, CostQuad, LoadProfile, Resolution, ResourceCandidate, Technology, HOURS};
use orem_solver::{MilpModel, Sense, VarId, VarKind};
use serde::{Deserialize, Serialize};

use crate::{Result, SizingError};

/// Battery block parameters. Charge and discharge power are both capped at
/// `rate_limit` times the installed energy per hour.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BessParams {
    pub unit_energy_kwh: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub charge_eff: f64,
    pub discharge_eff: f64,
    pub rate_limit: f64,
}

impl Default for BessParams {
    fn default() -> Self {
        Self {
            unit_energy_kwh: 3900.0,
            soc_min: 0.1,
            soc_max: 0.9,
            charge_eff: 0.95,
            discharge_eff: 0.95,
            rate_limit: 0.5,
        }
    }
}

impl BessParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.unit_energy_kwh > 0.0
            && self.unit_energy_kwh.is_finite()
            && 0.0 <= self.soc_min
            && self.soc_min < self.soc_max
            && self.soc_max <= 1.0
            && self.charge_eff > 0.0
            && self.charge_eff <= 1.0
            && self.discharge_eff > 0.0
            && self.discharge_eff <= 1.0
            && self.rate_limit > 0.0
            && self.rate_limit.is_finite();
        if ok {
            Ok(())
        } else {
            Err(SizingError::InvalidInput(format!("battery parameters out of range: {self:?}")))
        }
    }

    /// Power cap per installed unit, kW.
    pub fn unit_power_kw(&self) -> f64 {
        self.rate_limit * self.unit_energy_kwh
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// All four generation technologies.
    Classic,
    /// Wind and floating PV only, after LCOE screening.
    Simplified,
}

impl Variant {
    pub fn tag(self) -> &'static str {
        match self {
            Variant::Classic => "classic",
            Variant::Simplified => "simplified",
        }
    }
}

/// Battery throttling for heuristic iteration `iteration` (1-based).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationConstraintSet {
    pub iteration: usize,
    /// Usage control factor.
    pub alpha: f64,
    /// Days-weighted annual charge plus discharge energy of the previous
    /// iterate, kWh.
    pub prev_throughput_kwh: f64,
}

impl IterationConstraintSet {
    pub fn new(iteration: usize, alpha: f64, prev_throughput_kwh: f64) -> Result<Self> {
        let s = Self { iteration, alpha, prev_throughput_kwh };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) || self.iteration < 1 || !(self.prev_throughput_kwh >= 0.0) {
            return Err(SizingError::InvalidInput(format!("bad iteration constraints: {self:?}")));
        }
        Ok(())
    }

    /// Multiplier on the installed power cap: `(1 - alpha)^(i - 1)`.
    pub fn power_factor(&self) -> f64 {
        (1.0 - self.alpha).powi(self.iteration as i32 - 1)
    }

    /// Upper limit on this iterate's days-weighted throughput.
    pub fn throughput_limit(&self) -> f64 {
        (1.0 - self.alpha) * self.prev_throughput_kwh
    }
}

/// How the hourly cells are grouped. Stored energy wraps either within each
/// period (representative days) or once over the whole horizon.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Wrap {
    EachPeriod,
    Horizon,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub hours_per_period: usize,
    /// Days represented by each period.
    pub weights: Vec<f64>,
    pub wrap: Wrap,
}

impl TimeGrid {
    pub fn of(resolution: Resolution) -> Self {
        let wrap = match resolution {
            Resolution::TypicalDay => Wrap::EachPeriod,
            Resolution::FullYear => Wrap::Horizon,
        };
        Self { hours_per_period: HOURS, weights: resolution.weights(), wrap }
    }

    pub fn periods(&self) -> usize {
        self.weights.len()
    }

    pub fn cells(&self) -> usize {
        self.periods() * self.hours_per_period
    }

    pub fn weight_of(&self, cell: usize) -> f64 {
        self.weights[cell / self.hours_per_period]
    }

    /// Cell whose stored energy precedes cell `k`.
    pub fn previous(&self, k: usize) -> usize {
        let n = self.hours_per_period;
        match self.wrap {
            Wrap::EachPeriod if k % n == 0 => k + n - 1,
            Wrap::EachPeriod => k - 1,
            Wrap::Horizon => (k + self.cells() - 1) % self.cells(),
        }
    }

    /// Largest demand energy of any single period, kWh.
    pub fn max_period_energy(&self, demand: &[f64]) -> f64 {
        demand.chunks(self.hours_per_period).map(|c| c.iter().sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hours_per_period == 0 || self.weights.is_empty() || self.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(SizingError::InvalidInput(format!("bad time grid: {self:?}")));
        }
        Ok(())
    }
}

/// Everything the sizing program needs apart from the variant and the
/// iteration constraints.
#[derive(Clone, Debug)]
pub struct SizingProblem {
    pub candidates: Vec<ResourceCandidate>,
    /// Demand per cell, kW, row-major over `grid`.
    pub demand: Vec<f64>,
    pub grid: TimeGrid,
    pub bess: BessParams,
    /// Per-kWh battery costs.
    pub bess_cost: CostQuad,
    /// Project lifetime, years.
    pub lifetime_years: f64,
    /// When set, unserved load is allowed at this price per kWh.
    pub load_shed_penalty: Option<f64>,
    /// Extra units allowed above `ceil(peak / rated)`.
    pub unit_margin: u32,
}

impl SizingProblem {
    pub fn new(candidates: Vec<ResourceCandidate>, load: &LoadProfile, bess: BessParams, bess_cost: CostQuad) -> Self {
        Self::on_grid(candidates, load.demand.clone(), TimeGrid::of(load.resolution), bess, bess_cost)
    }

    pub fn on_grid(
        candidates: Vec<ResourceCandidate>,
        demand: Vec<f64>,
        grid: TimeGrid,
        bess: BessParams,
        bess_cost: CostQuad,
    ) -> Self {
        Self {
            candidates,
            demand,
            grid,
            bess,
            bess_cost,
            lifetime_years: 20.0,
            load_shed_penalty: None,
            unit_margin: 2,
        }
    }

    pub fn peak_demand(&self) -> f64 {
        self.demand.iter().copied().fold(0.0, f64::max)
    }

    pub fn unit_upper_bound(&self, candidate: &ResourceCandidate) -> f64 {
        (self.peak_demand() / candidate.rated_kw).ceil() + f64::from(self.unit_margin)
    }

    pub fn bess_upper_bound(&self) -> f64 {
        (2.0 * self.grid.max_period_energy(&self.demand) / self.bess.unit_energy_kwh).ceil()
    }

    /// Lifetime cost of one installed kWh of storage.
    pub fn bess_cost_per_kwh(&self) -> f64 {
        lifetime_cost_per_unit(&self.bess_cost, self.lifetime_years)
    }

    pub fn validate(&self, variant: Variant) -> Result<()> {
        self.bess.validate()?;
        self.bess_cost.validate().map_err(|e| SizingError::InvalidInput(e.to_string()))?;
        if !(self.lifetime_years > 0.0 && self.lifetime_years.is_finite()) {
            return Err(SizingError::InvalidInput(format!("lifetime {} years", self.lifetime_years)));
        }
        if let Some(p) = self.load_shed_penalty {
            if !(p >= 0.0 && p.is_finite()) {
                return Err(SizingError::InvalidInput(format!("load-shed penalty {p}")));
            }
        }
        self.grid.validate()?;
        let cells = self.grid.cells();
        if self.demand.len() != cells || self.demand.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
            return Err(SizingError::InvalidInput(format!(
                "demand needs {cells} finite non-negative values, got {}",
                self.demand.len()
            )));
        }
        for c in &self.candidates {
            c.cost.validate().map_err(|e| SizingError::InvalidInput(format!("{}: {e}", c.name)))?;
            if !(c.rated_kw > 0.0) {
                return Err(SizingError::InvalidInput(format!("{}: rated power {}", c.name, c.rated_kw)));
            }
            if c.profile.per_unit_kw.len() != cells || c.profile.weights != self.grid.weights {
                return Err(SizingError::GridMismatch {
                    candidate: c.name.clone(),
                    profile_cells: c.profile.per_unit_kw.len(),
                    load_cells: cells,
                });
            }
            if variant == Variant::Simplified && matches!(c.technology, Technology::Wec | Technology::Tec) {
                return Err(SizingError::SimplifiedWithMarine(c.name.clone()));
            }
        }
        Ok(())
    }
}

/// What a model variable stands for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    /// Unit count of candidate `k`.
    Units(usize),
    BessUnits,
    Charge(usize),
    Discharge(usize),
    Curtail(usize),
    ChargeOn(usize),
    DischargeOn(usize),
    Stored(usize),
    Shed(usize),
}

/// Variable handles by semantic role. Per-cell vectors are indexed by
/// `period * 24 + hour`.
#[derive(Clone, Debug)]
pub struct VarMap {
    pub units: Vec<VarId>,
    pub bess_units: VarId,
    pub charge: Vec<VarId>,
    pub discharge: Vec<VarId>,
    pub curtail: Vec<VarId>,
    pub charge_on: Vec<VarId>,
    pub discharge_on: Vec<VarId>,
    pub stored: Vec<VarId>,
    pub shed: Option<Vec<VarId>>,
}

impl VarMap {
    /// Reverse lookup over all mapped variables.
    pub fn roles(&self) -> Vec<(VarId, Role)> {
        let mut out: Vec<(VarId, Role)> = self.units.iter().enumerate().map(|(k, &v)| (v, Role::Units(k))).collect();
        out.push((self.bess_units, Role::BessUnits));
        let per_cell: [(&Vec<VarId>, fn(usize) -> Role); 6] = [
            (&self.charge, Role::Charge),
            (&self.discharge, Role::Discharge),
            (&self.curtail, Role::Curtail),
            (&self.charge_on, Role::ChargeOn),
            (&self.discharge_on, Role::DischargeOn),
            (&self.stored, Role::Stored),
        ];
        for (vars, role) in per_cell {
            out.extend(vars.iter().enumerate().map(|(k, &v)| (v, role(k))));
        }
        if let Some(shed) = &self.shed {
            out.extend(shed.iter().enumerate().map(|(k, &v)| (v, Role::Shed(k))));
        }
        out.sort_by_key(|(v, _)| v.index());
        out
    }

    pub fn role_of(&self, v: VarId) -> Option<Role> {
        self.roles().into_iter().find(|(id, _)| *id == v).map(|(_, r)| r)
    }
}

/// A built sizing program with its variable map.
#[derive(Clone, Debug)]
pub struct SizingModel {
    pub milp: MilpModel,
    pub vars: VarMap,
    pub variant: Variant,
    pub problem: SizingProblem,
    pub iteration: Option<IterationConstraintSet>,
}

/// Row count of a built model: nine rows per grid cell (balance, storage
/// recursion, two storage bounds, exclusivity, two rate caps, two switch
/// caps) plus one throughput row when iteration constraints are present.
pub fn constraint_census(cells: usize, throttled: bool) -> usize {
    9 * cells + usize::from(throttled)
}

/// Column count: one per candidate, one battery count, six per cell, and one
/// more per cell when load shedding is enabled.
pub fn variable_census(candidates: usize, cells: usize, shed: bool) -> usize {
    candidates + 1 + 6 * cells + if shed { cells } else { 0 }
}

pub fn build_milp(
    problem: &SizingProblem,
    variant: Variant,
    iteration: Option<&IterationConstraintSet>,
) -> Result<SizingModel> {
    problem.validate(variant)?;
    if let Some(it) = iteration {
        it.validate()?;
    }
    let bess = &problem.bess;
    let t_e = problem.lifetime_years;
    let grid = &problem.grid;
    let cells = grid.cells();
    let hpp = grid.hours_per_period;
    let inf = f64::INFINITY;
    let mut m = MilpModel::new();

    let units: Vec<VarId> = problem
        .candidates
        .iter()
        .map(|c| {
            let cost = lifetime_cost_per_unit(&c.cost, t_e);
            m.add_var(format!("N[{}]", c.name), VarKind::Integer, 0.0, problem.unit_upper_bound(c), cost)
        })
        .collect();
    let nb_ub = problem.bess_upper_bound();
    let bess_units = m.add_var(
        "N_BESS",
        VarKind::Integer,
        0.0,
        nb_ub,
        bess.unit_energy_kwh * lifetime_cost_per_unit(&problem.bess_cost, t_e),
    );

    let mut charge = Vec::with_capacity(cells);
    let mut discharge = Vec::with_capacity(cells);
    let mut curtail = Vec::with_capacity(cells);
    let mut charge_on = Vec::with_capacity(cells);
    let mut discharge_on = Vec::with_capacity(cells);
    let mut stored = Vec::with_capacity(cells);
    let mut shed = problem.load_shed_penalty.map(|_| Vec::with_capacity(cells));
    for k in 0..cells {
        let (p, h) = (k / hpp, k % hpp);
        charge.push(m.add_var(format!("P_char[{p},{h}]"), VarKind::Continuous, 0.0, inf, 0.0));
        discharge.push(m.add_var(format!("P_disc[{p},{h}]"), VarKind::Continuous, 0.0, inf, 0.0));
        curtail.push(m.add_var(format!("P_curt[{p},{h}]"), VarKind::Continuous, 0.0, inf, 0.0));
        charge_on.push(m.add_var(format!("U_char[{p},{h}]"), VarKind::Binary, 0.0, 1.0, 0.0));
        discharge_on.push(m.add_var(format!("U_disc[{p},{h}]"), VarKind::Binary, 0.0, 1.0, 0.0));
        stored.push(m.add_var(format!("E[{p},{h}]"), VarKind::Continuous, 0.0, inf, 0.0));
        if let (Some(s), Some(pen)) = (shed.as_mut(), problem.load_shed_penalty) {
            s.push(m.add_var(format!("P_shed[{p},{h}]"), VarKind::Continuous, 0.0, inf, pen * grid.weights[p]));
        }
    }

    let power_factor = iteration.map_or(1.0, |it| it.power_factor());
    let rate = bess.unit_power_kw() * power_factor;
    let big_m = bess.unit_power_kw() * nb_ub;
    for k in 0..cells {
        let (p, h) = (k / hpp, k % hpp);
        let mut bal: Vec<(VarId, f64)> = problem
            .candidates
            .iter()
            .zip(&units)
            .map(|(c, &n)| (n, c.profile.per_unit_kw[k]))
            .filter(|&(_, a)| a != 0.0)
            .collect();
        bal.extend([(discharge[k], 1.0), (charge[k], -1.0), (curtail[k], -1.0)]);
        if let Some(s) = &shed {
            bal.push((s[k], 1.0));
        }
        m.add_constraint(format!("balance[{p},{h}]"), bal, Sense::Eq, problem.demand[k]);

        let prev = grid.previous(k);
        m.add_constraint(
            format!("soc[{p},{h}]"),
            vec![
                (stored[k], 1.0),
                (stored[prev], -1.0),
                (charge[k], -bess.charge_eff),
                (discharge[k], 1.0 / bess.discharge_eff),
            ],
            Sense::Eq,
            0.0,
        );
        m.add_constraint(
            format!("soc_min[{p},{h}]"),
            vec![(stored[k], 1.0), (bess_units, -bess.soc_min * bess.unit_energy_kwh)],
            Sense::Ge,
            0.0,
        );
        m.add_constraint(
            format!("soc_max[{p},{h}]"),
            vec![(stored[k], 1.0), (bess_units, -bess.soc_max * bess.unit_energy_kwh)],
            Sense::Le,
            0.0,
        );
        m.add_constraint(
            format!("exclusive[{p},{h}]"),
            vec![(charge_on[k], 1.0), (discharge_on[k], 1.0)],
            Sense::Le,
            1.0,
        );
        m.add_constraint(format!("char_rate[{p},{h}]"), vec![(charge[k], 1.0), (bess_units, -rate)], Sense::Le, 0.0);
        m.add_constraint(format!("disc_rate[{p},{h}]"), vec![(discharge[k], 1.0), (bess_units, -rate)], Sense::Le, 0.0);
        m.add_constraint(format!("char_on[{p},{h}]"), vec![(charge[k], 1.0), (charge_on[k], -big_m)], Sense::Le, 0.0);
        m.add_constraint(
            format!("disc_on[{p},{h}]"),
            vec![(discharge[k], 1.0), (discharge_on[k], -big_m)],
            Sense::Le,
            0.0,
        );
    }

    if let Some(it) = iteration {
        let row = (0..cells)
            .flat_map(|k| {
                let w = grid.weight_of(k);
                [(charge[k], w), (discharge[k], w)]
            })
            .collect();
        m.add_constraint("throughput", row, Sense::Le, it.throughput_limit());
    }

    let vars = VarMap { units, bess_units, charge, discharge, curtail, charge_on, discharge_on, stored, shed };
    Ok(SizingModel { milp: m, vars, variant, problem: problem.clone(), iteration: iteration.copied() })
}
