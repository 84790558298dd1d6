//! Post-hoc audit of a sizing solution against the model rows, computed
//! from the solution alone.

use orem_core::lifetime_cost_per_unit;
use serde::{Deserialize, Serialize};

use crate::model::{IterationConstraintSet, SizingProblem};
use crate::solution::SizingSolution;

/// Power below this is treated as zero when checking switch states.
pub const ACTIVE_KW: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThrottleAudit {
    pub iteration: usize,
    pub alpha: f64,
    /// Largest excess of charge or discharge over the throttled cap, kW.
    pub power_cap_excess_kw: f64,
    pub throughput_kwh: f64,
    pub throughput_limit_kwh: f64,
}

impl ThrottleAudit {
    pub fn holds(&self, tol: f64) -> bool {
        self.power_cap_excess_kw <= tol && self.throughput_kwh <= self.throughput_limit_kwh * (1.0 + tol) + tol
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub max_balance_residual_kw: f64,
    pub max_soc_recursion_residual_kwh: f64,
    /// Largest distance of stored energy outside its window, kWh.
    pub max_soc_bound_violation_kwh: f64,
    pub max_rate_excess_kw: f64,
    /// Cells where both directions are active or a switch disagrees with
    /// the power it gates.
    pub exclusion_violations: Vec<usize>,
    pub modular: bool,
    pub negative_values: usize,
    pub throughput_kwh: f64,
    pub unserved_kwh: f64,
    pub throttle: Option<ThrottleAudit>,
    /// Relative gap between the reported objective and one rebuilt from
    /// unit counts and cost quadruples.
    pub objective_audit_rel: f64,
}

impl DiagnosticsReport {
    /// True when every check passes at absolute tolerance `tol` (energy
    /// checks scale it by the installed battery size).
    pub fn passes(&self, tol: f64, e_total: f64) -> bool {
        let etol = tol * e_total.max(1.0);
        self.max_balance_residual_kw <= tol
            && self.max_soc_recursion_residual_kwh <= etol
            && self.max_soc_bound_violation_kwh <= etol
            && self.max_rate_excess_kw <= etol
            && self.exclusion_violations.is_empty()
            && self.modular
            && self.negative_values == 0
            && self.objective_audit_rel <= tol
            && self.throttle.as_ref().map_or(true, |t| t.holds(etol))
    }
}

pub fn verify_solution(
    sol: &SizingSolution,
    problem: &SizingProblem,
    iteration: Option<&IterationConstraintSet>,
) -> DiagnosticsReport {
    let d = &sol.dispatch;
    let bess = &problem.bess;
    let cells = d.cells();
    let e_total = sol.bess_energy_kwh;

    let mut balance = 0.0f64;
    let mut recursion = 0.0f64;
    let mut bounds = 0.0f64;
    let mut rate = 0.0f64;
    let mut cap_excess = 0.0f64;
    let mut exclusion = Vec::new();
    let cap = bess.rate_limit * e_total;
    let throttled_cap = cap * iteration.map_or(1.0, |it| it.power_factor());
    for k in 0..cells {
        let gen: f64 =
            problem.candidates.iter().zip(&sol.units).map(|(c, u)| f64::from(u.count) * c.profile.per_unit_kw[k]).sum();
        let (c, dis) = (d.charge_kw[k], d.discharge_kw[k]);
        let r = gen + dis - c - d.curtail_kw[k] + d.shed_kw[k] - problem.demand[k];
        balance = balance.max(r.abs());

        let prev = d.grid.previous(k);
        let step = d.stored_kwh[k] - d.stored_kwh[prev] - bess.charge_eff * c + dis / bess.discharge_eff;
        recursion = recursion.max(step.abs());

        let e = d.stored_kwh[k];
        bounds = bounds.max(bess.soc_min * e_total - e).max(e - bess.soc_max * e_total);
        rate = rate.max(c - cap).max(dis - cap);
        cap_excess = cap_excess.max(c - throttled_cap).max(dis - throttled_cap);

        let both = c > ACTIVE_KW && dis > ACTIVE_KW;
        let switches = d.charge_on[k] && d.discharge_on[k];
        let ungated = (c > ACTIVE_KW && !d.charge_on[k]) || (dis > ACTIVE_KW && !d.discharge_on[k]);
        if both || switches || ungated {
            exclusion.push(k);
        }
    }

    let ratio = e_total / bess.unit_energy_kwh;
    let modular = ratio == ratio.round() && ratio.round() == f64::from(sol.bess_units);
    let negative_values = [&d.charge_kw, &d.discharge_kw, &d.curtail_kw, &d.stored_kwh, &d.shed_kw]
        .iter()
        .map(|v| v.iter().filter(|&&x| x < 0.0).count())
        .sum();

    let t_e = problem.lifetime_years;
    let assets: f64 = problem
        .candidates
        .iter()
        .zip(&sol.units)
        .map(|(c, u)| f64::from(u.count) * lifetime_cost_per_unit(&c.cost, t_e))
        .sum::<f64>()
        + e_total * lifetime_cost_per_unit(&problem.bess_cost, t_e);
    let penalty =
        problem.load_shed_penalty.unwrap_or(0.0) * (0..cells).map(|k| d.grid.weight_of(k) * d.shed_kw[k]).sum::<f64>();
    let rebuilt = assets + penalty;
    let objective_audit_rel = (rebuilt - sol.objective).abs() / rebuilt.abs().max(sol.objective.abs()).max(1.0);

    let throughput_kwh = d.annual_throughput_kwh();
    let throttle = iteration.map(|it| ThrottleAudit {
        iteration: it.iteration,
        alpha: it.alpha,
        power_cap_excess_kw: cap_excess.max(0.0),
        throughput_kwh,
        throughput_limit_kwh: it.throughput_limit(),
    });

    DiagnosticsReport {
        max_balance_residual_kw: balance,
        max_soc_recursion_residual_kwh: recursion,
        max_soc_bound_violation_kwh: bounds.max(0.0),
        max_rate_excess_kw: rate.max(0.0),
        exclusion_violations: exclusion,
        modular,
        negative_values,
        throughput_kwh,
        unserved_kwh: sol.unserved_energy_kwh(),
        throttle,
        objective_audit_rel,
    }
}
