//! The iterative sizing loop: solve, price battery wear, throttle the
//! battery, and solve again while the total cost keeps improving.

use log::info;
use orem_core::{lifetime_cost_per_unit, LcoeRow, ResourceCandidate};
use orem_degradation::{degradation_cost, extract_cycles, Evaluator};
use orem_sizing::{
    solve_sizing, verify_solution, DiagnosticsReport, IterationConstraintSet, SizingProblem, SizingSolution,
    SolveStats, Variant,
};
use orem_solver::{BnbOptions, MilpStatus};
use serde::{Deserialize, Serialize};

use crate::scenario::{HeuristicConfig, Scenario, VariantChoice};
use crate::{OrchestratorError, Result};

/// Price per unserved kWh used when diagnosing an infeasible scenario.
pub const DIAGNOSIS_SHED_PENALTY: f64 = 1e4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Total cost rose for `patience` consecutive iterations.
    Patience,
    MaxIterations,
    /// The battery was idle, so further throttling changes nothing.
    NoStorageUse,
    /// The throttled program became infeasible.
    ThrottlingInfeasible,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub status: String,
    pub nodes: usize,
    pub lp_iterations: usize,
    pub wall_time_s: f64,
    pub gap: f64,
    pub rows: usize,
    pub columns: usize,
}

impl From<&SolveStats> for IterationStats {
    fn from(s: &SolveStats) -> Self {
        Self {
            status: format!("{:?}", s.status),
            nodes: s.nodes,
            lp_iterations: s.lp_iterations,
            wall_time_s: s.wall_time.as_secs_f64(),
            gap: s.gap,
            rows: s.rows,
            columns: s.columns,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Throttling applied to this solve; `None` for the first.
    pub constraints: Option<IterationConstraintSet>,
    pub solution: SizingSolution,
    /// Generation and battery lifetime cost, excluding wear and shed penalty.
    pub lifetime_cost: f64,
    pub shed_penalty_cost: f64,
    pub degradation_cost: f64,
    pub total_cost: f64,
    /// Days-weighted annual charge plus discharge energy, kWh.
    pub throughput_kwh: f64,
    pub cycles: usize,
    pub soh_by_year: Vec<f64>,
    pub worn_out_year: Option<usize>,
    pub audit: DiagnosticsReport,
    pub stats: IterationStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub variant: Variant,
    pub alpha: f64,
    pub evaluator: String,
    pub iterations: Vec<IterationRecord>,
    /// Index into `iterations` of the lowest total cost.
    pub selected: usize,
    pub stop: StopReason,
    pub throttling_infeasible: bool,
    /// Screening table when the variant was chosen by LCOE.
    pub lcoe: Vec<LcoeRow>,
    pub surrogate_validation_r2: Option<f64>,
}

impl RunReport {
    pub fn selected(&self) -> &IterationRecord {
        &self.iterations[self.selected]
    }

    pub fn total_costs(&self) -> Vec<f64> {
        self.iterations.iter().map(|r| r.total_cost).collect()
    }

    pub fn wall_time_s(&self) -> f64 {
        self.iterations.iter().map(|r| r.stats.wall_time_s).sum()
    }
}

/// Lifetime cost of a fleet priced with `candidates`' costs (matched by
/// name) plus its installed battery energy.
pub fn fleet_lifetime_cost(sol: &SizingSolution, candidates: &[ResourceCandidate], problem: &SizingProblem) -> f64 {
    let t_e = problem.lifetime_years;
    let units: f64 = sol
        .units
        .iter()
        .filter(|u| u.count > 0)
        .map(|u| {
            let c = candidates.iter().find(|c| c.name == u.name).expect("fleet unit comes from the catalog");
            f64::from(u.count) * lifetime_cost_per_unit(&c.cost, t_e)
        })
        .sum();
    units + sol.bess_energy_kwh * lifetime_cost_per_unit(&problem.bess_cost, t_e)
}

/// Runs the decoupled sizing and degradation loop.
pub fn run_remo(scenario: &Scenario, choice: VariantChoice, heuristic: &HeuristicConfig) -> Result<RunReport> {
    heuristic.validate()?;
    let selection = scenario.select_variant(choice)?;
    let (evaluator, r2) = scenario.evaluator(heuristic.evaluator)?;
    let problem = scenario.problem(selection.candidates);
    problem.validate(selection.variant)?;
    let opts = scenario.solver.bnb_options()?;
    let mut report = iterate(scenario, &problem, selection.variant, heuristic, &evaluator, &opts)?;
    report.lcoe = selection.screening.map(|s| s.report).unwrap_or_default();
    report.surrogate_validation_r2 = r2;
    Ok(report)
}

fn iterate(
    scenario: &Scenario,
    problem: &SizingProblem,
    variant: Variant,
    heuristic: &HeuristicConfig,
    evaluator: &Evaluator,
    opts: &BnbOptions,
) -> Result<RunReport> {
    let temps = scenario.ambient_temps();
    let capital_per_kwh = problem.bess_cost.capital;
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut stop = StopReason::MaxIterations;
    let mut rises = 0;
    for i in 1..=heuristic.max_iterations {
        let constraints = match records.last() {
            None => None,
            Some(prev) => Some(IterationConstraintSet::new(i, heuristic.alpha, prev.throughput_kwh)?),
        };
        let run = solve_sizing(problem, variant, constraints.as_ref(), opts)?;
        let Some(solution) = run.solution else {
            if i == 1 {
                return Err(first_solve_failure(problem, variant, run.stats.status, opts));
            }
            info!("iteration {i}: throttled program has no solution ({:?})", run.stats.status);
            stop = StopReason::ThrottlingInfeasible;
            break;
        };
        let cycles = extract_cycles(&solution.dispatch, solution.bess_energy_kwh, temps)?;
        let wear =
            degradation_cost(&cycles, evaluator, capital_per_kwh, solution.bess_energy_kwh, problem.lifetime_years)?;
        let lifetime_cost = fleet_lifetime_cost(&solution, &problem.candidates, problem);
        let shed_penalty_cost = problem.load_shed_penalty.unwrap_or(0.0) * solution.unserved_energy_kwh();
        let total_cost = lifetime_cost + shed_penalty_cost + wear.cost;
        let throughput_kwh = solution.dispatch.annual_throughput_kwh();
        let audit = verify_solution(&solution, problem, constraints.as_ref());
        info!(
            "iteration {i}: lifetime {lifetime_cost:.0}, wear {:.0}, total {total_cost:.0}, throughput {throughput_kwh:.0} kWh, {:.1} s",
            wear.cost,
            run.stats.wall_time.as_secs_f64()
        );
        if records.last().is_some_and(|p| total_cost > p.total_cost) {
            rises += 1;
        } else {
            rises = 0;
        }
        records.push(IterationRecord {
            iteration: i,
            constraints,
            lifetime_cost,
            shed_penalty_cost,
            degradation_cost: wear.cost,
            total_cost,
            throughput_kwh,
            cycles: cycles.len(),
            soh_by_year: wear.soh_by_year,
            worn_out_year: wear.worn_out_year,
            audit,
            stats: IterationStats::from(&run.stats),
            solution,
        });
        if throughput_kwh <= 0.0 {
            stop = StopReason::NoStorageUse;
            break;
        }
        if rises >= heuristic.patience {
            stop = StopReason::Patience;
            break;
        }
    }
    let selected = (0..records.len())
        .min_by(|&a, &b| records[a].total_cost.total_cmp(&records[b].total_cost).then(a.cmp(&b)))
        .expect("at least one iteration");
    Ok(RunReport {
        scenario: scenario.name.clone(),
        variant,
        alpha: heuristic.alpha,
        evaluator: evaluator.tag().to_string(),
        iterations: records,
        selected,
        stop,
        throttling_infeasible: stop == StopReason::ThrottlingInfeasible,
        lcoe: Vec::new(),
        surrogate_validation_r2: None,
    })
}

/// Turns a failed first solve into an error. An infeasible program is
/// re-solved with priced load shedding to say how much demand cannot be met.
fn first_solve_failure(
    problem: &SizingProblem,
    variant: Variant,
    status: MilpStatus,
    opts: &BnbOptions,
) -> OrchestratorError {
    if status != MilpStatus::Infeasible {
        return OrchestratorError::NoSolution(status);
    }
    let diagnosis = if problem.load_shed_penalty.is_none() {
        let mut relaxed = problem.clone();
        relaxed.load_shed_penalty = Some(DIAGNOSIS_SHED_PENALTY);
        match solve_sizing(&relaxed, variant, None, opts) {
            Ok(orem_sizing::SizingRun { solution: Some(s), .. }) => {
                let d = &s.dispatch;
                let worst = (0..d.cells()).max_by(|&a, &b| d.shed_kw[a].total_cmp(&d.shed_kw[b])).unwrap_or(0);
                let n = d.grid.hours_per_period;
                Some(format!(
                    "with load shedding allowed, {:.0} kWh per year goes unserved; the largest shortfall is {:.0} kW at period {} hour {}",
                    s.unserved_energy_kwh(),
                    d.shed_kw[worst],
                    worst / n + 1,
                    worst % n
                ))
            }
            _ => None,
        }
    } else {
        None
    };
    OrchestratorError::Infeasible { diagnosis }
}
