//! Cost sensitivity sweeps over one technology.

use log::warn;
use orem_core::Technology;
use orem_sizing::{SizingSolution, UnitChoice, Variant};
use serde::{Deserialize, Serialize};

use crate::heuristic::{fleet_lifetime_cost, run_remo, RunReport};
use crate::scenario::{HeuristicConfig, Scenario, VariantChoice};
use crate::{OrchestratorError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub multiplier: f64,
    /// False when this row's own run failed.
    pub feasible: bool,
    pub total_cost: Option<f64>,
    pub lifetime_cost: Option<f64>,
    pub degradation_cost: Option<f64>,
    pub units: Vec<UnitChoice>,
    pub bess_units: u32,
    /// Units of the swept technology in the reported fleet.
    pub swept_units: u32,
    /// The fleet is the previous row's, re-priced, because it was cheaper
    /// than this row's own heuristic result.
    pub carried_over: bool,
    pub iterations: usize,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub scenario: String,
    pub technology: Technology,
    pub variant: Variant,
    /// Sorted by descending multiplier.
    pub rows: Vec<SweepRow>,
    /// Largest multiplier whose fleet contains the swept technology.
    pub entry_multiplier: Option<f64>,
}

impl SweepTable {
    pub fn total_costs(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.total_cost).collect()
    }
}

/// Reruns the full loop with every cost of `technology` scaled by each
/// multiplier. Wave and tidal sweeps always use the classic variant, since
/// the simplified one cannot place those devices.
///
/// A cheaper technology cannot make the optimum dearer, but the loop is a
/// heuristic, so each row also prices the previous row's fleet at its own
/// multiplier and reports whichever is cheaper.
pub fn sensitivity_sweep(
    scenario: &Scenario,
    technology: Technology,
    multipliers: &[f64],
    choice: VariantChoice,
    heuristic: &HeuristicConfig,
) -> Result<SweepTable> {
    if multipliers.is_empty() || multipliers.iter().any(|&k| !(k > 0.0 && k <= 1.0)) {
        return Err(OrchestratorError::Input(format!("multipliers must lie in (0, 1]: {multipliers:?}")));
    }
    if !scenario.candidates.iter().any(|c| c.technology == technology) {
        return Err(OrchestratorError::Input(format!("no {technology} candidate in the catalog")));
    }
    heuristic.validate()?;
    let choice = match technology {
        Technology::Wec | Technology::Tec => VariantChoice::Classic,
        _ => choice,
    };
    let mut ks = multipliers.to_vec();
    ks.sort_by(|a, b| b.total_cmp(a));
    ks.dedup();
    // train once before the rows share it
    scenario.evaluator(heuristic.evaluator)?;

    let scenarios: Vec<Scenario> = ks.iter().map(|&k| scenario.with_cost_multiplier(technology, k)).collect();
    let runs: Vec<Result<RunReport>> = std::thread::scope(|s| {
        let handles: Vec<_> = scenarios.iter().map(|sc| s.spawn(move || run_remo(sc, choice, heuristic))).collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });

    let mut rows: Vec<SweepRow> = Vec::with_capacity(ks.len());
    let mut variant = None;
    // previous row's fleet, with its non-asset costs
    let mut prev: Option<(SizingSolution, f64, f64)> = None;
    for ((&k, sc), run) in ks.iter().zip(&scenarios).zip(runs) {
        let own = match run {
            Ok(r) => Some(r),
            Err(e @ (OrchestratorError::Infeasible { .. } | OrchestratorError::NoSolution(_))) => {
                warn!("multiplier {k}: {e}");
                None
            }
            Err(e) => return Err(e),
        };
        let carried = prev.as_ref().map(|(sol, shed, wear)| {
            let problem = sc.problem(sc.candidates.clone());
            let lifetime = fleet_lifetime_cost(sol, &sc.candidates, &problem);
            (sol.clone(), lifetime, *shed, *wear)
        });
        let own_total = own.as_ref().map(|r| r.selected().total_cost);
        let carry_total = carried.as_ref().map(|(_, l, s, w)| l + s + w);
        let use_carry = match (own_total, carry_total) {
            (Some(o), Some(c)) => c < o,
            (None, Some(_)) => true,
            _ => false,
        };
        let note = own.as_ref().map_or_else(|| Some("own run found no solution".to_string()), |_| None);
        let row = if use_carry {
            let (sol, lifetime, shed, wear) = carried.expect("carry exists");
            let total = lifetime + shed + wear;
            let r = SweepRow {
                multiplier: k,
                feasible: own.is_some(),
                total_cost: Some(total),
                lifetime_cost: Some(lifetime),
                degradation_cost: Some(wear),
                swept_units: sol.count_of(technology),
                units: sol.units.clone(),
                bess_units: sol.bess_units,
                carried_over: true,
                iterations: own.as_ref().map_or(0, |r| r.iterations.len()),
                note,
            };
            prev = Some((sol, shed, wear));
            r
        } else if let Some(report) = &own {
            let it = report.selected();
            prev = Some((it.solution.clone(), it.shed_penalty_cost, it.degradation_cost));
            SweepRow {
                multiplier: k,
                feasible: true,
                total_cost: Some(it.total_cost),
                lifetime_cost: Some(it.lifetime_cost),
                degradation_cost: Some(it.degradation_cost),
                swept_units: it.solution.count_of(technology),
                units: it.solution.units.clone(),
                bess_units: it.solution.bess_units,
                carried_over: false,
                iterations: report.iterations.len(),
                note,
            }
        } else {
            SweepRow {
                multiplier: k,
                feasible: false,
                total_cost: None,
                lifetime_cost: None,
                degradation_cost: None,
                units: Vec::new(),
                bess_units: 0,
                swept_units: 0,
                carried_over: false,
                iterations: 0,
                note,
            }
        };
        if let Some(r) = &own {
            variant.get_or_insert(r.variant);
        }
        rows.push(row);
    }
    let entry_multiplier = rows.iter().find(|r| r.swept_units > 0).map(|r| r.multiplier);
    let variant = match variant {
        Some(v) => v,
        None => scenario.select_variant(choice)?.variant,
    };
    Ok(SweepTable { scenario: scenario.name.clone(), technology, variant, rows, entry_multiplier })
}
