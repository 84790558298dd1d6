use orem_core::{CostBreakdown, Technology};
use orem_solver::MilpSolution;
use serde::{Deserialize, Serialize};

use crate::model::{SizingModel, TimeGrid, Variant};
use crate::{Result, SizingError};

/// Values closer than this to an integer are accepted as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitChoice {
    pub name: String,
    pub technology: Technology,
    pub rated_kw: f64,
    pub count: u32,
}

/// Hourly battery and balance schedule, row-major over `grid`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dispatch {
    pub grid: TimeGrid,
    pub charge_kw: Vec<f64>,
    pub discharge_kw: Vec<f64>,
    pub curtail_kw: Vec<f64>,
    pub stored_kwh: Vec<f64>,
    pub charge_on: Vec<bool>,
    pub discharge_on: Vec<bool>,
    pub shed_kw: Vec<f64>,
}

impl Dispatch {
    pub fn cells(&self) -> usize {
        self.charge_kw.len()
    }

    /// Days-weighted annual charge plus discharge energy, kWh.
    pub fn annual_throughput_kwh(&self) -> f64 {
        (0..self.cells()).map(|k| self.grid.weight_of(k) * (self.charge_kw[k] + self.discharge_kw[k])).sum()
    }

    /// Net battery power per cell, positive while charging.
    pub fn net_charge_kw(&self) -> Vec<f64> {
        self.charge_kw.iter().zip(&self.discharge_kw).map(|(c, d)| c - d).collect()
    }

    pub fn max_charge_kw(&self) -> f64 {
        self.charge_kw.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_discharge_kw(&self) -> f64 {
        self.discharge_kw.iter().copied().fold(0.0, f64::max)
    }
}

/// Lifetime cost of one asset class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssetCost {
    /// Technology tag, or `BESS`.
    pub asset: String,
    pub cost: CostBreakdown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizingSolution {
    pub variant: Variant,
    pub units: Vec<UnitChoice>,
    pub bess_units: u32,
    pub bess_energy_kwh: f64,
    pub dispatch: Dispatch,
    /// Totals by cost family.
    pub cost: CostBreakdown,
    /// By technology, then battery last.
    pub cost_by_asset: Vec<AssetCost>,
    /// Solver objective, which includes any load-shed penalty.
    pub objective: f64,
}

impl SizingSolution {
    /// Lifetime asset cost, excluding degradation and shed penalties.
    pub fn lifetime_cost(&self) -> f64 {
        self.cost.total()
    }

    pub fn count_of(&self, technology: Technology) -> u32 {
        self.units.iter().filter(|u| u.technology == technology).map(|u| u.count).sum()
    }

    pub fn installed_kw(&self, technology: Technology) -> f64 {
        self.units.iter().filter(|u| u.technology == technology).map(|u| f64::from(u.count) * u.rated_kw).sum()
    }

    pub fn unserved_energy_kwh(&self) -> f64 {
        let d = &self.dispatch;
        (0..d.cells()).map(|k| d.grid.weight_of(k) * d.shed_kw[k]).sum()
    }
}

fn integral(name: &str, v: f64) -> Result<u32> {
    let r = v.round();
    if (v - r).abs() > INTEGRALITY_TOL || r < 0.0 {
        return Err(SizingError::Fractional { variable: name.to_string(), value: v });
    }
    Ok(r as u32)
}

fn flag(name: &str, v: f64) -> Result<bool> {
    Ok(integral(name, v)? >= 1)
}

/// Converts a raw solver assignment into a sizing solution. Curtailment is
/// recomputed from the balance so the returned schedule closes it exactly
/// whenever supply covers demand.
pub fn extract_solution(model: &SizingModel, x: &[f64]) -> Result<SizingSolution> {
    let milp = &model.milp;
    if x.len() != milp.num_vars() {
        return Err(SizingError::InvalidInput(format!(
            "assignment has {} values, model has {} variables",
            x.len(),
            milp.num_vars()
        )));
    }
    let p = &model.problem;
    let v = &model.vars;
    let name = |id: orem_solver::VarId| milp.var(id).name.as_str();
    let t_e = p.lifetime_years;

    let mut units = Vec::with_capacity(p.candidates.len());
    for (c, &id) in p.candidates.iter().zip(&v.units) {
        units.push(UnitChoice {
            name: c.name.clone(),
            technology: c.technology,
            rated_kw: c.rated_kw,
            count: integral(name(id), x[id.index()])?,
        });
    }
    let bess_units = integral(name(v.bess_units), x[v.bess_units.index()])?;
    let bess_energy_kwh = f64::from(bess_units) * p.bess.unit_energy_kwh;

    let cells = p.grid.cells();
    let clean = |ids: &[orem_solver::VarId]| ids.iter().map(|id| x[id.index()].max(0.0)).collect::<Vec<f64>>();
    let charge_kw = clean(&v.charge);
    let discharge_kw = clean(&v.discharge);
    let stored_kwh = clean(&v.stored);
    let shed_kw = v.shed.as_deref().map_or_else(|| vec![0.0; cells], clean);
    let mut charge_on = Vec::with_capacity(cells);
    let mut discharge_on = Vec::with_capacity(cells);
    for k in 0..cells {
        charge_on.push(flag(name(v.charge_on[k]), x[v.charge_on[k].index()])?);
        discharge_on.push(flag(name(v.discharge_on[k]), x[v.discharge_on[k].index()])?);
    }
    let curtail_kw = (0..cells)
        .map(|k| {
            let gen: f64 =
                p.candidates.iter().zip(&units).map(|(c, u)| f64::from(u.count) * c.profile.per_unit_kw[k]).sum();
            let surplus = gen + discharge_kw[k] - charge_kw[k] + shed_kw[k] - p.demand[k];
            surplus.max(0.0)
        })
        .collect();

    let mut cost = CostBreakdown::default();
    let mut cost_by_asset: Vec<AssetCost> = Vec::new();
    for (c, u) in p.candidates.iter().zip(&units) {
        let part = CostBreakdown::of(&c.cost, f64::from(u.count), t_e);
        cost.add(&part);
        let tag = c.technology.tag();
        match cost_by_asset.iter_mut().find(|a| a.asset == tag) {
            Some(a) => a.cost.add(&part),
            None => cost_by_asset.push(AssetCost { asset: tag.to_string(), cost: part }),
        }
    }
    let bess_part = CostBreakdown::of(&p.bess_cost, bess_energy_kwh, t_e);
    cost.add(&bess_part);
    cost_by_asset.push(AssetCost { asset: "BESS".to_string(), cost: bess_part });

    Ok(SizingSolution {
        variant: model.variant,
        units,
        bess_units,
        bess_energy_kwh,
        dispatch: Dispatch {
            grid: p.grid.clone(),
            charge_kw,
            discharge_kw,
            curtail_kw,
            stored_kwh,
            charge_on,
            discharge_on,
            shed_kw,
        },
        cost,
        cost_by_asset,
        objective: milp.objective_value(x),
    })
}

/// Extracts the incumbent of a finished solve.
pub fn extract_from(model: &SizingModel, raw: &MilpSolution) -> Result<SizingSolution> {
    if !raw.has_incumbent() {
        return Err(SizingError::NoSolution(raw.status));
    }
    extract_solution(model, &raw.x)
}
