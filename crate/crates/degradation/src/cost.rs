use serde::{Deserialize, Serialize};

use crate::cycles::Cycle;
use crate::mlp::MlpModel;
use crate::oracle::{oracle_degradation_with, DegradationFeatures, OracleParams};
use crate::{DegradationError, Result};

/// Per-cycle wear evaluator.
#[derive(Clone, Debug)]
pub enum Evaluator {
    Oracle(OracleParams),
    Surrogate(Box<MlpModel>),
}

impl Evaluator {
    pub fn oracle() -> Self {
        Evaluator::Oracle(OracleParams::default())
    }

    pub fn per_cycle(&self, f: &DegradationFeatures) -> Result<f64> {
        match self {
            Evaluator::Oracle(p) => oracle_degradation_with(p, f),
            Evaluator::Surrogate(m) => Ok(m.predict(f)),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Evaluator::Oracle(_) => "oracle",
            Evaluator::Surrogate(_) => "surrogate",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegradationOutcome {
    pub cost: f64,
    /// Capacity fraction consumed over the lifetime, at most 1.
    pub consumed_fraction: f64,
    /// State of health at the start and after each simulated year.
    pub soh_by_year: Vec<f64>,
    /// First year in which the battery was used up.
    pub worn_out_year: Option<usize>,
}

pub fn features_of(c: &Cycle, soh: f64) -> DegradationFeatures {
    DegradationFeatures { t_c: c.mean_ambient_temp_c, c_rate: c.c_rate, soc: c.mean_soc, dod: c.depth, soh }
}

/// Wear per year at state of health `soh`, days-weighted over the
/// representative cycles.
pub fn annual_degradation(cycles: &[Cycle], evaluator: &Evaluator, soh: f64) -> Result<f64> {
    cycles.iter().map(|c| Ok(c.weight * evaluator.per_cycle(&features_of(c, soh))?)).sum()
}

/// Simulates `lifetime_years` of the same annual cycle pattern, lowering
/// state of health after each year, and prices consumed capacity at the
/// battery's capital cost. Once health reaches zero the battery is flagged
/// and no further wear accrues.
pub fn degradation_cost(
    cycles: &[Cycle],
    evaluator: &Evaluator,
    capital_per_kwh: f64,
    e_total: f64,
    lifetime_years: f64,
) -> Result<DegradationOutcome> {
    if !(lifetime_years > 0.0 && lifetime_years.is_finite()) || !(capital_per_kwh >= 0.0) {
        return Err(DegradationError::Contract(format!(
            "lifetime {lifetime_years} years, capital {capital_per_kwh} per kWh"
        )));
    }
    if !(e_total > 0.0) {
        if !cycles.is_empty() {
            return Err(DegradationError::Contract("cycles given for a battery with no capacity".into()));
        }
        let years = lifetime_years.ceil() as usize;
        return Ok(DegradationOutcome {
            cost: 0.0,
            consumed_fraction: 0.0,
            soh_by_year: vec![1.0; years + 1],
            worn_out_year: None,
        });
    }
    let full = lifetime_years.floor() as usize;
    let years = lifetime_years.ceil() as usize;
    let mut soh = 1.0;
    let mut consumed = 0.0;
    let mut trajectory = vec![1.0];
    let mut worn_out_year = None;
    for y in 0..years {
        if worn_out_year.is_some() {
            trajectory.push(0.0);
            continue;
        }
        let share = if y < full { 1.0 } else { lifetime_years - full as f64 };
        let wear = share * annual_degradation(cycles, evaluator, soh)?;
        if wear >= soh {
            consumed += soh;
            soh = 0.0;
            worn_out_year = Some(y + 1);
        } else {
            consumed += wear;
            soh -= wear;
        }
        trajectory.push(soh);
    }
    Ok(DegradationOutcome {
        cost: consumed * e_total * capital_per_kwh,
        consumed_fraction: consumed,
        soh_by_year: trajectory,
        worn_out_year,
    })
}
