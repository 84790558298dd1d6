use orem_sizing::Dispatch;
use serde::{Deserialize, Serialize};

use crate::{DegradationError, Result};

/// Battery power at or below this magnitude counts as idle, kW.
pub const IDLE_KW: f64 = 1e-6;

/// Ambient temperature used when no series is supplied, °C.
pub const REFERENCE_TEMP_C: f64 = 25.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CycleKind {
    Charge,
    Discharge,
}

/// A run of consecutive hours spent in one battery state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cycle {
    pub kind: CycleKind,
    pub period: usize,
    pub start_hour: usize,
    pub duration_h: usize,
    pub mean_power_kw: f64,
    /// Mean power over installed energy, 1/h.
    pub c_rate: f64,
    /// Energy moved over installed energy.
    pub depth: f64,
    pub mean_soc: f64,
    pub mean_ambient_temp_c: f64,
    /// Days per year this cycle stands for.
    pub weight: f64,
}

impl Cycle {
    pub fn energy_kwh(&self) -> f64 {
        self.mean_power_kw * self.duration_h as f64
    }

    /// Copy with power and depth scaled by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            mean_power_kw: self.mean_power_kw * lambda,
            c_rate: self.c_rate * lambda,
            depth: (self.depth * lambda).min(1.0),
            ..self.clone()
        }
    }
}

fn state(net: f64) -> Option<CycleKind> {
    if net > IDLE_KW {
        Some(CycleKind::Charge)
    } else if net < -IDLE_KW {
        Some(CycleKind::Discharge)
    } else {
        None
    }
}

/// Groups the schedule into cycles: consecutive hours in the same state
/// merge, idle hours and period boundaries split. `temps_c` gives the
/// ambient temperature per cell.
pub fn extract_cycles(dispatch: &Dispatch, e_total: f64, temps_c: Option<&[f64]>) -> Result<Vec<Cycle>> {
    let cells = dispatch.cells();
    let net = dispatch.net_charge_kw();
    if let Some(t) = temps_c {
        if t.len() != cells {
            return Err(DegradationError::Contract(format!("{} temperatures for {cells} schedule cells", t.len())));
        }
    }
    if !(e_total > 0.0) {
        if net.iter().any(|&p| state(p).is_some()) {
            return Err(DegradationError::Contract(format!(
                "schedule moves energy but installed capacity is {e_total}"
            )));
        }
        return Ok(Vec::new());
    }
    let hpp = dispatch.grid.hours_per_period;
    let temp = |k: usize| temps_c.map_or(REFERENCE_TEMP_C, |t| t[k]);

    let mut out = Vec::new();
    let mut k = 0;
    while k < cells {
        let Some(kind) = state(net[k]) else {
            k += 1;
            continue;
        };
        let period = k / hpp;
        let start = k;
        let (mut power, mut soc, mut t) = (0.0, 0.0, 0.0);
        while k < cells && k / hpp == period && state(net[k]) == Some(kind) {
            power += net[k].abs();
            soc += dispatch.stored_kwh[k] / e_total;
            t += temp(k);
            k += 1;
        }
        let n = (k - start) as f64;
        let mean_power_kw = power / n;
        out.push(Cycle {
            kind,
            period,
            start_hour: start % hpp,
            duration_h: k - start,
            mean_power_kw,
            c_rate: mean_power_kw / e_total,
            depth: (power / e_total).min(1.0),
            mean_soc: (soc / n).clamp(0.0, 1.0),
            mean_ambient_temp_c: t / n,
            weight: dispatch.grid.weights[period],
        });
    }
    Ok(out)
}
