//! Four-part lifetime cost terms, levelized cost of energy, and
//! LCOE-based candidate screening.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::TypicalYear;
use crate::resources::{build_generation_profile, DeviceSpec, GenerationProfile, ResourceError, Technology};

#[derive(Debug, Error)]
pub enum CostError {
    #[error("cost component `{component}` = {value} must be finite and non-negative")]
    NegativeCost { component: &'static str, value: f64 },
    #[error("lifetime {0} years must be positive")]
    Lifetime(f64),
    #[error("candidate `{0}` generates no energy; its LCOE is undefined")]
    NonGenerating(String),
    #[error("cannot read catalog {path}: {message}")]
    Catalog { path: String, message: String },
    #[error("candidate `{name}`: {source}")]
    Resource { name: String, source: ResourceError },
}

pub type Result<T> = std::result::Result<T, CostError>;

/// Per-unit cost components. For generators the unit is one device; for
/// storage the unit is one kWh of installed capacity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostQuad {
    pub precommissioning: f64,
    pub capital: f64,
    /// Per year.
    pub o_and_m_annual: f64,
    pub decommissioning: f64,
}

impl CostQuad {
    pub fn new(precommissioning: f64, capital: f64, o_and_m_annual: f64, decommissioning: f64) -> Self {
        Self { precommissioning, capital, o_and_m_annual, decommissioning }
    }

    pub fn validate(&self) -> Result<()> {
        for (component, value) in [
            ("precommissioning", self.precommissioning),
            ("capital", self.capital),
            ("o_and_m_annual", self.o_and_m_annual),
            ("decommissioning", self.decommissioning),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(CostError::NegativeCost { component, value });
            }
        }
        Ok(())
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            precommissioning: self.precommissioning * k,
            capital: self.capital * k,
            o_and_m_annual: self.o_and_m_annual * k,
            decommissioning: self.decommissioning * k,
        }
    }
}

/// Undiscounted lifetime cost of one unit: one-off terms plus `t_e` years
/// of O&M.
pub fn lifetime_cost_per_unit(cost: &CostQuad, t_e: f64) -> f64 {
    cost.precommissioning + cost.capital + cost.o_and_m_annual * t_e + cost.decommissioning
}

/// Lifetime cost split by family for `units` units.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub precommissioning: f64,
    pub capital: f64,
    /// O&M over the whole lifetime.
    pub o_and_m: f64,
    pub decommissioning: f64,
}

impl CostBreakdown {
    pub fn of(cost: &CostQuad, units: f64, t_e: f64) -> Self {
        Self {
            precommissioning: units * cost.precommissioning,
            capital: units * cost.capital,
            o_and_m: units * cost.o_and_m_annual * t_e,
            decommissioning: units * cost.decommissioning,
        }
    }

    pub fn total(&self) -> f64 {
        self.precommissioning + self.capital + self.o_and_m + self.decommissioning
    }

    pub fn add(&mut self, other: &CostBreakdown) {
        self.precommissioning += other.precommissioning;
        self.capital += other.capital;
        self.o_and_m += other.o_and_m;
        self.decommissioning += other.decommissioning;
    }
}

/// One device size offered to the optimizer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceCandidate {
    pub name: String,
    pub technology: Technology,
    pub rated_kw: f64,
    pub spec: DeviceSpec,
    pub cost: CostQuad,
    pub profile: GenerationProfile,
}

impl ResourceCandidate {
    pub fn new(name: impl Into<String>, spec: DeviceSpec, cost: CostQuad, profile: GenerationProfile) -> Self {
        Self { name: name.into(), technology: spec.technology(), rated_kw: spec.rated_kw(), spec, cost, profile }
    }
}

/// Levelized cost in ¢/kWh: lifetime cost over lifetime energy.
pub fn lcoe(candidate: &ResourceCandidate, t_e: f64) -> Result<f64> {
    if !(t_e > 0.0) {
        return Err(CostError::Lifetime(t_e));
    }
    let energy = candidate.profile.annual_energy_kwh * t_e;
    if !(energy > 0.0) {
        return Err(CostError::NonGenerating(candidate.name.clone()));
    }
    Ok(100.0 * lifetime_cost_per_unit(&candidate.cost, t_e) / energy)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LcoeRow {
    pub name: String,
    pub technology: Technology,
    pub rated_kw: f64,
    /// `None` for candidates that never generate.
    pub lcoe_cents_per_kwh: Option<f64>,
    pub kept: bool,
}

#[derive(Clone, Debug, Default)]
pub struct PruneOutcome {
    pub kept: Vec<ResourceCandidate>,
    pub report: Vec<LcoeRow>,
}

impl PruneOutcome {
    pub fn report_csv(&self) -> String {
        lcoe_report_csv(&self.report)
    }
}

pub fn lcoe_report_csv(rows: &[LcoeRow]) -> String {
    let mut out = String::from("technology,rated_kw,lcoe_cents_per_kwh,kept\n");
    for r in rows {
        let l = r.lcoe_cents_per_kwh.map_or_else(|| "inf".to_string(), |v| v.to_string());
        writeln!(out, "{},{},{},{}", r.technology, r.rated_kw, l, r.kept).unwrap();
    }
    out
}

/// Keeps candidates whose LCOE does not exceed `threshold` ¢/kWh.
/// Non-generating candidates are always dropped.
pub fn prune_candidates(candidates: &[ResourceCandidate], t_e: f64, threshold: f64) -> Result<PruneOutcome> {
    let mut out = PruneOutcome::default();
    for c in candidates {
        let value = match lcoe(c, t_e) {
            Ok(v) => Some(v),
            Err(CostError::NonGenerating(_)) => None,
            Err(e) => return Err(e),
        };
        let kept = value.is_some_and(|v| v <= threshold);
        if kept {
            out.kept.push(c.clone());
        }
        out.report.push(LcoeRow {
            name: c.name.clone(),
            technology: c.technology,
            rated_kw: c.rated_kw,
            lcoe_cents_per_kwh: value,
            kept,
        });
    }
    Ok(out)
}

/// Catalog entry before profiles are attached.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateDef {
    pub name: String,
    pub spec: DeviceSpec,
    pub cost: CostQuad,
}

/// Device catalog file: candidate specs with their cost quadruples.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
    pub candidates: Vec<CandidateDef>,
}

const DEFAULT_CATALOG: &str = include_str!("../data/default_catalog.json");

impl Catalog {
    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let err = |message: String| CostError::Catalog { path: path.display().to_string(), message };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let cat = Self::from_json(&text).map_err(|e| err(e.to_string()))?;
        cat.validate().map_err(|e| err(e.to_string()))?;
        Ok(cat)
    }

    /// Illustrative catalog: one 750 kW wave converter, one 300 kW tidal
    /// turbine, six wind turbine sizes, and two floating PV sizes. The
    /// dollar figures are placeholders, not market data.
    pub fn default_catalog() -> Self {
        Self::from_json(DEFAULT_CATALOG).expect("embedded catalog parses")
    }

    pub fn validate(&self) -> Result<()> {
        for c in &self.candidates {
            c.cost.validate()?;
            c.spec.validate().map_err(|source| CostError::Resource { name: c.name.clone(), source })?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("catalog serializes")
    }

    /// Attaches generation profiles computed from `ty`.
    pub fn candidates(&self, ty: &TypicalYear) -> Result<Vec<ResourceCandidate>> {
        self.candidates
            .iter()
            .map(|d| {
                let profile = build_generation_profile(&d.spec, ty)
                    .map_err(|source| CostError::Resource { name: d.name.clone(), source })?;
                Ok(ResourceCandidate::new(d.name.clone(), d.spec.clone(), d.cost, profile))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resources::FpvSpec;

    fn candidate(cost: CostQuad, per_hour: f64) -> ResourceCandidate {
        let spec = DeviceSpec::Fpv(FpvSpec::with_defaults(1000.0));
        let profile =
            GenerationProfile::from_values(1000.0, vec![per_hour; 288], crate::Resolution::TypicalDay.weights());
        ResourceCandidate::new("pv", spec, cost, profile)
    }

    #[test]
    fn lifetime_cost_examples() {
        assert_eq!(lifetime_cost_per_unit(&CostQuad::default(), 20.0), 0.0);
        assert_eq!(lifetime_cost_per_unit(&CostQuad::new(1.0, 10.0, 0.5, 1.0), 20.0), 22.0);
        let om = CostQuad::new(0.0, 0.0, 3.0, 0.0);
        assert_eq!(lifetime_cost_per_unit(&om, 40.0), 2.0 * lifetime_cost_per_unit(&om, 20.0));
    }

    #[test]
    fn lcoe_hand_example() {
        // 13,750 kWh per year over 8760 h
        let c = candidate(CostQuad::new(0.0, 22_000.0, 0.0, 0.0), 13_750.0 / 8760.0);
        assert!((c.profile.annual_energy_kwh - 13_750.0).abs() < 1e-9);
        assert!((lcoe(&c, 20.0).unwrap() - 8.0).abs() < 1e-12);
        assert_eq!(lcoe(&candidate(CostQuad::default(), 5.0), 20.0).unwrap(), 0.0);
        assert!(matches!(
            lcoe(&candidate(CostQuad::new(1.0, 1.0, 1.0, 1.0), 0.0), 20.0),
            Err(CostError::NonGenerating(_))
        ));
    }

    #[test]
    fn negative_component_rejected() {
        assert!(CostQuad::new(0.0, -1.0, 0.0, 0.0).validate().is_err());
    }

    #[test]
    fn default_catalog_is_valid() {
        let cat = Catalog::default_catalog();
        cat.validate().unwrap();
        let count = |t: Technology| cat.candidates.iter().filter(|c| c.spec.technology() == t).count();
        assert_eq!(
            (count(Technology::Wec), count(Technology::Tec), count(Technology::Owt), count(Technology::Fpv)),
            (1, 1, 6, 2)
        );
    }
}
