//! Scenario files and everything derived from them before a solve.

use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};
use std::time::Duration;

use log::info;
use orem_core::{
    aggregate, parse_load_csv, parse_metocean_csv, parse_typical_year_csv, Catalog, Channel, CostQuad, LoadProfile,
    PruneOutcome, Resolution, ResourceCandidate, Technology, TypicalYear, HOURS,
};
use orem_degradation::{generate_training_set, train_mlp, Evaluator, FeatureRanges, MlpModel, TrainConfig};
use orem_sizing::{BessParams, SizingProblem, Variant};
use orem_solver::BnbOptions;
use serde::{Deserialize, Serialize};

use crate::{OrchestratorError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvaluatorKind {
    Oracle,
    Surrogate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeuristicConfig {
    /// Usage control factor.
    pub alpha: f64,
    pub max_iterations: usize,
    /// Consecutive total-cost increases tolerated before stopping.
    pub patience: usize,
    pub evaluator: EvaluatorKind,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        Self { alpha: 0.001, max_iterations: 6, patience: 2, evaluator: EvaluatorKind::Surrogate }
    }
}

impl HeuristicConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) || self.max_iterations == 0 || self.patience == 0 {
            return Err(OrchestratorError::Input(format!("bad heuristic settings: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub time_limit_s: f64,
    pub rel_gap: f64,
    pub node_limit: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let d = BnbOptions::default();
        Self { time_limit_s: 900.0, rel_gap: d.rel_gap, node_limit: d.node_limit }
    }
}

impl SolverSettings {
    pub fn bnb_options(&self) -> Result<BnbOptions> {
        if !(self.time_limit_s > 0.0 && self.time_limit_s.is_finite()) || !(self.rel_gap >= 0.0) || self.node_limit == 0
        {
            return Err(OrchestratorError::Input(format!("bad solver settings: {self:?}")));
        }
        Ok(BnbOptions {
            time_limit: Duration::from_secs_f64(self.time_limit_s),
            rel_gap: self.rel_gap,
            node_limit: self.node_limit,
            ..BnbOptions::default()
        })
    }
}

/// Where the degradation surrogate comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SurrogateSource {
    File { model: PathBuf },
    Train { samples: usize, seed: u64 },
}

impl Default for SurrogateSource {
    fn default() -> Self {
        SurrogateSource::Train { samples: 10_000, seed: 1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantChoice {
    Classic,
    Simplified,
    /// Simplified when LCOE screening drops every wave and tidal candidate.
    Auto,
}

impl std::str::FromStr for VariantChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "classic" => Ok(Self::Classic),
            "simplified" => Ok(Self::Simplified),
            "auto" => Ok(Self::Auto),
            other => Err(format!("unknown variant `{other}`; expected classic, simplified or auto")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct VariantSelection {
    pub variant: Variant,
    pub candidates: Vec<ResourceCandidate>,
    pub screening: Option<PruneOutcome>,
}

/// On-disk scenario. Relative paths resolve against the file's directory.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    /// Hourly met-ocean series, aggregated on load.
    #[serde(default)]
    pub metocean: Option<PathBuf>,
    /// Already aggregated representative year.
    #[serde(default)]
    pub typical_year: Option<PathBuf>,
    #[serde(default = "default_resolution")]
    pub resolution: Resolution,
    pub load: PathBuf,
    /// Defaults to the embedded catalog.
    #[serde(default)]
    pub catalog: Option<PathBuf>,
    #[serde(default)]
    pub bess: BessParams,
    pub bess_cost: CostQuad,
    #[serde(default = "default_lifetime")]
    pub lifetime_years: f64,
    #[serde(default = "default_threshold")]
    pub lcoe_threshold_cents_per_kwh: f64,
    #[serde(default)]
    pub load_shed_penalty: Option<f64>,
    #[serde(default)]
    pub unit_margin: Option<u32>,
    #[serde(default)]
    pub heuristic: HeuristicConfig,
    #[serde(default)]
    pub surrogate: SurrogateSource,
    #[serde(default)]
    pub solver: SolverSettings,
}

fn default_resolution() -> Resolution {
    Resolution::TypicalDay
}

fn default_lifetime() -> f64 {
    20.0
}

fn default_threshold() -> f64 {
    20.0
}

#[derive(Clone, Debug)]
pub struct TrainedSurrogate {
    pub model: MlpModel,
    /// Held-out R² when trained here, `None` when read from a file.
    pub validation_r2: Option<f64>,
}

/// A loaded, validated scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub typical_year: TypicalYear,
    pub load: LoadProfile,
    pub candidates: Vec<ResourceCandidate>,
    pub bess: BessParams,
    pub bess_cost: CostQuad,
    pub lifetime_years: f64,
    pub lcoe_threshold: f64,
    pub load_shed_penalty: Option<f64>,
    pub unit_margin: u32,
    pub heuristic: HeuristicConfig,
    pub solver: SolverSettings,
    pub surrogate: SurrogateSource,
    trained: Arc<OnceLock<TrainedSurrogate>>,
}

impl Scenario {
    /// Scenario with default battery, lifetime, screening, heuristic and
    /// solver settings. A load at a different resolution than `typical_year`
    /// is converted.
    pub fn new(
        name: impl Into<String>,
        typical_year: TypicalYear,
        load: LoadProfile,
        candidates: Vec<ResourceCandidate>,
        bess_cost: CostQuad,
    ) -> Result<Self> {
        let load = fit_load(load, typical_year.resolution)?;
        Ok(Self {
            name: name.into(),
            typical_year,
            load,
            candidates,
            bess: BessParams::default(),
            bess_cost,
            lifetime_years: 20.0,
            lcoe_threshold: 20.0,
            load_shed_penalty: None,
            unit_margin: 2,
            heuristic: HeuristicConfig::default(),
            solver: SolverSettings::default(),
            surrogate: SurrogateSource::default(),
            trained: Arc::default(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| OrchestratorError::io(path, e))?;
        let file: ScenarioFile =
            serde_json::from_str(&text).map_err(|e| OrchestratorError::Input(format!("{}: {e}", path.display())))?;
        Self::from_file(file, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn from_file(file: ScenarioFile, base: &Path) -> Result<Self> {
        let at = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        let typical_year = match (&file.metocean, &file.typical_year) {
            (Some(m), None) => {
                let series = parse_metocean_csv(at(m))?;
                if !series.warnings.is_empty() {
                    info!("{}: {} met-ocean rows dropped", m.display(), series.warnings.len());
                }
                aggregate(&series, file.resolution)?
            }
            (None, Some(t)) => parse_typical_year_csv(at(t))?,
            _ => return Err(OrchestratorError::Input("give exactly one of `metocean` and `typical_year`".into())),
        };
        if typical_year.resolution != file.resolution {
            return Err(OrchestratorError::Input(format!(
                "typical year is {:?} but the scenario asks for {:?}",
                typical_year.resolution, file.resolution
            )));
        }
        let load = parse_load_csv(at(&file.load))?;
        let catalog = match &file.catalog {
            Some(c) => Catalog::load(at(c))?,
            None => Catalog::default_catalog(),
        };
        let candidates = catalog.candidates(&typical_year)?;
        let mut s = Self::new(file.name, typical_year, load, candidates, file.bess_cost)?;
        s.bess = file.bess;
        s.lifetime_years = file.lifetime_years;
        s.lcoe_threshold = file.lcoe_threshold_cents_per_kwh;
        s.load_shed_penalty = file.load_shed_penalty;
        if let Some(m) = file.unit_margin {
            s.unit_margin = m;
        }
        s.heuristic = file.heuristic;
        s.solver = file.solver;
        s.surrogate = match file.surrogate {
            SurrogateSource::File { model } => SurrogateSource::File { model: at(&model) },
            t => t,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.heuristic.validate()?;
        self.solver.bnb_options()?;
        if !(self.lcoe_threshold >= 0.0) {
            return Err(OrchestratorError::Input(format!("LCOE threshold {}", self.lcoe_threshold)));
        }
        self.problem(self.candidates.clone()).validate(Variant::Classic)?;
        Ok(())
    }

    pub fn problem(&self, candidates: Vec<ResourceCandidate>) -> SizingProblem {
        let mut p = SizingProblem::new(candidates, &self.load, self.bess, self.bess_cost);
        p.lifetime_years = self.lifetime_years;
        p.load_shed_penalty = self.load_shed_penalty;
        p.unit_margin = self.unit_margin;
        p
    }

    /// Ambient temperature per cell, when the met-ocean data has it.
    pub fn ambient_temps(&self) -> Option<&[f64]> {
        self.typical_year.channel(Channel::Tamb)
    }

    /// Copy with every cost component of `technology` scaled by `k`.
    pub fn with_cost_multiplier(&self, technology: Technology, k: f64) -> Self {
        let mut s = self.clone();
        for c in s.candidates.iter_mut().filter(|c| c.technology == technology) {
            c.cost = c.cost.scaled(k);
        }
        s
    }

    pub fn screen(&self) -> Result<PruneOutcome> {
        Ok(orem_core::prune_candidates(&self.candidates, self.lifetime_years, self.lcoe_threshold)?)
    }

    /// Picks the variant and its candidate list. The simplified variant
    /// keeps every wind and PV candidate; screening only decides whether
    /// wave and tidal devices are worth modeling.
    pub fn select_variant(&self, choice: VariantChoice) -> Result<VariantSelection> {
        let marine = |c: &ResourceCandidate| matches!(c.technology, Technology::Wec | Technology::Tec);
        let screening = match choice {
            VariantChoice::Classic => None,
            _ => Some(self.screen()?),
        };
        let variant = match (choice, &screening) {
            (VariantChoice::Classic, _) => Variant::Classic,
            (VariantChoice::Simplified, _) => Variant::Simplified,
            (VariantChoice::Auto, Some(s)) if s.kept.iter().any(marine) => Variant::Classic,
            (VariantChoice::Auto, _) => Variant::Simplified,
        };
        let candidates = match variant {
            Variant::Classic => self.candidates.clone(),
            Variant::Simplified => self.candidates.iter().filter(|c| !marine(c)).cloned().collect(),
        };
        Ok(VariantSelection { variant, candidates, screening })
    }

    /// The per-cycle wear evaluator. The surrogate is trained (or read) once
    /// and shared by clones of this scenario.
    pub fn evaluator(&self, kind: EvaluatorKind) -> Result<(Evaluator, Option<f64>)> {
        match kind {
            EvaluatorKind::Oracle => Ok((Evaluator::oracle(), None)),
            EvaluatorKind::Surrogate => {
                let t = self.surrogate()?;
                Ok((Evaluator::Surrogate(Box::new(t.model.clone())), t.validation_r2))
            }
        }
    }

    pub fn surrogate(&self) -> Result<&TrainedSurrogate> {
        if let Some(t) = self.trained.get() {
            return Ok(t);
        }
        let t = match &self.surrogate {
            SurrogateSource::File { model } => TrainedSurrogate { model: MlpModel::load(model)?, validation_r2: None },
            SurrogateSource::Train { samples, seed } => {
                let data = generate_training_set(&FeatureRanges::default(), *samples, *seed)?;
                let out = train_mlp(&data, &TrainConfig { seed: *seed, ..TrainConfig::default() })?;
                info!("degradation surrogate trained on {samples} samples, held-out R² {:.4}", out.validation_r2);
                TrainedSurrogate { model: out.model, validation_r2: Some(out.validation_r2) }
            }
        };
        let _ = self.trained.set(t);
        Ok(self.trained.get().expect("just set"))
    }
}

/// Converts a load to `resolution`: full-year days average into their
/// month, and a month's typical day repeats for each of its days.
pub fn fit_load(load: LoadProfile, resolution: Resolution) -> Result<LoadProfile> {
    if load.resolution == resolution {
        return Ok(load);
    }
    let demand = match resolution {
        Resolution::TypicalDay => {
            let mut sums = vec![0.0; Resolution::TypicalDay.cells()];
            let mut days = [0.0f64; 12];
            for d in 0..load.resolution.periods() {
                let m = Resolution::FullYear.month_of_period(d);
                days[m] += 1.0;
                for h in 0..HOURS {
                    sums[m * HOURS + h] += load.at(d, h);
                }
            }
            sums.iter().enumerate().map(|(k, s)| s / days[k / HOURS]).collect()
        }
        Resolution::FullYear => (0..Resolution::FullYear.periods())
            .flat_map(|d| {
                let m = Resolution::FullYear.month_of_period(d);
                (0..HOURS).map(move |h| (m, h))
            })
            .map(|(m, h)| load.at(m, h))
            .collect(),
    };
    Ok(LoadProfile::new(resolution, demand)?)
}
