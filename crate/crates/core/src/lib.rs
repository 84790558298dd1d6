//! Data pipeline and economics for offshore microgrid sizing: met-ocean and
//! load ingest, per-device power models, and lifetime cost screening.

pub mod cost;
pub mod ingest;
pub mod resources;

pub use cost::{
    lcoe, lcoe_report_csv, lifetime_cost_per_unit, prune_candidates, CandidateDef, Catalog, CostBreakdown, CostError,
    CostQuad, LcoeRow, PruneOutcome, ResourceCandidate,
};
pub use ingest::{
    aggregate, aggregate_full_year, aggregate_typical_days, parse_load_csv, parse_load_reader, parse_metocean_csv,
    parse_metocean_reader, parse_typical_year_csv, parse_typical_year_reader, Channel, IngestError, LoadProfile,
    MetOceanRecord, MetOceanSeries, Resolution, RowWarning, TypicalYear, DAYS_PER_MONTH, HOURS,
};
pub use resources::{
    build_generation_profile, fpv_power, owt_power, shear_extrapolate, tec_power, wec_power, DeviceSpec, FpvSpec,
    GenerationProfile, OwtSpec, ResourceError, TecSpec, Technology, WecSpec, SEA_ROUGHNESS_M,
};
