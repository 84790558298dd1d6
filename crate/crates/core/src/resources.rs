//! Per-unit electrical output of wave, tidal, wind, and floating-PV devices
//! from met-ocean conditions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Channel, TypicalYear, HOURS};

/// Betz limit on the power coefficient.
pub const BETZ: f64 = 16.0 / 27.0;
/// Roughness length of open sea, m.
pub const SEA_ROUGHNESS_M: f64 = 0.0002;

#[derive(Debug, Error, PartialEq)]
pub enum ResourceError {
    #[error("invalid {device} spec: {message}")]
    InvalidSpec { device: &'static str, message: String },
    #[error("shear extrapolation needs heights above the roughness length (h1={h1}, h2={h2}, z0={z0})")]
    ShearDomain { h1: f64, h2: f64, z0: f64 },
    #[error("{device} needs met-ocean channel `{channel}`, which is missing")]
    MissingChannel { device: &'static str, channel: Channel },
}

pub type Result<T> = std::result::Result<T, ResourceError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Technology {
    #[serde(rename = "WEC")]
    Wec,
    #[serde(rename = "TEC")]
    Tec,
    #[serde(rename = "OWT")]
    Owt,
    #[serde(rename = "FPV")]
    Fpv,
}

impl Technology {
    pub const ALL: [Technology; 4] = [Technology::Wec, Technology::Tec, Technology::Owt, Technology::Fpv];

    pub fn tag(self) -> &'static str {
        match self {
            Technology::Wec => "WEC",
            Technology::Tec => "TEC",
            Technology::Owt => "OWT",
            Technology::Fpv => "FPV",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.tag().eq_ignore_ascii_case(s))
    }
}

impl std::fmt::Display for Technology {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Wave converter described by a power matrix over (Hs, Te) bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WecSpec {
    pub rated_kw: f64,
    /// Significant wave height bin edges, m.
    pub hs_edges: Vec<f64>,
    /// Energy period bin edges, s.
    pub te_edges: Vec<f64>,
    /// `matrix[i][j]` is the output in Hs bin `i` and Te bin `j`, kW.
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TecSpec {
    pub rated_kw: f64,
    pub water_density: f64,
    pub rotor_area_m2: f64,
    pub power_coefficient: f64,
    pub electrical_efficiency: f64,
    pub cut_in_ms: f64,
    pub cut_out_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OwtSpec {
    pub rated_kw: f64,
    pub air_density: f64,
    pub rotor_area_m2: f64,
    pub power_coefficient: f64,
    pub electrical_efficiency: f64,
    pub hub_height_m: f64,
    #[serde(default = "default_roughness")]
    pub roughness_length_m: f64,
    pub cut_in_ms: f64,
    pub cut_out_ms: f64,
}

fn default_roughness() -> f64 {
    SEA_ROUGHNESS_M
}

/// Floating PV array: irradiance scaled output with a linear cell
/// temperature derate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FpvSpec {
    /// Output at 1000 W/m² and 25 °C cell temperature, kW.
    pub rated_kw: f64,
    /// Power change per °C of cell temperature above 25 °C (negative).
    #[serde(default = "default_gamma")]
    pub temperature_coefficient: f64,
    #[serde(default = "default_derate")]
    pub system_derate: f64,
    /// Cell temperature rise per W/m² of irradiance, °C·m²/W.
    #[serde(default = "default_kth")]
    pub thermal_coefficient: f64,
}

fn default_gamma() -> f64 {
    -0.004
}
fn default_derate() -> f64 {
    0.9
}
fn default_kth() -> f64 {
    0.025
}

impl FpvSpec {
    pub fn with_defaults(rated_kw: f64) -> Self {
        Self {
            rated_kw,
            temperature_coefficient: default_gamma(),
            system_derate: default_derate(),
            thermal_coefficient: default_kth(),
        }
    }
}

fn invalid(device: &'static str, message: impl Into<String>) -> ResourceError {
    ResourceError::InvalidSpec { device, message: message.into() }
}

fn check_rated(device: &'static str, rated: f64) -> Result<()> {
    if rated.is_finite() && rated > 0.0 {
        Ok(())
    } else {
        Err(invalid(device, format!("rated power {rated} must be positive")))
    }
}

fn check_rotor(device: &'static str, rho: f64, area: f64, cp: f64, eta: f64, cut_in: f64, cut_out: f64) -> Result<()> {
    if !(rho > 0.0) {
        return Err(invalid(device, "fluid density must be positive"));
    }
    if !(area > 0.0) {
        return Err(invalid(device, "rotor area must be positive"));
    }
    if !(cp > 0.0 && cp < BETZ) {
        return Err(invalid(device, format!("power coefficient {cp} outside (0, Betz limit)")));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(invalid(device, format!("efficiency {eta} outside (0, 1]")));
    }
    if !(cut_in >= 0.0 && cut_out > cut_in) {
        return Err(invalid(device, format!("cut-in {cut_in} / cut-out {cut_out} out of order")));
    }
    Ok(())
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.len() >= 2 && v.iter().all(|x| x.is_finite()) && v.windows(2).all(|w| w[0] < w[1])
}

impl WecSpec {
    pub fn validate(&self) -> Result<()> {
        check_rated("WEC", self.rated_kw)?;
        if !strictly_increasing(&self.hs_edges) || !strictly_increasing(&self.te_edges) {
            return Err(invalid("WEC", "bin edges must be finite and strictly increasing"));
        }
        if self.matrix.len() != self.hs_edges.len() - 1
            || self.matrix.iter().any(|row| row.len() != self.te_edges.len() - 1)
        {
            return Err(invalid("WEC", "power matrix shape does not match the bin edges"));
        }
        if self.matrix.iter().flatten().any(|&p| !(0.0..=self.rated_kw).contains(&p)) {
            return Err(invalid("WEC", "power matrix entries must lie in [0, rated]"));
        }
        Ok(())
    }
}

impl TecSpec {
    pub fn validate(&self) -> Result<()> {
        check_rated("TEC", self.rated_kw)?;
        check_rotor(
            "TEC",
            self.water_density,
            self.rotor_area_m2,
            self.power_coefficient,
            self.electrical_efficiency,
            self.cut_in_ms,
            self.cut_out_ms,
        )
    }
}

impl OwtSpec {
    pub fn validate(&self) -> Result<()> {
        check_rated("OWT", self.rated_kw)?;
        check_rotor(
            "OWT",
            self.air_density,
            self.rotor_area_m2,
            self.power_coefficient,
            self.electrical_efficiency,
            self.cut_in_ms,
            self.cut_out_ms,
        )?;
        if !(self.roughness_length_m > 0.0 && self.hub_height_m > self.roughness_length_m) {
            return Err(invalid("OWT", "hub height must exceed a positive roughness length"));
        }
        Ok(())
    }
}

impl FpvSpec {
    pub fn validate(&self) -> Result<()> {
        check_rated("FPV", self.rated_kw)?;
        if !(self.system_derate > 0.0 && self.system_derate <= 1.0) {
            return Err(invalid("FPV", format!("system derate {} outside (0, 1]", self.system_derate)));
        }
        if !(-0.01..=0.0).contains(&self.temperature_coefficient) {
            return Err(invalid(
                "FPV",
                format!("temperature coefficient {} outside [-0.01, 0]", self.temperature_coefficient),
            ));
        }
        if !(self.thermal_coefficient >= 0.0) {
            return Err(invalid("FPV", "thermal coefficient must be non-negative"));
        }
        Ok(())
    }
}

fn bin_index(edges: &[f64], x: f64) -> Option<usize> {
    if x < edges[0] || x >= edges[edges.len() - 1] {
        return None;
    }
    // last edge <= x
    Some(edges.partition_point(|&e| e <= x) - 1)
}

/// Matrix lookup with bins closed below and open above. Sea states outside
/// the table produce nothing.
pub fn wec_power(spec: &WecSpec, hs: f64, te: f64) -> f64 {
    match (bin_index(&spec.hs_edges, hs), bin_index(&spec.te_edges, te)) {
        (Some(i), Some(j)) => spec.matrix[i][j],
        _ => 0.0,
    }
}

fn cubic_rotor(rho: f64, area: f64, v: f64, cp: f64, eta: f64) -> f64 {
    0.5 * rho * area * v.powi(3) * cp * eta / 1000.0
}

/// Tidal converter output, kW, for current speed `v` (m/s).
pub fn tec_power(spec: &TecSpec, v: f64) -> f64 {
    if v < spec.cut_in_ms || v > spec.cut_out_ms {
        return 0.0;
    }
    cubic_rotor(spec.water_density, spec.rotor_area_m2, v, spec.power_coefficient, spec.electrical_efficiency)
        .min(spec.rated_kw)
}

/// Logarithmic wind profile from anemometer height `h1` to `h2`.
pub fn shear_extrapolate(v_h1: f64, h1: f64, h2: f64, z0: f64) -> Result<f64> {
    if !(z0 > 0.0 && h1 > z0 && h2 > z0) {
        return Err(ResourceError::ShearDomain { h1, h2, z0 });
    }
    Ok(v_h1 * (h2 / z0).ln() / (h1 / z0).ln())
}

/// Wind turbine output, kW, for hub-height wind speed `v_hub` (m/s).
pub fn owt_power(spec: &OwtSpec, v_hub: f64) -> f64 {
    if v_hub < spec.cut_in_ms || v_hub > spec.cut_out_ms {
        return 0.0;
    }
    cubic_rotor(spec.air_density, spec.rotor_area_m2, v_hub, spec.power_coefficient, spec.electrical_efficiency)
        .min(spec.rated_kw)
}

/// Floating PV output, kW, for global irradiance `ghi` (W/m²) and ambient
/// temperature `t_amb` (°C).
pub fn fpv_power(spec: &FpvSpec, ghi: f64, t_amb: f64) -> f64 {
    let cell = t_amb + spec.thermal_coefficient * ghi;
    let p = spec.rated_kw * (ghi / 1000.0) * (1.0 + spec.temperature_coefficient * (cell - 25.0)) * spec.system_derate;
    p.clamp(0.0, spec.rated_kw)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "technology")]
pub enum DeviceSpec {
    #[serde(rename = "WEC")]
    Wec(WecSpec),
    #[serde(rename = "TEC")]
    Tec(TecSpec),
    #[serde(rename = "OWT")]
    Owt(OwtSpec),
    #[serde(rename = "FPV")]
    Fpv(FpvSpec),
}

impl DeviceSpec {
    pub fn technology(&self) -> Technology {
        match self {
            DeviceSpec::Wec(_) => Technology::Wec,
            DeviceSpec::Tec(_) => Technology::Tec,
            DeviceSpec::Owt(_) => Technology::Owt,
            DeviceSpec::Fpv(_) => Technology::Fpv,
        }
    }

    pub fn rated_kw(&self) -> f64 {
        match self {
            DeviceSpec::Wec(s) => s.rated_kw,
            DeviceSpec::Tec(s) => s.rated_kw,
            DeviceSpec::Owt(s) => s.rated_kw,
            DeviceSpec::Fpv(s) => s.rated_kw,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DeviceSpec::Wec(s) => s.validate(),
            DeviceSpec::Tec(s) => s.validate(),
            DeviceSpec::Owt(s) => s.validate(),
            DeviceSpec::Fpv(s) => s.validate(),
        }
    }

    pub fn required_channels(&self) -> &'static [Channel] {
        match self {
            DeviceSpec::Wec(_) => &[Channel::Hs, Channel::Te],
            DeviceSpec::Tec(_) => &[Channel::Current],
            DeviceSpec::Owt(_) => &[Channel::Wind, Channel::AnemoHeight],
            DeviceSpec::Fpv(_) => &[Channel::Ghi, Channel::Tamb],
        }
    }
}

/// Hourly output of one device over a representative year.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationProfile {
    pub rated_kw: f64,
    /// Row-major `periods × 24`, kW.
    pub per_unit_kw: Vec<f64>,
    /// Day weight of each period (days represented).
    pub weights: Vec<f64>,
    pub annual_energy_kwh: f64,
    pub capacity_factor: f64,
}

impl GenerationProfile {
    /// Builds a profile from raw hourly values and period weights.
    pub fn from_values(rated_kw: f64, per_unit_kw: Vec<f64>, weights: Vec<f64>) -> Self {
        let annual_energy_kwh: f64 =
            per_unit_kw.chunks(HOURS).zip(&weights).map(|(day, w)| w * day.iter().sum::<f64>()).sum();
        let hours: f64 = weights.iter().sum::<f64>() * HOURS as f64;
        let capacity_factor = if rated_kw > 0.0 && hours > 0.0 { annual_energy_kwh / (rated_kw * hours) } else { 0.0 };
        Self { rated_kw, per_unit_kw, weights, annual_energy_kwh, capacity_factor }
    }

    pub fn at(&self, period: usize, hour: usize) -> f64 {
        self.per_unit_kw[period * HOURS + hour]
    }

    pub fn periods(&self) -> usize {
        self.weights.len()
    }
}

/// Applies the device's power model to every grid cell of `ty`.
pub fn build_generation_profile(spec: &DeviceSpec, ty: &TypicalYear) -> Result<GenerationProfile> {
    spec.validate()?;
    let device = spec.technology().tag();
    let chan = |c: Channel| ty.channel(c).ok_or(ResourceError::MissingChannel { device, channel: c });
    let values: Vec<f64> = match spec {
        DeviceSpec::Wec(s) => {
            let (hs, te) = (chan(Channel::Hs)?, chan(Channel::Te)?);
            hs.iter().zip(te).map(|(&h, &t)| wec_power(s, h, t)).collect()
        }
        DeviceSpec::Tec(s) => chan(Channel::Current)?.iter().map(|&v| tec_power(s, v)).collect(),
        DeviceSpec::Owt(s) => {
            let (wind, h1) = (chan(Channel::Wind)?, chan(Channel::AnemoHeight)?);
            wind.iter()
                .zip(h1)
                .map(|(&v, &h)| {
                    shear_extrapolate(v, h, s.hub_height_m, s.roughness_length_m).map(|vh| owt_power(s, vh))
                })
                .collect::<Result<_>>()?
        }
        DeviceSpec::Fpv(s) => {
            let (ghi, tamb) = (chan(Channel::Ghi)?, chan(Channel::Tamb)?);
            ghi.iter().zip(tamb).map(|(&g, &t)| fpv_power(s, g, t)).collect()
        }
    };
    Ok(GenerationProfile::from_values(spec.rated_kw(), values, ty.weights()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tec() -> TecSpec {
        TecSpec {
            rated_kw: 600.0,
            water_density: 1025.0,
            rotor_area_m2: 314.16,
            power_coefficient: 0.4,
            electrical_efficiency: 0.95,
            cut_in_ms: 0.5,
            cut_out_ms: 12.0,
        }
    }

    fn owt() -> OwtSpec {
        OwtSpec {
            rated_kw: 8000.0,
            air_density: 1.225,
            rotor_area_m2: 21124.0,
            power_coefficient: 0.45,
            electrical_efficiency: 0.95,
            hub_height_m: 80.0,
            roughness_length_m: SEA_ROUGHNESS_M,
            cut_in_ms: 3.0,
            cut_out_ms: 25.0,
        }
    }

    fn wec() -> WecSpec {
        WecSpec {
            rated_kw: 750.0,
            hs_edges: vec![0.5, 1.5, 2.5, 3.5],
            te_edges: vec![5.0, 7.0, 9.0],
            matrix: vec![vec![20.0, 35.0], vec![110.0, 225.0], vec![300.0, 410.0]],
        }
    }

    #[test]
    fn tec_fixture_matches_hand_value() {
        let hand = 0.5 * 1025.0 * 314.16 * 8.0 * 0.4 * 0.95 / 1000.0;
        assert!((tec_power(&tec(), 2.0) - hand).abs() < 1e-12);
        assert!((tec_power(&tec(), 2.0) - 489.46).abs() < 0.01);
        assert_eq!(tec_power(&tec(), 0.0), 0.0);
        // unclipped cubic at 10 m/s would be ~61 MW
        assert!(0.5 * 1025.0 * 314.16 * 1000.0 * 0.4 * 0.95 / 1000.0 > 600.0);
        assert_eq!(tec_power(&tec(), 10.0), 600.0);
    }

    #[test]
    fn owt_fixture_and_envelope() {
        let hand = 0.5 * 1.225 * 21124.0 * 1000.0 * 0.45 * 0.95 / 1000.0;
        assert!((owt_power(&owt(), 10.0) - hand).abs() < 1e-9);
        assert!((hand - 5531.0).abs() < 0.5);
        assert_eq!(owt_power(&owt(), 2.0), 0.0);
        assert_eq!(owt_power(&owt(), 30.0), 0.0);
    }

    #[test]
    fn shear_cases() {
        let v = shear_extrapolate(10.0, 10.0, 80.0, SEA_ROUGHNESS_M).unwrap();
        let hand = 10.0 * (80.0f64 / 0.0002).ln() / (10.0f64 / 0.0002).ln();
        assert!((v - hand).abs() < 1e-12);
        assert!((v - 11.9218).abs() < 1e-3);
        assert_eq!(shear_extrapolate(7.5, 30.0, 30.0, 0.0002).unwrap(), 7.5);
        assert_eq!(shear_extrapolate(0.0, 10.0, 80.0, 0.0002).unwrap(), 0.0);
        assert!(shear_extrapolate(5.0, 0.0001, 80.0, 0.0002).is_err());
    }

    #[test]
    fn wec_lookup() {
        let s = wec();
        s.validate().unwrap();
        assert_eq!(wec_power(&s, 0.0, 8.0), 0.0);
        assert_eq!(wec_power(&s, 2.0, 8.0), 225.0);
        assert_eq!(wec_power(&s, 1.5, 7.0), 225.0);
        assert_eq!(wec_power(&s, 3.5, 8.0), 0.0);
        assert_eq!(wec_power(&s, 9.0, 8.0), 0.0);
        assert_eq!(wec_power(&s, 2.0, 4.0), 0.0);
    }

    #[test]
    fn fpv_cases() {
        let s = FpvSpec {
            rated_kw: 280.0,
            temperature_coefficient: -0.004,
            system_derate: 0.9,
            thermal_coefficient: 0.025,
        };
        assert_eq!(fpv_power(&s, 0.0, 20.0), 0.0);
        assert!((fpv_power(&s, 1000.0, 25.0) - 226.8).abs() < 1e-9);
        let ideal =
            FpvSpec { rated_kw: 280.0, temperature_coefficient: 0.0, system_derate: 1.0, thermal_coefficient: 0.0 };
        assert_eq!(fpv_power(&ideal, 1000.0, 25.0), 280.0);
    }

    #[test]
    fn spec_validation_rejects_betz_violation() {
        let mut s = tec();
        s.power_coefficient = 0.6;
        assert!(s.validate().is_err());
        let mut o = owt();
        o.electrical_efficiency = 1.2;
        assert!(o.validate().is_err());
    }
}
