//! Semi-empirical per-cycle wear model used as ground truth, and labeled
//! sample generation from it.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{DegradationError, Result};

/// The five inputs of the wear model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegradationFeatures {
    /// Ambient temperature, °C.
    pub t_c: f64,
    pub c_rate: f64,
    pub soc: f64,
    pub dod: f64,
    pub soh: f64,
}

impl DegradationFeatures {
    pub fn to_array(&self) -> [f64; 5] {
        [self.t_c, self.c_rate, self.soc, self.dod, self.soh]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self { t_c: a[0], c_rate: a[1], soc: a[2], dod: a[3], soh: a[4] }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !self.t_c.is_finite() || !(self.c_rate >= 0.0) || !unit(self.soc) || !unit(self.dod) || !unit(self.soh) {
            return Err(DegradationError::Domain(format!("features out of range: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleParams {
    /// Fade per full-depth cycle at reference conditions.
    pub k_ref: f64,
    pub e_dod: f64,
    /// Per °C above 25 °C.
    pub k_t: f64,
    pub k_c: f64,
    pub k_soc: f64,
}

impl Default for OracleParams {
    fn default() -> Self {
        Self { k_ref: 5e-5, e_dod: 2.0, k_t: 0.035, k_c: 0.3, k_soc: 0.4 }
    }
}

/// Fraction of capacity lost in one cycle.
pub fn oracle_degradation_with(p: &OracleParams, f: &DegradationFeatures) -> Result<f64> {
    f.validate()?;
    if f.soh == 0.0 {
        return Err(DegradationError::Domain("state of health is zero".into()));
    }
    Ok(p.k_ref
        * f.dod.powf(p.e_dod)
        * (p.k_t * (f.t_c - 25.0)).exp()
        * (1.0 + p.k_c * f.c_rate)
        * (1.0 + p.k_soc * (f.soc - 0.5).abs())
        / f.soh)
}

pub fn oracle_degradation(f: &DegradationFeatures) -> Result<f64> {
    oracle_degradation_with(&OracleParams::default(), f)
}

/// Sampling interval per feature, in `[t_c, c_rate, soc, dod, soh]` order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanges(pub [(f64, f64); 5]);

impl Default for FeatureRanges {
    fn default() -> Self {
        Self([(-5.0, 40.0), (0.0, 1.0), (0.0, 1.0), (0.0, 1.0), (0.5, 1.0)])
    }
}

impl FeatureRanges {
    pub fn validate(&self) -> Result<()> {
        for (j, &(lo, hi)) in self.0.iter().enumerate() {
            let bad = !(lo <= hi) || !lo.is_finite() || !hi.is_finite();
            let unit = j >= 2 && (lo < 0.0 || hi > 1.0);
            let soh = j == 4 && lo <= 0.0;
            if bad || unit || soh || (j == 1 && lo < 0.0) {
                return Err(DegradationError::Domain(format!("feature range {j}: [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: DegradationFeatures,
    pub label: f64,
}

#[derive(Serialize, Deserialize)]
struct SampleRow {
    t_c: f64,
    c_rate: f64,
    soc: f64,
    dod: f64,
    soh: f64,
    label: f64,
}

/// `n` uniform draws from `ranges`, labeled by the oracle.
pub fn generate_training_set(ranges: &FeatureRanges, n: usize, seed: u64) -> Result<Vec<Sample>> {
    generate_training_set_with(&OracleParams::default(), ranges, n, seed)
}

pub fn generate_training_set_with(
    params: &OracleParams,
    ranges: &FeatureRanges,
    n: usize,
    seed: u64,
) -> Result<Vec<Sample>> {
    ranges.validate()?;
    if n == 0 {
        return Err(DegradationError::Domain("sample count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let a = ranges.0.map(|(lo, hi)| if lo == hi { lo } else { rng.random_range(lo..=hi) });
            let features = DegradationFeatures::from_array(a);
            Ok(Sample { features, label: oracle_degradation_with(params, &features)? })
        })
        .collect()
}

pub fn write_training_csv<W: Write>(samples: &[Sample], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for s in samples {
        let f = s.features;
        wr.serialize(SampleRow { t_c: f.t_c, c_rate: f.c_rate, soc: f.soc, dod: f.dod, soh: f.soh, label: s.label })?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_training_csv<R: Read>(r: R) -> Result<Vec<Sample>> {
    let mut rd = csv::Reader::from_reader(r);
    rd.deserialize::<SampleRow>()
        .map(|row| {
            let row = row?;
            Ok(Sample {
                features: DegradationFeatures {
                    t_c: row.t_c,
                    c_rate: row.c_rate,
                    soc: row.soc,
                    dod: row.dod,
                    soh: row.soh,
                },
                label: row.label,
            })
        })
        .collect()
}

pub fn save_training_csv(samples: &[Sample], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| DegradationError::io(path, e))?;
    write_training_csv(samples, file)
}
