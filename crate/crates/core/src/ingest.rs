//! Hourly met-ocean and load CSV parsing plus aggregation onto a
//! representative-day grid.
//!
//! Met-ocean files use the header
//! `timestamp,hs_m,te_s,current_ms,wind_ms,anemo_height_m,ghi_wm2,tamb_c`.
//! Load files are either `month,hour,load_kw` (one typical day per month)
//! or `timestamp,load_kw` (a full year of hours). Timestamps are UTC.

use std::fmt;
use std::io::Read;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Datelike, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const HOURS: usize = 24;
pub const DAYS_PER_MONTH: [u32; 12] = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed CSV in {source_name}: {source}")]
    Csv { source_name: String, source: csv::Error },
    #[error("{0} contains no data rows")]
    Empty(String),
    #[error("missing required column `{column}`")]
    MissingColumn { column: String },
    #[error("line {line}: column `{column}` has non-numeric value `{value}`")]
    BadCell { line: u64, column: String, value: String },
    #[error("line {line}: cannot parse timestamp `{value}`")]
    BadTimestamp { line: u64, value: String },
    #[error("line {line}: {message}")]
    OutOfRange { line: u64, message: String },
    #[error("unrecognised load header `{0}`; expected `month,hour,load_kw` or `timestamp,load_kw`")]
    UnknownLoadSchema(String),
    #[error("{} grid cells have no samples: {}", .missing.len(), fmt_cells(.missing))]
    Gaps { missing: Vec<(usize, usize)> },
    #[error("grid shape mismatch: {0}")]
    Shape(String),
}

fn fmt_cells(cells: &[(usize, usize)]) -> String {
    let mut s: Vec<String> = cells.iter().take(8).map(|(p, h)| format!("({},{h})", p + 1)).collect();
    if cells.len() > 8 {
        s.push("...".into());
    }
    s.join(" ")
}

pub type Result<T> = std::result::Result<T, IngestError>;

/// Time resolution of a representative year.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    /// 12 representative days, one per month, weighted by days in month.
    TypicalDay,
    /// 365 distinct days, each weighted once.
    FullYear,
}

impl Resolution {
    pub fn periods(self) -> usize {
        match self {
            Resolution::TypicalDay => 12,
            Resolution::FullYear => 365,
        }
    }

    /// Days represented by each period; sums to 365 in both modes.
    pub fn weights(self) -> Vec<f64> {
        match self {
            Resolution::TypicalDay => DAYS_PER_MONTH.iter().map(|&d| f64::from(d)).collect(),
            Resolution::FullYear => vec![1.0; 365],
        }
    }

    pub fn cells(self) -> usize {
        self.periods() * HOURS
    }

    fn period_column(self) -> &'static str {
        match self {
            Resolution::TypicalDay => "month",
            Resolution::FullYear => "day",
        }
    }

    /// Grid period of a timestamp. In full-year mode February 29 is folded
    /// onto February 28.
    pub fn period_of(self, t: &NaiveDateTime) -> usize {
        let month0 = t.month0() as usize;
        match self {
            Resolution::TypicalDay => month0,
            Resolution::FullYear => {
                let before: u32 = DAYS_PER_MONTH[..month0].iter().sum();
                let day0 = (t.day0()).min(DAYS_PER_MONTH[month0] - 1);
                (before + day0) as usize
            }
        }
    }

    /// Month (0-based) a grid period belongs to.
    pub fn month_of_period(self, p: usize) -> usize {
        match self {
            Resolution::TypicalDay => p,
            Resolution::FullYear => {
                let mut acc = 0usize;
                for (m, &d) in DAYS_PER_MONTH.iter().enumerate() {
                    acc += d as usize;
                    if p < acc {
                        return m;
                    }
                }
                11
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Channel {
    Hs,
    Te,
    Current,
    Wind,
    AnemoHeight,
    Ghi,
    Tamb,
}

impl Channel {
    pub const ALL: [Channel; 7] =
        [Channel::Hs, Channel::Te, Channel::Current, Channel::Wind, Channel::AnemoHeight, Channel::Ghi, Channel::Tamb];

    pub fn column(self) -> &'static str {
        match self {
            Channel::Hs => "hs_m",
            Channel::Te => "te_s",
            Channel::Current => "current_ms",
            Channel::Wind => "wind_ms",
            Channel::AnemoHeight => "anemo_height_m",
            Channel::Ghi => "ghi_wm2",
            Channel::Tamb => "tamb_c",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.column())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetOceanRecord {
    pub timestamp: NaiveDateTime,
    pub hs_m: f64,
    pub te_s: f64,
    pub current_ms: f64,
    pub wind_ms: f64,
    pub anemo_height_m: f64,
    pub ghi_wm2: f64,
    pub tamb_c: f64,
}

impl MetOceanRecord {
    pub fn get(&self, c: Channel) -> f64 {
        match c {
            Channel::Hs => self.hs_m,
            Channel::Te => self.te_s,
            Channel::Current => self.current_ms,
            Channel::Wind => self.wind_ms,
            Channel::AnemoHeight => self.anemo_height_m,
            Channel::Ghi => self.ghi_wm2,
            Channel::Tamb => self.tamb_c,
        }
    }

    /// Describes the first physically impossible value, if any.
    pub fn problem(&self) -> Option<String> {
        for c in Channel::ALL {
            let v = self.get(c);
            if !v.is_finite() {
                return Some(format!("{c} is not finite"));
            }
            if c != Channel::Tamb && v < 0.0 {
                return Some(format!("{c} = {v} is negative"));
            }
        }
        if self.anemo_height_m <= 0.0 {
            return Some("anemo_height_m must be positive".into());
        }
        None
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowWarning {
    pub line: u64,
    pub message: String,
}

#[derive(Clone, Debug, Default)]
pub struct MetOceanSeries {
    pub records: Vec<MetOceanRecord>,
    pub warnings: Vec<RowWarning>,
}

fn parse_timestamp(s: &str, line: u64) -> Result<NaiveDateTime> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.naive_utc());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(t);
        }
    }
    Err(IngestError::BadTimestamp { line, value: s.to_string() })
}

fn parse_f64(rec: &csv::StringRecord, idx: usize, column: &str, line: u64) -> Result<f64> {
    let raw = rec.get(idx).unwrap_or("").trim();
    raw.parse::<f64>().map_err(|_| IngestError::BadCell { line, column: column.to_string(), value: raw.to_string() })
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers.iter().position(|h| h.trim() == name).ok_or_else(|| IngestError::MissingColumn { column: name.to_string() })
}

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).flexible(false).from_reader(r)
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })
}

fn csv_err(source_name: &str) -> impl Fn(csv::Error) -> IngestError + '_ {
    move |source| IngestError::Csv { source_name: source_name.to_string(), source }
}

pub fn parse_metocean_csv(path: impl AsRef<Path>) -> Result<MetOceanSeries> {
    let path = path.as_ref();
    parse_metocean_reader(open(path)?, &path.display().to_string())
}

/// Parses met-ocean CSV text. Rows with impossible values are dropped and
/// reported in `warnings`; unparsable cells abort with the line number.
pub fn parse_metocean_reader<R: Read>(r: R, source_name: &str) -> Result<MetOceanSeries> {
    let mut rdr = csv_reader(r);
    let headers = rdr.headers().map_err(csv_err(source_name))?.clone();
    if headers.is_empty() || headers.iter().all(|h| h.trim().is_empty()) {
        return Err(IngestError::Empty(source_name.to_string()));
    }
    let ts_idx = column_index(&headers, "timestamp")?;
    let mut idx = [0usize; 7];
    for c in Channel::ALL {
        idx[c.index()] = column_index(&headers, c.column())?;
    }
    let mut series = MetOceanSeries::default();
    for row in rdr.records() {
        let row = row.map_err(csv_err(source_name))?;
        let line = row.position().map_or(0, |p| p.line());
        let timestamp = parse_timestamp(row.get(ts_idx).unwrap_or(""), line)?;
        let mut v = [0.0; 7];
        for c in Channel::ALL {
            v[c.index()] = parse_f64(&row, idx[c.index()], c.column(), line)?;
        }
        let rec = MetOceanRecord {
            timestamp,
            hs_m: v[0],
            te_s: v[1],
            current_ms: v[2],
            wind_ms: v[3],
            anemo_height_m: v[4],
            ghi_wm2: v[5],
            tamb_c: v[6],
        };
        match rec.problem() {
            Some(message) => series.warnings.push(RowWarning { line, message }),
            None => series.records.push(rec),
        }
    }
    if series.records.is_empty() && series.warnings.is_empty() {
        return Err(IngestError::Empty(source_name.to_string()));
    }
    series.records.sort_by_key(|r| r.timestamp);
    Ok(series)
}

/// Month-by-hour (or day-by-hour) averages of every met-ocean channel.
/// Channels may be absent when read from a partial CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct TypicalYear {
    pub resolution: Resolution,
    channels: [Option<Vec<f64>>; 7],
}

impl TypicalYear {
    pub fn new(resolution: Resolution) -> Self {
        Self { resolution, channels: Default::default() }
    }

    /// Sets a channel from a row-major `periods × 24` vector.
    pub fn with_channel(mut self, c: Channel, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.resolution.cells() {
            return Err(IngestError::Shape(format!(
                "channel {c} has {} values, expected {}",
                values.len(),
                self.resolution.cells()
            )));
        }
        self.channels[c.index()] = Some(values);
        Ok(self)
    }

    /// Every channel set to a constant.
    pub fn constant(resolution: Resolution, values: &[(Channel, f64)]) -> Self {
        let mut ty = Self::new(resolution);
        for &(c, v) in values {
            ty.channels[c.index()] = Some(vec![v; resolution.cells()]);
        }
        ty
    }

    pub fn periods(&self) -> usize {
        self.resolution.periods()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.resolution.weights()
    }

    pub fn channel(&self, c: Channel) -> Option<&[f64]> {
        self.channels[c.index()].as_deref()
    }

    pub fn has(&self, c: Channel) -> bool {
        self.channels[c.index()].is_some()
    }

    pub fn value(&self, c: Channel, period: usize, hour: usize) -> Option<f64> {
        self.channel(c).map(|v| v[period * HOURS + hour])
    }

    pub fn present_channels(&self) -> Vec<Channel> {
        Channel::ALL.into_iter().filter(|&c| self.has(c)).collect()
    }

    pub fn to_csv_string(&self) -> String {
        let chans = self.present_channels();
        let mut out = String::new();
        out.push_str(self.resolution.period_column());
        out.push_str(",hour");
        for c in &chans {
            out.push(',');
            out.push_str(c.column());
        }
        out.push('\n');
        for p in 0..self.periods() {
            for h in 0..HOURS {
                out.push_str(&format!("{},{h}", p + 1));
                for &c in &chans {
                    // Display for f64 is the shortest exact round-trip form
                    out.push_str(&format!(",{}", self.value(c, p, h).unwrap()));
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string())
            .map_err(|source| IngestError::Io { path: path.to_path_buf(), source })
    }
}

pub fn parse_typical_year_csv(path: impl AsRef<Path>) -> Result<TypicalYear> {
    let path = path.as_ref();
    parse_typical_year_reader(open(path)?, &path.display().to_string())
}

/// Reads the CSV written by [`TypicalYear::to_csv_string`]. The first
/// column (`month` or `day`) selects the resolution.
pub fn parse_typical_year_reader<R: Read>(r: R, source_name: &str) -> Result<TypicalYear> {
    let mut rdr = csv_reader(r);
    let headers = rdr.headers().map_err(csv_err(source_name))?.clone();
    let resolution = match headers.get(0).map(str::trim) {
        Some("month") => Resolution::TypicalDay,
        Some("day") => Resolution::FullYear,
        Some("") | None => return Err(IngestError::Empty(source_name.to_string())),
        Some(_) => return Err(IngestError::MissingColumn { column: "month".into() }),
    };
    let hour_idx = column_index(&headers, "hour")?;
    let chans: Vec<(Channel, usize)> = Channel::ALL
        .into_iter()
        .filter_map(|c| headers.iter().position(|h| h.trim() == c.column()).map(|i| (c, i)))
        .collect();
    let cells = resolution.cells();
    let mut data: Vec<Vec<f64>> = vec![vec![f64::NAN; cells]; chans.len()];
    let mut seen = vec![false; cells];
    let mut rows = 0usize;
    for row in rdr.records() {
        let row = row.map_err(csv_err(source_name))?;
        rows += 1;
        let line = row.position().map_or(0, |p| p.line());
        let (p, h) = grid_cell(&row, 0, hour_idx, resolution, line)?;
        seen[p * HOURS + h] = true;
        for (k, &(c, i)) in chans.iter().enumerate() {
            data[k][p * HOURS + h] = parse_f64(&row, i, c.column(), line)?;
        }
    }
    if rows == 0 {
        return Err(IngestError::Empty(source_name.to_string()));
    }
    check_gaps(&seen)?;
    let mut ty = TypicalYear::new(resolution);
    for ((c, _), v) in chans.into_iter().zip(data) {
        ty.channels[c.index()] = Some(v);
    }
    Ok(ty)
}

fn grid_cell(
    row: &csv::StringRecord,
    period_idx: usize,
    hour_idx: usize,
    resolution: Resolution,
    line: u64,
) -> Result<(usize, usize)> {
    let period_name = resolution.period_column();
    let p = parse_f64(row, period_idx, period_name, line)?;
    let h = parse_f64(row, hour_idx, "hour", line)?;
    let np = resolution.periods() as f64;
    if p.fract() != 0.0 || p < 1.0 || p > np {
        return Err(IngestError::OutOfRange { line, message: format!("{period_name} {p} outside 1..={np}") });
    }
    if h.fract() != 0.0 || !(0.0..24.0).contains(&h) {
        return Err(IngestError::OutOfRange { line, message: format!("hour {h} outside 0..=23") });
    }
    Ok((p as usize - 1, h as usize))
}

fn check_gaps(seen: &[bool]) -> Result<()> {
    let missing: Vec<(usize, usize)> =
        seen.iter().enumerate().filter(|(_, &s)| !s).map(|(i, _)| (i / HOURS, i % HOURS)).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(IngestError::Gaps { missing })
    }
}

/// Pooled arithmetic mean of every record falling in each grid cell.
pub fn aggregate(series: &MetOceanSeries, resolution: Resolution) -> Result<TypicalYear> {
    let cells = resolution.cells();
    let mut sums = vec![[0.0f64; 7]; cells];
    let mut counts = vec![0u32; cells];
    for r in &series.records {
        let cell = resolution.period_of(&r.timestamp) * HOURS + r.timestamp.hour() as usize;
        counts[cell] += 1;
        for c in Channel::ALL {
            sums[cell][c.index()] += r.get(c);
        }
    }
    let seen: Vec<bool> = counts.iter().map(|&n| n > 0).collect();
    check_gaps(&seen)?;
    let mut ty = TypicalYear::new(resolution);
    for c in Channel::ALL {
        let v = sums.iter().zip(&counts).map(|(s, &n)| s[c.index()] / f64::from(n)).collect();
        ty.channels[c.index()] = Some(v);
    }
    Ok(ty)
}

/// Month × hour means: the 12 × 24 typical-day grid.
pub fn aggregate_typical_days(series: &MetOceanSeries) -> Result<TypicalYear> {
    aggregate(series, Resolution::TypicalDay)
}

/// Day-of-year × hour means over a 365-day grid.
pub fn aggregate_full_year(series: &MetOceanSeries) -> Result<TypicalYear> {
    aggregate(series, Resolution::FullYear)
}

/// Electrical demand on the same grid as a [`TypicalYear`].
#[derive(Clone, Debug, PartialEq)]
pub struct LoadProfile {
    pub resolution: Resolution,
    /// Row-major `periods × 24`, kW.
    pub demand: Vec<f64>,
    pub warnings: Vec<RowWarning>,
}

impl LoadProfile {
    pub fn new(resolution: Resolution, demand: Vec<f64>) -> Result<Self> {
        if demand.len() != resolution.cells() {
            return Err(IngestError::Shape(format!(
                "load has {} values, expected {}",
                demand.len(),
                resolution.cells()
            )));
        }
        if let Some(v) = demand.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(IngestError::OutOfRange {
                line: 0,
                message: format!("demand {v} must be finite and non-negative"),
            });
        }
        Ok(Self { resolution, demand, warnings: Vec::new() })
    }

    pub fn constant(resolution: Resolution, kw: f64) -> Result<Self> {
        Self::new(resolution, vec![kw; resolution.cells()])
    }

    pub fn at(&self, period: usize, hour: usize) -> f64 {
        self.demand[period * HOURS + hour]
    }

    pub fn peak(&self) -> f64 {
        self.demand.iter().copied().fold(0.0, f64::max)
    }

    /// Largest single-day energy over the represented days, kWh.
    pub fn max_daily_energy(&self) -> f64 {
        self.demand.chunks(HOURS).map(|d| d.iter().sum::<f64>()).fold(0.0, f64::max)
    }

    /// Annual energy with each period weighted by the days it represents.
    pub fn annual_energy(&self) -> f64 {
        let w = self.resolution.weights();
        self.demand.chunks(HOURS).zip(&w).map(|(d, w)| w * d.iter().sum::<f64>()).sum()
    }

    /// Copy with every value multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self { resolution: self.resolution, demand: self.demand.iter().map(|v| v * k).collect(), warnings: Vec::new() }
    }
}

pub fn parse_load_csv(path: impl AsRef<Path>) -> Result<LoadProfile> {
    let path = path.as_ref();
    parse_load_reader(open(path)?, &path.display().to_string())
}

/// Parses a load file (`month,hour,load_kw`, `day,hour,load_kw`, or
/// `timestamp,load_kw`). Negative or non-finite demand rows are dropped with
/// a warning. Several rows for one cell (including a folded February 29)
/// are averaged.
pub fn parse_load_reader<R: Read>(r: R, source_name: &str) -> Result<LoadProfile> {
    let mut rdr = csv_reader(r);
    let headers = rdr.headers().map_err(csv_err(source_name))?.clone();
    let names: Vec<&str> = headers.iter().map(str::trim).collect();
    if names.iter().all(|n| n.is_empty()) {
        return Err(IngestError::Empty(source_name.to_string()));
    }
    let (resolution, timestamped) = if names.contains(&"month") && names.contains(&"hour") {
        (Resolution::TypicalDay, false)
    } else if names.contains(&"day") && names.contains(&"hour") {
        (Resolution::FullYear, false)
    } else if names.contains(&"timestamp") {
        (Resolution::FullYear, true)
    } else {
        return Err(IngestError::UnknownLoadSchema(names.join(",")));
    };
    let load_idx = column_index(&headers, "load_kw")?;
    let cells = resolution.cells();
    let mut sums = vec![0.0; cells];
    let mut counts = vec![0u32; cells];
    let mut warnings = Vec::new();
    let mut rows = 0usize;
    let (a_idx, b_idx) = if timestamped {
        (column_index(&headers, "timestamp")?, 0)
    } else {
        (column_index(&headers, resolution.period_column())?, column_index(&headers, "hour")?)
    };
    for row in rdr.records() {
        let row = row.map_err(csv_err(source_name))?;
        rows += 1;
        let line = row.position().map_or(0, |p| p.line());
        let cell = if timestamped {
            let t = parse_timestamp(row.get(a_idx).unwrap_or(""), line)?;
            resolution.period_of(&t) * HOURS + t.hour() as usize
        } else {
            let (p, h) = grid_cell(&row, a_idx, b_idx, resolution, line)?;
            p * HOURS + h
        };
        let kw = parse_f64(&row, load_idx, "load_kw", line)?;
        if !kw.is_finite() || kw < 0.0 {
            warnings.push(RowWarning { line, message: format!("load_kw = {kw} rejected") });
            continue;
        }
        sums[cell] += kw;
        counts[cell] += 1;
    }
    if rows == 0 {
        return Err(IngestError::Empty(source_name.to_string()));
    }
    let seen: Vec<bool> = counts.iter().map(|&n| n > 0).collect();
    check_gaps(&seen)?;
    let demand = sums.iter().zip(&counts).map(|(s, &n)| s / f64::from(n)).collect();
    Ok(LoadProfile { resolution, demand, warnings })
}

impl LoadProfile {
    /// `month,hour,load_kw` or `day,hour,load_kw` text.
    pub fn to_csv_string(&self) -> String {
        let mut out = format!("{},hour,load_kw\n", self.resolution.period_column());
        for p in 0..self.resolution.periods() {
            for h in 0..HOURS {
                out.push_str(&format!("{},{h},{}\n", p + 1, self.at(p, h)));
            }
        }
        out
    }
}
