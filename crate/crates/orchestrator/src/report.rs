//! Report files: a full JSON dump plus small CSV tables.

use std::path::{Path, PathBuf};

use orem_core::lcoe_report_csv;
use serde::Serialize;

use crate::heuristic::RunReport;
use crate::sweep::SweepTable;
use crate::{OrchestratorError, Result};

pub enum Report<'a> {
    Run(&'a RunReport),
    Sweep(&'a SweepTable),
}

impl<'a> From<&'a RunReport> for Report<'a> {
    fn from(r: &'a RunReport) -> Self {
        Report::Run(r)
    }
}

impl<'a> From<&'a SweepTable> for Report<'a> {
    fn from(t: &'a SweepTable) -> Self {
        Report::Sweep(t)
    }
}

/// Writes `solution.json` and `fleet.csv`, plus `iterations.csv`, `soh.csv`
/// and (when screened) `lcoe.csv` for a run, or `sweep.csv` for a sweep.
/// Returns the written paths. Output depends only on the report.
pub fn emit_report<'a>(report: impl Into<Report<'a>>, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| OrchestratorError::io(dir, e))?;
    let mut files = Vec::new();
    let mut put = |name: &str, text: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| OrchestratorError::io(&path, e))?;
        files.push(path);
        Ok(())
    };
    match report.into() {
        Report::Run(r) => {
            put("solution.json", json(r))?;
            put("fleet.csv", run_fleet_csv(r)?)?;
            put("iterations.csv", iterations_csv(r)?)?;
            put("soh.csv", soh_csv(r)?)?;
            if !r.lcoe.is_empty() {
                put("lcoe.csv", lcoe_report_csv(&r.lcoe))?;
            }
        }
        Report::Sweep(t) => {
            put("solution.json", json(t))?;
            put("fleet.csv", sweep_fleet_csv(t)?)?;
            put("sweep.csv", sweep_csv(t)?)?;
        }
    }
    Ok(files)
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| OrchestratorError::Input(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Asset rows by scenario columns.
fn run_fleet_csv(r: &RunReport) -> Result<String> {
    let sol = &r.selected().solution;
    let mut rows: Vec<Vec<String>> = sol.units.iter().map(|u| vec![u.name.clone(), u.count.to_string()]).collect();
    rows.push(vec!["BESS units".into(), sol.bess_units.to_string()]);
    rows.push(vec!["BESS kWh".into(), sol.bess_energy_kwh.to_string()]);
    table(&["asset", &r.scenario], rows)
}

fn sweep_fleet_csv(t: &SweepTable) -> Result<String> {
    let names: Vec<String> =
        t.rows.iter().flat_map(|r| r.units.iter().map(|u| u.name.clone())).fold(Vec::new(), |mut acc, n| {
            if !acc.contains(&n) {
                acc.push(n);
            }
            acc
        });
    let header: Vec<String> =
        std::iter::once("asset".to_string()).chain(t.rows.iter().map(|r| format!("x{}", r.multiplier))).collect();
    let count =
        |r: &crate::sweep::SweepRow, n: &str| r.units.iter().find(|u| u.name == n).map_or(0, |u| u.count).to_string();
    let mut rows: Vec<Vec<String>> =
        names.iter().map(|n| std::iter::once(n.clone()).chain(t.rows.iter().map(|r| count(r, n))).collect()).collect();
    rows.push(
        std::iter::once("BESS units".to_string()).chain(t.rows.iter().map(|r| r.bess_units.to_string())).collect(),
    );
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    table(&header, rows)
}

fn iterations_csv(r: &RunReport) -> Result<String> {
    let rows = r.iterations.iter().enumerate().map(|(i, it)| {
        vec![
            it.iteration.to_string(),
            it.constraints.map_or(1.0, |c| c.power_factor()).to_string(),
            opt(it.constraints.map(|c| c.throughput_limit())),
            it.throughput_kwh.to_string(),
            it.lifetime_cost.to_string(),
            it.degradation_cost.to_string(),
            it.total_cost.to_string(),
            it.soh_by_year.last().copied().unwrap_or(1.0).to_string(),
            it.solution.bess_units.to_string(),
            (i == r.selected).to_string(),
        ]
    });
    table(
        &[
            "iteration",
            "power_factor",
            "throughput_limit_kwh",
            "throughput_kwh",
            "lifetime_cost",
            "degradation_cost",
            "total_cost",
            "final_soh",
            "bess_units",
            "selected",
        ],
        rows,
    )
}

fn soh_csv(r: &RunReport) -> Result<String> {
    let rows = r.iterations.iter().flat_map(|it| {
        it.soh_by_year
            .iter()
            .enumerate()
            .map(move |(y, s)| vec![it.iteration.to_string(), y.to_string(), s.to_string()])
    });
    table(&["iteration", "year", "soh"], rows)
}

fn sweep_csv(t: &SweepTable) -> Result<String> {
    let rows = t.rows.iter().map(|r| {
        vec![
            t.technology.to_string(),
            r.multiplier.to_string(),
            r.feasible.to_string(),
            opt(r.total_cost),
            opt(r.lifetime_cost),
            opt(r.degradation_cost),
            r.swept_units.to_string(),
            r.bess_units.to_string(),
            r.carried_over.to_string(),
            (Some(r.multiplier) == t.entry_multiplier).to_string(),
        ]
    });
    table(
        &[
            "technology",
            "multiplier",
            "feasible",
            "total_cost",
            "lifetime_cost",
            "degradation_cost",
            "swept_units",
            "bess_units",
            "carried_over",
            "entry",
        ],
        rows,
    )
}
