use std::path::Path;
use std::process::Command;

use orem_core::{
    Channel, CostQuad, DeviceSpec, FpvSpec, GenerationProfile, LoadProfile, OwtSpec, Resolution, ResourceCandidate,
    Technology, TypicalYear,
};
use orem_orchestrator::{
    emit_report, fit_load, run_remo, sensitivity_sweep, EvaluatorKind, HeuristicConfig, OrchestratorError, RunReport,
    Scenario, StopReason, VariantChoice,
};

fn owt(rated: f64) -> DeviceSpec {
    DeviceSpec::Owt(OwtSpec {
        rated_kw: rated,
        air_density: 1.225,
        rotor_area_m2: 1000.0,
        power_coefficient: 0.45,
        electrical_efficiency: 0.95,
        hub_height_m: 100.0,
        roughness_length_m: 0.0002,
        cut_in_ms: 3.0,
        cut_out_ms: 25.0,
    })
}

/// Wind that fades in summer plus a solar array, for a 5 MW flat load.
fn small_scenario(load_kw: f64) -> Scenario {
    let w = Resolution::TypicalDay.weights();
    let wind: Vec<f64> = (0..288)
        .map(|k| {
            let (m, h) = ((k / 24) as f64, (k % 24) as f64);
            2000.0 * (0.65 + 0.2 * (m * 0.52).cos() + 0.15 * (h * 0.4).sin()).clamp(0.0, 1.0)
        })
        .collect();
    let sun: Vec<f64> = (0..288)
        .map(|k| {
            let h = (k % 24) as f64;
            if (6.0..=18.0).contains(&h) {
                800.0 * ((h - 6.0) / 12.0 * std::f64::consts::PI).sin()
            } else {
                0.0
            }
        })
        .collect();
    let cands = vec![
        ResourceCandidate::new(
            "wind",
            owt(2000.0),
            CostQuad::new(0.0, 4.0e6, 0.0, 0.0),
            GenerationProfile::from_values(2000.0, wind, w.clone()),
        ),
        ResourceCandidate::new(
            "pv",
            DeviceSpec::Fpv(FpvSpec::with_defaults(1000.0)),
            CostQuad::new(0.0, 0.9e6, 0.0, 0.0),
            GenerationProfile::from_values(1000.0, sun, w),
        ),
    ];
    let ty = TypicalYear::constant(Resolution::TypicalDay, &[(Channel::Tamb, 22.0)]);
    let load = LoadProfile::constant(Resolution::TypicalDay, load_kw).unwrap();
    Scenario::new("small", ty, load, cands, CostQuad::new(10.0, 300.0, 5.0, 10.0)).unwrap()
}

fn oracle_heuristic(alpha: f64, max_iterations: usize) -> HeuristicConfig {
    HeuristicConfig { alpha, max_iterations, patience: max_iterations, evaluator: EvaluatorKind::Oracle }
}

fn small_run() -> RunReport {
    run_remo(&small_scenario(5000.0), VariantChoice::Classic, &oracle_heuristic(0.05, 3)).unwrap()
}

#[test]
fn zero_load_builds_nothing() {
    let r = run_remo(&small_scenario(0.0), VariantChoice::Classic, &oracle_heuristic(0.01, 6)).unwrap();
    assert_eq!(r.iterations.len(), 1);
    assert_eq!(r.stop, StopReason::NoStorageUse);
    let it = r.selected();
    assert!(it.solution.units.iter().all(|u| u.count == 0));
    assert_eq!(it.solution.bess_units, 0);
    assert_eq!(it.total_cost, 0.0);
    assert_eq!(it.cycles, 0);
}

#[test]
fn run_throttles_and_selects_the_cheapest() {
    let r = small_run();
    assert_eq!(r.iterations.len(), 3);
    assert!(r.iterations[0].constraints.is_none());
    for pair in r.iterations.windows(2) {
        let c = pair[1].constraints.unwrap();
        assert_eq!(c.iteration, pair[1].iteration);
        assert!(pair[1].throughput_kwh <= 0.95 * pair[0].throughput_kwh * (1.0 + 1e-9));
    }
    let best = r.total_costs().into_iter().fold(f64::INFINITY, f64::min);
    assert_eq!(r.selected().total_cost, best);
    assert!(r.iterations[..r.selected].iter().all(|it| it.total_cost > best));
    for it in &r.iterations {
        assert!((it.total_cost - it.lifetime_cost - it.degradation_cost - it.shed_penalty_cost).abs() < 1e-6);
        assert!(it.audit.passes(1e-6, it.solution.bess_energy_kwh), "iteration {}", it.iteration);
    }
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn reports_are_deterministic_and_complete() {
    let r = small_run();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let files = emit_report(&r, a.path()).unwrap();
    emit_report(&r, b.path()).unwrap();
    let names: Vec<String> = files.iter().map(|f| f.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert_eq!(names, ["solution.json", "fleet.csv", "iterations.csv", "soh.csv"]);
    for n in &names {
        assert_eq!(read(a.path(), n), read(b.path(), n), "{n}");
    }

    let iters = read(a.path(), "iterations.csv");
    let lines: Vec<&str> = iters.lines().collect();
    assert_eq!(lines.len(), 1 + r.iterations.len());
    assert_eq!(lines.iter().filter(|l| l.ends_with(",true")).count(), 1);
    let soh_rows = read(a.path(), "soh.csv").lines().count() - 1;
    assert_eq!(soh_rows, r.iterations.iter().map(|it| it.soh_by_year.len()).sum::<usize>());

    let fleet = read(a.path(), "fleet.csv");
    assert!(fleet.starts_with("asset,small\n"));
    let bess = format!("BESS units,{}", r.selected().solution.bess_units);
    assert!(fleet.lines().any(|l| l == bess), "{fleet}");

    let back: RunReport = serde_json::from_str(&read(a.path(), "solution.json")).unwrap();
    assert_eq!(back, r);
}

#[test]
fn empty_fleet_report_has_zero_counts() {
    let r = run_remo(&small_scenario(0.0), VariantChoice::Classic, &oracle_heuristic(0.01, 2)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_report(&r, dir.path()).unwrap();
    let fleet = read(dir.path(), "fleet.csv");
    assert_eq!(fleet, "asset,small\nwind,0\npv,0\nBESS units,0\nBESS kWh,0\n");
}

#[test]
fn single_multiplier_sweep_equals_plain_run() {
    let sc = small_scenario(5000.0);
    let h = oracle_heuristic(0.05, 3);
    let run = run_remo(&sc, VariantChoice::Classic, &h).unwrap();
    let t = sensitivity_sweep(&sc, Technology::Fpv, &[1.0], VariantChoice::Classic, &h).unwrap();
    assert_eq!(t.rows.len(), 1);
    let row = &t.rows[0];
    assert!(row.feasible && !row.carried_over);
    assert_eq!(row.total_cost, Some(run.selected().total_cost));
    assert_eq!(row.units, run.selected().solution.units);
    assert_eq!(row.swept_units, run.selected().solution.count_of(Technology::Fpv));
    assert_eq!(t.entry_multiplier, (row.swept_units > 0).then_some(1.0));

    let dir = tempfile::tempdir().unwrap();
    emit_report(&t, dir.path()).unwrap();
    let sweep = read(dir.path(), "sweep.csv");
    assert_eq!(sweep.lines().count(), 2);
    assert!(sweep.lines().nth(1).unwrap().starts_with("FPV,1,true,"));
}

#[test]
fn sweep_rejects_bad_requests() {
    let sc = small_scenario(5000.0);
    let h = oracle_heuristic(0.05, 2);
    for ks in [vec![], vec![0.0], vec![1.5], vec![0.5, f64::NAN]] {
        let e = sensitivity_sweep(&sc, Technology::Owt, &ks, VariantChoice::Classic, &h).unwrap_err();
        assert_eq!(e.exit_code(), 3, "{ks:?}");
    }
    let e = sensitivity_sweep(&sc, Technology::Wec, &[1.0], VariantChoice::Classic, &h).unwrap_err();
    assert!(e.to_string().contains("WEC"), "{e}");
}

#[test]
fn heuristic_settings_are_checked() {
    let sc = small_scenario(5000.0);
    for h in [
        oracle_heuristic(0.0, 3),
        oracle_heuristic(1.0, 3),
        oracle_heuristic(0.01, 0),
        HeuristicConfig { patience: 0, ..oracle_heuristic(0.01, 3) },
    ] {
        let e = run_remo(&sc, VariantChoice::Classic, &h).unwrap_err();
        assert!(matches!(e, OrchestratorError::Input(_)), "{e}");
    }
}

#[test]
fn unmet_demand_is_diagnosed() {
    let mut sc = small_scenario(5000.0);
    for c in &mut sc.candidates {
        c.profile = GenerationProfile::from_values(c.rated_kw, vec![0.0; 288], c.profile.weights.clone());
    }
    let e = run_remo(&sc, VariantChoice::Classic, &oracle_heuristic(0.01, 2)).unwrap_err();
    assert_eq!(e.exit_code(), 2);
    let OrchestratorError::Infeasible { diagnosis: Some(d) } = &e else { panic!("{e:?}") };
    // 5 MW for every hour of the year
    let unserved = 5000.0 * 8760.0;
    assert!(d.contains(&format!("{unserved:.0} kWh per year goes unserved")), "{d}");
}

#[test]
fn load_resolution_round_trips() {
    let demand: Vec<f64> = (0..288).map(|k| 1000.0 + (k as f64 * 0.37).sin() * 400.0).collect();
    let typical = LoadProfile::new(Resolution::TypicalDay, demand.clone()).unwrap();
    let year = fit_load(typical, Resolution::FullYear).unwrap();
    assert_eq!(year.demand.len(), 365 * 24);
    assert_eq!(year.at(31, 5), demand[24 + 5]);
    assert_eq!(year.at(364, 23), demand[11 * 24 + 23]);
    let back = fit_load(year, Resolution::TypicalDay).unwrap();
    for (a, b) in back.demand.iter().zip(&demand) {
        assert!((a - b).abs() <= 1e-9 * b, "{a} vs {b}");
    }
}

/// Writes a typical-day scenario on constant weather to `dir`.
fn write_scenario(dir: &Path, weather: &[(Channel, f64)], extra: &str) -> std::path::PathBuf {
    let ty = TypicalYear::constant(Resolution::TypicalDay, weather);
    ty.write_csv(dir.join("year.csv")).unwrap();
    let load = LoadProfile::constant(Resolution::TypicalDay, 3000.0).unwrap();
    std::fs::write(dir.join("load.csv"), load.to_csv_string()).unwrap();
    let json = format!(
        r#"{{"name": "file-scenario", "typical_year": "year.csv", "load": "load.csv",
            "bess_cost": {{"precommissioning": 10, "capital": 300, "o_and_m_annual": 5, "decommissioning": 10}}{extra}}}"#
    );
    let path = dir.join("scenario.json");
    std::fs::write(&path, json).unwrap();
    path
}

fn windy() -> Vec<(Channel, f64)> {
    vec![
        (Channel::Hs, 2.0),
        (Channel::Te, 8.0),
        (Channel::Current, 1.2),
        (Channel::Wind, 9.0),
        (Channel::AnemoHeight, 4.0),
        (Channel::Ghi, 300.0),
        (Channel::Tamb, 20.0),
    ]
}

fn calm() -> Vec<(Channel, f64)> {
    vec![
        (Channel::Hs, 0.0),
        (Channel::Te, 0.0),
        (Channel::Current, 0.0),
        (Channel::Wind, 0.0),
        (Channel::AnemoHeight, 4.0),
        (Channel::Ghi, 0.0),
        (Channel::Tamb, 20.0),
    ]
}

#[test]
fn scenario_files_load_and_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), &windy(), "");
    let sc = Scenario::load(&path).unwrap();
    assert_eq!(sc.name, "file-scenario");
    assert_eq!(sc.candidates.len(), 10);
    assert_eq!(sc.load.peak(), 3000.0);

    let path = write_scenario(dir.path(), &windy(), r#", "colour": "blue""#);
    let e = Scenario::load(&path).unwrap_err();
    assert_eq!(e.exit_code(), 3, "{e}");
    let path = write_scenario(dir.path(), &windy(), r#", "metocean": "series.csv""#);
    assert!(Scenario::load(&path).unwrap_err().to_string().contains("exactly one"));
    let path = write_scenario(dir.path(), &windy(), r#", "resolution": "full_year""#);
    assert_eq!(Scenario::load(&path).unwrap_err().exit_code(), 3);
    let path = write_scenario(dir.path(), &windy(), r#", "heuristic": {"alpha": 2.0}"#);
    assert_eq!(Scenario::load(&path).unwrap_err().exit_code(), 3);
    std::fs::remove_file(dir.path().join("load.csv")).unwrap();
    let path = dir.path().join("scenario.json");
    assert_eq!(Scenario::load(&path).unwrap_err().exit_code(), 3);
}

fn orem(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_orem")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good");
    let bad = dir.path().join("calm");
    std::fs::create_dir_all(&good).unwrap();
    std::fs::create_dir_all(&bad).unwrap();
    let good = write_scenario(&good, &windy(), "");
    let calm = write_scenario(&bad, &calm(), "");

    let out = orem(&["lcoe", "--scenario", good.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    assert_eq!(table.lines().count(), 11, "{table}");

    let out_dir = dir.path().join("out");
    let out = orem(&[
        "solve",
        "--scenario",
        good.to_str().unwrap(),
        "--variant",
        "classic",
        "--evaluator",
        "oracle",
        "--max-iters",
        "2",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("solution.json").exists());

    let out = orem(&["solve", "--scenario", calm.to_str().unwrap(), "--variant", "classic", "--evaluator", "oracle"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible"));

    std::fs::write(&calm, "{ not json").unwrap();
    let out = orem(&["lcoe", "--scenario", calm.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));

    let out = orem(&["sweep", "--scenario", good.to_str().unwrap(), "--tech", "steam"]);
    assert_eq!(out.status.code(), Some(2), "clap usage errors exit with 2");
}
