use std::collections::HashSet;

use orem_core::{
    CostQuad, DeviceSpec, FpvSpec, GenerationProfile, LoadProfile, OwtSpec, Resolution, ResourceCandidate, TecSpec,
    Technology, WecSpec, HOURS,
};
use orem_sizing::{
    build_milp, constraint_census, extract_solution, solve_sizing, variable_census, verify_solution, BessParams,
    IterationConstraintSet, Role, SizingError, SizingProblem, TimeGrid, Variant, Wrap,
};
use orem_solver::{enumerate_oracle, solve_milp, BnbOptions, MilpStatus};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spec(tech: Technology, rated: f64) -> DeviceSpec {
    match tech {
        Technology::Fpv => DeviceSpec::Fpv(FpvSpec::with_defaults(rated)),
        Technology::Owt => DeviceSpec::Owt(OwtSpec {
            rated_kw: rated,
            air_density: 1.225,
            rotor_area_m2: 1000.0,
            power_coefficient: 0.45,
            electrical_efficiency: 0.95,
            hub_height_m: 100.0,
            roughness_length_m: 0.0002,
            cut_in_ms: 3.0,
            cut_out_ms: 25.0,
        }),
        Technology::Tec => DeviceSpec::Tec(TecSpec {
            rated_kw: rated,
            water_density: 1025.0,
            rotor_area_m2: 100.0,
            power_coefficient: 0.4,
            electrical_efficiency: 0.95,
            cut_in_ms: 0.5,
            cut_out_ms: 5.0,
        }),
        Technology::Wec => DeviceSpec::Wec(WecSpec {
            rated_kw: rated,
            hs_edges: vec![0.0, 10.0],
            te_edges: vec![0.0, 20.0],
            matrix: vec![vec![rated]],
        }),
    }
}

fn candidate(
    name: &str,
    tech: Technology,
    rated: f64,
    per_unit: Vec<f64>,
    weights: Vec<f64>,
    cost: f64,
) -> ResourceCandidate {
    let profile = GenerationProfile::from_values(rated, per_unit, weights);
    ResourceCandidate::new(name, spec(tech, rated), CostQuad::new(0.0, cost, 0.0, 0.0), profile)
}

fn bess_cost() -> CostQuad {
    CostQuad::new(10.0, 300.0, 5.0, 10.0)
}

/// Wind that fades in summer and a solar array, serving a flat 5 MW load.
fn typical_day_problem() -> SizingProblem {
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
        candidate("wind", Technology::Owt, 2000.0, wind, w.clone(), 4.0e6),
        candidate("pv", Technology::Fpv, 1000.0, sun, w, 0.9e6),
    ];
    let load = LoadProfile::constant(Resolution::TypicalDay, 5000.0).unwrap();
    SizingProblem::new(cands, &load, BessParams::default(), bess_cost())
}

/// Two devices and a battery on a single 4-hour period.
fn tiny_problem(seed: u64) -> SizingProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = TimeGrid { hours_per_period: 4, weights: vec![1.0], wrap: Wrap::EachPeriod };
    let techs = [Technology::Owt, Technology::Fpv, Technology::Wec, Technology::Tec];
    let n = rng.random_range(1..=2);
    let cands = (0..n)
        .map(|j| {
            let out = (0..4).map(|_| 1000.0 * rng.random_range(0.0f64..1.0).powi(2)).collect();
            candidate(
                &format!("g{j}"),
                techs[rng.random_range(0..4)],
                1000.0,
                out,
                vec![1.0],
                rng.random_range(50.0..500.0),
            )
        })
        .collect();
    let demand = (0..4).map(|_| rng.random_range(100.0..1000.0)).collect();
    let mut p = SizingProblem::on_grid(cands, demand, grid, BessParams::default(), CostQuad::new(0.0, 0.01, 0.0, 0.0));
    p.unit_margin = 2;
    p.load_shed_penalty = Some(5.0);
    p
}

#[test]
fn census_matches_closed_form() {
    let mut p = typical_day_problem();
    p.candidates.truncate(1);
    let m = build_milp(&p, Variant::Classic, None).unwrap();
    assert_eq!(m.milp.num_vars(), 1 + 1 + 6 * 288);
    assert_eq!(m.milp.num_vars(), variable_census(1, 288, false));
    assert_eq!(m.milp.num_constraints(), 9 * 288);
    assert_eq!(m.milp.num_constraints(), constraint_census(288, false));
    m.milp.validate().unwrap();

    p.load_shed_penalty = Some(1e9);
    let it = IterationConstraintSet::new(2, 0.01, 1e6).unwrap();
    let m = build_milp(&p, Variant::Classic, Some(&it)).unwrap();
    assert_eq!(m.milp.num_vars(), variable_census(1, 288, true));
    assert_eq!(m.milp.num_constraints(), constraint_census(288, true));
}

#[test]
fn every_variable_has_one_role() {
    let mut p = typical_day_problem();
    p.load_shed_penalty = Some(1e9);
    let m = build_milp(&p, Variant::Classic, None).unwrap();
    let roles = m.vars.roles();
    assert_eq!(roles.len(), m.milp.num_vars());
    let ids: HashSet<usize> = roles.iter().map(|(v, _)| v.index()).collect();
    assert_eq!(ids.len(), m.milp.num_vars());
    assert_eq!(m.vars.role_of(m.vars.bess_units), Some(Role::BessUnits));
    assert_eq!(m.vars.role_of(m.vars.charge[30]), Some(Role::Charge(30)));
    assert_eq!(m.milp.var(m.vars.stored[30]).name, "E[1,6]");
}

#[test]
fn throttling_scales_power_caps_and_limits_throughput() {
    let p = typical_day_problem();
    let it = IterationConstraintSet::new(3, 0.01, 2.0e6).unwrap();
    assert!((it.power_factor() - 0.9801).abs() < 1e-15);
    let m = build_milp(&p, Variant::Classic, Some(&it)).unwrap();
    let row = m.milp.constraints.iter().find(|c| c.name == "char_rate[0,5]").unwrap();
    let coef = row.coeffs.iter().find(|(v, _)| *v == m.vars.bess_units).unwrap().1;
    assert!((coef + 0.5 * 3900.0 * 0.9801).abs() < 1e-9);
    let row = m.milp.constraints.iter().find(|c| c.name == "disc_rate[7,20]").unwrap();
    let coef = row.coeffs.iter().find(|(v, _)| *v == m.vars.bess_units).unwrap().1;
    assert!((coef + 0.5 * 3900.0 * 0.9801).abs() < 1e-9);
    let tp = m.milp.constraints.last().unwrap();
    assert_eq!(tp.name, "throughput");
    assert!((tp.rhs - 0.99 * 2.0e6).abs() < 1e-6);
    // February hours are weighted by 28 days
    let feb = tp.coeffs.iter().find(|(v, _)| *v == m.vars.charge[24 + 3]).unwrap().1;
    assert_eq!(feb, 28.0);
}

#[test]
fn zero_load_needs_nothing() {
    let mut p = typical_day_problem();
    p.demand = vec![0.0; 288];
    let run = solve_sizing(&p, Variant::Classic, None, &BnbOptions::default()).unwrap();
    let sol = run.solution.unwrap();
    assert_eq!(sol.objective, 0.0);
    assert!(sol.units.iter().all(|u| u.count == 0));
    assert_eq!(sol.bess_units, 0);
    assert_eq!(sol.lifetime_cost(), 0.0);
    assert!(sol.dispatch.charge_kw.iter().chain(&sol.dispatch.discharge_kw).all(|&v| v == 0.0));
}

#[test]
fn extraction_reports_modular_storage() {
    let p = typical_day_problem();
    let m = build_milp(&p, Variant::Classic, None).unwrap();
    for (n, e) in [(19.0, 74_100.0), (44.0, 171_600.0)] {
        let mut x = vec![0.0; m.milp.num_vars()];
        x[m.vars.bess_units.index()] = n;
        for &s in &m.vars.stored {
            x[s.index()] = 0.5 * e;
        }
        let sol = extract_solution(&m, &x).unwrap();
        assert_eq!(sol.bess_energy_kwh, e);
        let diag = verify_solution(&sol, &p, None);
        assert!(diag.modular);
        assert_eq!(diag.max_soc_bound_violation_kwh, 0.0);
    }
}

#[test]
fn fractional_unit_count_is_rejected() {
    let p = typical_day_problem();
    let m = build_milp(&p, Variant::Classic, None).unwrap();
    let mut x = vec![0.0; m.milp.num_vars()];
    x[m.vars.units[0].index()] = 0.4;
    match extract_solution(&m, &x) {
        Err(SizingError::Fractional { variable, value }) => {
            assert_eq!(variable, "N[wind]");
            assert_eq!(value, 0.4);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn solved_schedule_passes_every_audit() {
    let p = typical_day_problem();
    let run = solve_sizing(&p, Variant::Classic, None, &BnbOptions::default()).unwrap();
    assert_eq!(run.stats.status, MilpStatus::Optimal);
    let sol = run.solution.unwrap();
    let diag = verify_solution(&sol, &p, None);
    assert!(diag.passes(1e-6, sol.bess_energy_kwh), "{diag:#?}");
    assert!(sol.bess_units > 0, "the flat night load needs storage");
    // the stored-energy recursion telescopes over each representative day
    for day in 0..12 {
        let net: f64 = (day * HOURS..(day + 1) * HOURS)
            .map(|k| 0.95 * sol.dispatch.charge_kw[k] - sol.dispatch.discharge_kw[k] / 0.95)
            .sum();
        assert!(net.abs() <= 1e-6 * sol.bess_energy_kwh, "day {day}: {net}");
    }
    let by_asset: f64 = sol.cost_by_asset.iter().map(|a| a.cost.total()).sum();
    assert!((by_asset - sol.lifetime_cost()).abs() <= 1e-9 * by_asset);

    // corrupt one hour so both directions are active
    let mut bad = sol.clone();
    let k = (0..288).find(|&k| bad.dispatch.charge_kw[k] > 1.0).unwrap();
    bad.dispatch.discharge_kw[k] = 5.0;
    bad.dispatch.discharge_on[k] = true;
    let diag = verify_solution(&bad, &p, None);
    assert_eq!(diag.exclusion_violations, vec![k]);
    assert!(!diag.passes(1e-6, bad.bess_energy_kwh));
}

#[test]
fn throttled_solve_respects_caps_and_throughput() {
    let p = typical_day_problem();
    let first = solve_sizing(&p, Variant::Classic, None, &BnbOptions::default()).unwrap().solution.unwrap();
    let prev = first.dispatch.annual_throughput_kwh();
    let it = IterationConstraintSet::new(2, 0.01, prev).unwrap();
    let run = solve_sizing(&p, Variant::Classic, Some(&it), &BnbOptions::default()).unwrap();
    let sol = run.solution.unwrap();
    let diag = verify_solution(&sol, &p, Some(&it));
    assert!(diag.passes(1e-6, sol.bess_energy_kwh), "{diag:#?}");
    let audit = diag.throttle.unwrap();
    assert!(audit.throughput_kwh <= 0.99 * prev * (1.0 + 1e-9));
    assert!(sol.objective >= first.objective * (1.0 - 1e-9));
}

#[test]
fn simplified_variant_rejects_marine_devices() {
    let mut p = typical_day_problem();
    p.candidates[1] =
        candidate("wave", Technology::Wec, 750.0, vec![100.0; 288], Resolution::TypicalDay.weights(), 1e6);
    assert!(
        matches!(build_milp(&p, Variant::Simplified, None), Err(SizingError::SimplifiedWithMarine(n)) if n == "wave")
    );
    assert!(build_milp(&p, Variant::Classic, None).is_ok());
}

#[test]
fn mismatched_grid_is_rejected() {
    let mut p = typical_day_problem();
    p.candidates[0].profile = GenerationProfile::from_values(2000.0, vec![1.0; 8760], Resolution::FullYear.weights());
    assert!(matches!(build_milp(&p, Variant::Classic, None), Err(SizingError::GridMismatch { .. })));
}

#[test]
fn load_shedding_localizes_shortfall() {
    let mut p = typical_day_problem();
    p.candidates.retain(|c| c.name == "pv");
    p.unit_margin = 0;
    // five solar arrays cannot cover a 5 MW night load without storage
    p.bess.unit_energy_kwh = 1.0;
    p.demand = vec![5000.0; 288];
    let strict = solve_sizing(&p, Variant::Classic, None, &BnbOptions::default()).unwrap();
    assert_eq!(strict.stats.status, MilpStatus::Infeasible);
    assert!(strict.solution.is_none());
    p.load_shed_penalty = Some(1e9);
    let slack = solve_sizing(&p, Variant::Classic, None, &BnbOptions::default()).unwrap().solution.unwrap();
    assert!(slack.unserved_energy_kwh() > 0.0);
    let diag = verify_solution(&slack, &p, None);
    assert!(diag.passes(1e-6, slack.bess_energy_kwh), "{diag:#?}");
}

#[test]
fn full_year_grid_wraps_once() {
    let g = TimeGrid::of(Resolution::FullYear);
    assert_eq!(g.previous(0), 8759);
    assert_eq!(g.previous(24), 23);
    let d = TimeGrid::of(Resolution::TypicalDay);
    assert_eq!(d.previous(24), 47);
    assert_eq!(d.previous(25), 24);
}

#[test]
fn tiny_instances_match_enumeration() {
    for seed in 0..8 {
        let p = tiny_problem(seed);
        let m = build_milp(&p, Variant::Classic, None).unwrap();
        let bnb = solve_milp(&m.milp, &BnbOptions::default()).unwrap();
        let ora = enumerate_oracle(&m.milp).unwrap();
        assert_eq!(bnb.status, MilpStatus::Optimal, "seed {seed}");
        let rel = (bnb.objective - ora.objective).abs() / bnb.objective.abs().max(1.0);
        assert!(rel <= 1e-6, "seed {seed}: {} vs {}", bnb.objective, ora.objective);
        let sol = extract_solution(&m, &bnb.x).unwrap();
        assert!(verify_solution(&sol, &p, None).passes(1e-6, sol.bess_energy_kwh), "seed {seed}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn throttle_tightens_every_iteration(alpha in 1e-4f64..0.5, i in 1usize..40, prev in 0.0f64..1e9) {
        let a = IterationConstraintSet::new(i, alpha, prev).unwrap();
        let b = IterationConstraintSet::new(i + 1, alpha, prev).unwrap();
        let f = a.power_factor();
        prop_assert!(f > 0.0 && f <= 1.0);
        prop_assert!(b.power_factor() < f);
        prop_assert!(a.throughput_limit() <= prev);
        let expected = (1.0 - alpha) * prev;
        prop_assert_eq!(a.throughput_limit(), expected);
    }

    #[test]
    fn every_cell_has_one_successor(periods in 1usize..6, hours in 1usize..8, horizon in any::<bool>()) {
        let wrap = if horizon { Wrap::Horizon } else { Wrap::EachPeriod };
        let g = TimeGrid { hours_per_period: hours, weights: vec![1.0; periods], wrap };
        let mut hits = vec![0; g.cells()];
        for k in 0..g.cells() {
            let p = g.previous(k);
            prop_assert!(p < g.cells());
            if !horizon {
                prop_assert_eq!(p / hours, k / hours);
            }
            hits[p] += 1;
        }
        prop_assert!(hits.iter().all(|&h| h == 1));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_tiny_solutions_pass_the_audit(seed in 100u64..100_000, alpha in 0.01f64..0.5) {
        let p = tiny_problem(seed);
        let base = solve_sizing(&p, Variant::Classic, None, &BnbOptions::default()).unwrap().solution.unwrap();
        prop_assert!(verify_solution(&base, &p, None).passes(1e-6, base.bess_energy_kwh));
        let it = IterationConstraintSet::new(2, alpha, base.dispatch.annual_throughput_kwh()).unwrap();
        let run = solve_sizing(&p, Variant::Classic, Some(&it), &BnbOptions::default()).unwrap();
        // shedding keeps the throttled program feasible
        let sol = run.solution.unwrap();
        let audit = verify_solution(&sol, &p, Some(&it));
        prop_assert!(audit.passes(1e-6, sol.bess_energy_kwh), "{:?}", audit);
        prop_assert!(sol.objective >= base.objective - 1e-6 * base.objective.abs().max(1.0));
    }
}
