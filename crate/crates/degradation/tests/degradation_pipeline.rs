use orem_degradation::{
    degradation_cost, extract_cycles, generate_training_set, mlp_predict, oracle_degradation, r_squared,
    read_training_csv, train_mlp, write_training_csv, Cycle, CycleKind, DegradationFeatures, Evaluator, FeatureRanges,
    MlpModel, TrainConfig, LAYER_SIZES,
};
use orem_sizing::{Dispatch, TimeGrid, Wrap};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dispatch(grid: TimeGrid, net: &[f64], stored: &[f64]) -> Dispatch {
    Dispatch {
        charge_kw: net.iter().map(|&p| p.max(0.0)).collect(),
        discharge_kw: net.iter().map(|&p| (-p).max(0.0)).collect(),
        curtail_kw: vec![0.0; net.len()],
        stored_kwh: stored.to_vec(),
        charge_on: net.iter().map(|&p| p > 0.0).collect(),
        discharge_on: net.iter().map(|&p| p < 0.0).collect(),
        shed_kw: vec![0.0; net.len()],
        grid,
    }
}

fn one_period(hours: usize) -> TimeGrid {
    TimeGrid { hours_per_period: hours, weights: vec![1.0], wrap: Wrap::EachPeriod }
}

fn reference(dod: f64, t_c: f64) -> DegradationFeatures {
    DegradationFeatures { t_c, c_rate: 0.0, soc: 0.5, dod, soh: 1.0 }
}

#[test]
fn consecutive_states_merge_into_cycles() {
    let d = dispatch(one_period(6), &[5.0, 5.0, 0.0, -3.0, -3.0, -3.0], &[20.0, 25.0, 25.0, 22.0, 19.0, 16.0]);
    let cycles = extract_cycles(&d, 100.0, Some(&[10.0, 12.0, 0.0, 20.0, 20.0, 23.0])).unwrap();
    assert_eq!(cycles.len(), 2);
    let (c, x) = (&cycles[0], &cycles[1]);
    assert_eq!((c.kind, c.duration_h, c.start_hour), (CycleKind::Charge, 2, 0));
    assert_eq!(c.mean_power_kw, 5.0);
    assert_eq!(c.depth, 0.1);
    assert_eq!(c.c_rate, 0.05);
    assert_eq!(c.mean_ambient_temp_c, 11.0);
    assert!((c.mean_soc - 0.225).abs() < 1e-15);
    assert_eq!((x.kind, x.duration_h, x.start_hour), (CycleKind::Discharge, 3, 3));
    assert_eq!(x.mean_power_kw, 3.0);
    assert!((x.depth - 0.09).abs() < 1e-15);
    assert_eq!(x.mean_ambient_temp_c, 21.0);
}

#[test]
fn idle_schedule_has_no_cycles() {
    let d = dispatch(one_period(6), &[0.0; 6], &[0.0; 6]);
    assert!(extract_cycles(&d, 100.0, None).unwrap().is_empty());
    assert!(extract_cycles(&d, 0.0, None).unwrap().is_empty());
}

#[test]
fn full_capacity_in_one_hour_has_unit_depth() {
    let d = dispatch(one_period(4), &[0.0, 3900.0, 0.0, 0.0], &[0.0; 4]);
    let c = extract_cycles(&d, 3900.0, None).unwrap();
    assert_eq!(c.len(), 1);
    assert_eq!(c[0].depth, 1.0);
    assert_eq!(c[0].mean_ambient_temp_c, 25.0);
}

#[test]
fn cycles_stop_at_period_boundaries() {
    let grid = TimeGrid { hours_per_period: 3, weights: vec![31.0, 28.0], wrap: Wrap::EachPeriod };
    let d = dispatch(grid, &[0.0, 0.0, 4.0, 4.0, -1.0, 0.0], &[0.0; 6]);
    let c = extract_cycles(&d, 10.0, None).unwrap();
    assert_eq!(c.len(), 3);
    assert_eq!((c[0].period, c[0].weight), (0, 31.0));
    assert_eq!((c[1].period, c[1].start_hour, c[1].weight), (1, 0, 28.0));
}

#[test]
fn capacity_is_required_for_a_moving_schedule() {
    let d = dispatch(one_period(2), &[1.0, 0.0], &[0.0; 2]);
    assert!(extract_cycles(&d, 0.0, None).is_err());
}

#[test]
fn oracle_point_values() {
    assert_eq!(oracle_degradation(&reference(0.0, 30.0)).unwrap(), 0.0);
    assert_eq!(oracle_degradation(&reference(1.0, 25.0)).unwrap(), 5e-5);
    let hot = oracle_degradation(&reference(1.0, 45.0)).unwrap();
    assert!((hot - 5e-5 * 0.7f64.exp()).abs() < 1e-18);
    assert!((hot - 1.0069e-4).abs() < 1e-8);
    assert!(oracle_degradation(&DegradationFeatures { soh: 0.0, ..reference(1.0, 25.0) }).is_err());
    assert!(oracle_degradation(&DegradationFeatures { dod: 1.5, ..reference(1.0, 25.0) }).is_err());
}

#[test]
fn training_set_generation() {
    let r = FeatureRanges::default();
    let one = generate_training_set(&r, 1, 3).unwrap();
    assert_eq!(one[0].label, oracle_degradation(&one[0].features).unwrap());
    assert_eq!(generate_training_set(&r, 50, 9).unwrap(), generate_training_set(&r, 50, 9).unwrap());
    let big = generate_training_set(&r, 10_000, 1).unwrap();
    assert!(big.iter().all(|s| s.label > 0.0 || s.features.dod == 0.0));

    let mut buf = Vec::new();
    write_training_csv(&big[..20], &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("t_c,c_rate,soc,dod,soh,label\n"));
    assert_eq!(read_training_csv(buf.as_slice()).unwrap(), big[..20].to_vec());
}

#[test]
fn constant_label_is_reproduced() {
    let mut samples = generate_training_set(&FeatureRanges::default(), 4000, 2).unwrap();
    samples.iter_mut().for_each(|s| s.label = 0.37);
    let cfg = TrainConfig { epochs: 250, zero_output_init: true, ..Default::default() };
    let out = train_mlp(&samples, &cfg).unwrap();
    for s in &samples {
        let p = mlp_predict(&out.model, &s.features);
        assert!((p - 0.37).abs() < 1e-3, "{p}");
    }
}

#[test]
fn degenerate_networks() {
    let f = reference(0.4, 18.0);
    let mut m = MlpModel::zeros(&LAYER_SIZES);
    m.biases[2][0] = 0.25;
    assert_eq!(mlp_predict(&m, &f), 0.25);
    m.biases[2][0] = -0.25;
    assert_eq!(mlp_predict(&m, &f), 0.0);

    // every first-layer unit is driven negative, so only biases propagate
    let mut m = MlpModel::zeros(&LAYER_SIZES);
    m.weights[0].iter_mut().for_each(|w| *w = -1.0);
    m.biases[0].iter_mut().for_each(|b| *b = -0.5);
    for (o, b) in m.biases[1].iter_mut().enumerate() {
        *b = o as f64 * 0.1 - 0.3;
    }
    for (i, w) in m.weights[2].iter_mut().enumerate() {
        *w = 1.0 + i as f64;
    }
    m.biases[2][0] = 0.05;
    m.weights[1].iter_mut().for_each(|w| *w = 7.0);
    // hidden-2 biases clipped at zero: 0.1, 0.2, ..., 0.6 survive at units 4..9
    let expected = 0.05 + (4..10).map(|o| (o as f64 * 0.1 - 0.3) * (1.0 + o as f64)).sum::<f64>();
    let positive = DegradationFeatures { t_c: 30.0, c_rate: 0.4, soc: 0.9, dod: 0.7, soh: 0.8 };
    assert!((mlp_predict(&m, &positive) - expected).abs() < 1e-12);
}

#[test]
fn backprop_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut m = MlpModel::initialized(&LAYER_SIZES, 4);
    m.biases.iter_mut().flatten().for_each(|b| *b = rng.random_range(-0.2..0.2));
    let xs: Vec<Vec<f64>> = (0..16).map(|_| (0..5).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let ts: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (_, g) = m.loss_and_gradient(&xs, &ts);
    let p0 = m.parameters();
    let eps = 1e-5;
    for _ in 0..10 {
        let j = rng.random_range(0..p0.len());
        let mut p = p0.clone();
        p[j] = p0[j] + eps;
        m.set_parameters(&p);
        let up = m.loss_and_gradient(&xs, &ts).0;
        p[j] = p0[j] - eps;
        m.set_parameters(&p);
        let down = m.loss_and_gradient(&xs, &ts).0;
        let fd = (up - down) / (2.0 * eps);
        let scale = g[j].abs().max(fd.abs()).max(1e-8);
        assert!((g[j] - fd).abs() / scale <= 1e-4, "param {j}: backprop {} fd {fd}", g[j]);
    }
}

#[test]
fn surrogate_fits_the_oracle() {
    let samples = generate_training_set(&FeatureRanges::default(), 10_000, 11).unwrap();
    let cfg = TrainConfig::default();
    let a = train_mlp(&samples, &cfg).unwrap();
    println!("held-out R² = {:.5}, train loss {:.3e}", a.validation_r2, a.train_loss);
    assert_eq!((a.train_size, a.validation_size), (8000, 2000));
    assert!(a.validation_r2 >= 0.95, "R² {}", a.validation_r2);
    let b = train_mlp(&samples, &cfg).unwrap();
    assert_eq!(a.model, b.model);

    let max = samples.iter().map(|s| s.label).fold(0.0, f64::max);
    let pred: Vec<f64> = samples.iter().map(|s| mlp_predict(&a.model, &s.features)).collect();
    let actual: Vec<f64> = samples.iter().map(|s| s.label).collect();
    assert!(r_squared(&pred, &actual) >= 0.95);
    let typical = &samples[17];
    assert!((pred[17] - typical.label).abs() <= 0.05 * max);

    let back = MlpModel::from_json(&a.model.to_json()).unwrap();
    assert_eq!(back, a.model);
}

fn unit_cycle(weight: f64) -> Cycle {
    Cycle {
        kind: CycleKind::Discharge,
        period: 0,
        start_hour: 0,
        duration_h: 1,
        mean_power_kw: 0.0,
        c_rate: 0.0,
        depth: 1.0,
        mean_soc: 0.5,
        mean_ambient_temp_c: 25.0,
        weight,
    }
}

#[test]
fn lifetime_cost_matches_scalar_simulation() {
    let out = degradation_cost(&[unit_cycle(365.0)], &Evaluator::oracle(), 300.0, 3900.0, 20.0).unwrap();
    let mut soh = 1.0f64;
    let mut lost = 0.0;
    for _ in 0..20 {
        let d = 365.0 * 5e-5 / soh;
        lost += d;
        soh -= d;
    }
    assert!((out.consumed_fraction - lost).abs() < 1e-12);
    assert!((out.cost - lost * 3900.0 * 300.0).abs() < 1e-6);
    assert!((out.soh_by_year[20] - soh).abs() < 1e-12);
    assert_eq!(out.soh_by_year.len(), 21);
    assert!(out.soh_by_year.windows(2).all(|w| w[1] <= w[0]));
    assert!(out.worn_out_year.is_none());

    let double = degradation_cost(&[unit_cycle(365.0)], &Evaluator::oracle(), 600.0, 3900.0, 20.0).unwrap();
    assert_eq!(double.cost, 2.0 * out.cost);
}

#[test]
fn empty_cycle_list_costs_nothing() {
    let out = degradation_cost(&[], &Evaluator::oracle(), 300.0, 3900.0, 20.0).unwrap();
    assert_eq!(out.cost, 0.0);
    assert!(out.soh_by_year.iter().all(|&s| s == 1.0));
}

#[test]
fn heavy_use_wears_the_battery_out() {
    // 36.5 % per year before the health feedback
    let out = degradation_cost(&[unit_cycle(7300.0)], &Evaluator::oracle(), 100.0, 1000.0, 20.0).unwrap();
    assert!(out.worn_out_year.is_some());
    assert_eq!(out.consumed_fraction, 1.0);
    assert_eq!(out.cost, 1000.0 * 100.0);
    assert_eq!(*out.soh_by_year.last().unwrap(), 0.0);
}

proptest! {
    #[test]
    fn oracle_is_monotone(
        t in -5.0f64..40.0, c in 0.0f64..1.0, soc in 0.0f64..1.0, dod in 0.0f64..1.0, soh in 0.2f64..1.0,
        dt in 0.0f64..10.0, dc in 0.0f64..0.5, dd in 0.0f64..0.5, dh in 0.0f64..0.5,
    ) {
        let base = DegradationFeatures { t_c: t, c_rate: c, soc, dod, soh };
        let d0 = oracle_degradation(&base).unwrap();
        let up = |f: DegradationFeatures| oracle_degradation(&f).unwrap();
        let farther = if soc >= 0.5 { (soc + dd).min(1.0) } else { (soc - dd).max(0.0) };
        let hotter = up(DegradationFeatures { t_c: t + dt, ..base });
        let faster = up(DegradationFeatures { c_rate: c + dc, ..base });
        let deeper = up(DegradationFeatures { dod: (dod + dd).min(1.0), ..base });
        let healthier = up(DegradationFeatures { soh: (soh + dh).min(1.0), ..base });
        let skewed = up(DegradationFeatures { soc: farther, ..base });
        prop_assert!(hotter >= d0 && faster >= d0 && deeper >= d0 && skewed >= d0);
        prop_assert!(healthier <= d0);
    }

    #[test]
    fn cycle_energy_is_conserved(net in prop::collection::vec(prop_oneof![Just(0.0), -50.0f64..50.0], 1..48)) {
        let n = net.len();
        let d = dispatch(TimeGrid { hours_per_period: n, weights: vec![1.0], wrap: Wrap::EachPeriod }, &net, &vec![50.0; n]);
        let cycles = extract_cycles(&d, 1000.0, None).unwrap();
        for (kind, want) in [
            (CycleKind::Charge, d.charge_kw.iter().sum::<f64>()),
            (CycleKind::Discharge, d.discharge_kw.iter().sum::<f64>()),
        ] {
            let got: f64 = cycles.iter().filter(|c| c.kind == kind).map(Cycle::energy_kwh).sum();
            prop_assert!((got - want).abs() <= 1e-9 * want.max(1.0));
        }
        prop_assert!(cycles.iter().all(|c| c.duration_h >= 1 && (0.0..=1.0).contains(&c.depth)));
    }

    #[test]
    fn scaling_usage_down_never_costs_more(
        depths in prop::collection::vec((0.0f64..1.0, 0.0f64..0.5, 0.0f64..40.0), 1..8),
        lambda in 0.0f64..1.0,
    ) {
        let cycles: Vec<Cycle> = depths
            .iter()
            .map(|&(depth, c_rate, t)| Cycle { depth, c_rate, mean_power_kw: c_rate * 3900.0, mean_ambient_temp_c: t, ..unit_cycle(30.0) })
            .collect();
        let scaled: Vec<Cycle> = cycles.iter().map(|c| c.scaled(lambda)).collect();
        let full = degradation_cost(&cycles, &Evaluator::oracle(), 300.0, 3900.0, 20.0).unwrap();
        let less = degradation_cost(&scaled, &Evaluator::oracle(), 300.0, 3900.0, 20.0).unwrap();
        prop_assert!(less.cost <= full.cost + 1e-9);
    }
}
