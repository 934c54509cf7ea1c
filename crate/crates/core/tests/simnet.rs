use hprobe::estimation::{hurst_cov_slope, log_lag_grid, loglog_fit, sample_autocov, MeanMode};
use hprobe::sampling::{draw_pattern, InterSampleSpec};
use hprobe::simnet::{
    compose_cov_values, generate_cross, or_compose, simulate_path, CrossTraffic, NodeConfig, NodeState, PathConfig,
    PathState, ProbeKind,
};
use hprobe::traffic::{gen_fgn_pair, LrdModel, Trace};
use hprobe::rng_for;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn or_recursion_matches_brute_force() {
    let mut rng = rng_for(3);
    let n = 10_000;
    let draw = |rng: &mut hprobe::SimRng| -> Vec<f64> { (0..n).map(|_| rng.random_range(0..2) as f64).collect() };
    let (a, b, c) = (draw(&mut rng), draw(&mut rng), draw(&mut rng));
    let w = or_compose(&[Trace::binary(a.clone()).unwrap(), Trace::binary(b.clone()).unwrap(), Trace::binary(c.clone()).unwrap()])
        .unwrap();
    for i in 0..n {
        let brute = if a[i] == 1.0 || b[i] == 1.0 || c[i] == 1.0 { 1.0 } else { 0.0 };
        assert_eq!(w.values[i], brute);
    }
}

#[test]
fn largest_hurst_dominates_composition() {
    for (h1, h2) in [(0.6, 0.9), (0.9, 0.6), (0.7, 0.8), (0.55, 0.65)] {
        let lags: Vec<usize> = log_lag_grid(100, 10_000, 20);
        let x: Vec<f64> = lags.iter().map(|&l| l as f64).collect();
        let y: Vec<f64> = lags
            .iter()
            .map(|&l| {
                let t = l as f64;
                compose_cov_values(&[0.2 * t.powf(2.0 * h1 - 2.0), 0.2 * t.powf(2.0 * h2 - 2.0)], &[0.5, 0.5]).unwrap()
            })
            .collect();
        let slope = loglog_fit(&x, &y, (100.0, 10_000.0)).unwrap().slope;
        let expected = 2.0 * f64::max(h1, h2) - 2.0;
        assert!((slope - expected).abs() <= 0.05, "{h1}/{h2}: slope {slope} vs {expected}");
    }
}

#[test]
fn composition_matches_or_of_independent_indicators() {
    let t = 1 << 21;
    let lags = [1usize, 10, 100, 1000];
    let indicator = |h: f64, seed: u64| {
        let (y, _) = gen_fgn_pair(&LrdModel::new(h, 1.0, 0.0).unwrap(), t, seed).unwrap();
        Trace::binary(y.values.iter().map(|&v| (v > 0.0) as u8 as f64).collect()).unwrap()
    };
    let (y1, y2) = (indicator(0.8, 61), indicator(0.6, 62));
    let w = or_compose(&[y1.clone(), y2.clone()]).unwrap();
    let cov = |x: &Trace| sample_autocov(&x.values, &lags, MeanMode::Global).unwrap().values;
    let (c1, c2, cw) = (cov(&y1), cov(&y2), cov(&w));
    let tol = 5.0 * w.variance() / (t as f64).sqrt();
    for i in 0..lags.len() {
        let composed = compose_cov_values(&[c1[i], c2[i]], &[y1.mean(), y2.mean()]).unwrap();
        assert!((composed - cw[i]).abs() <= tol, "lag {}: {composed} vs {}", lags[i], cw[i]);
    }
}

#[test]
fn queue_output_preserves_lrd() {
    let path = PathConfig::new(vec![NodeConfig::new(1.0, CrossTraffic::fgn(0.8, 0.5))]);
    let t = 10_000_000;
    let cross = generate_cross(&path, t, 21).unwrap();
    let state = PathState::build(&path, cross, &[]).unwrap();
    let busy = state.path_busy();
    let c = sample_autocov(&busy.values, &log_lag_grid(1, 1000, 20), MeanMode::PerWindow).unwrap();
    let h = hurst_cov_slope(&c, (1.0, 1000.0)).unwrap();
    assert!((h.value - 0.8).abs() <= 0.07, "H = {}", h.value);
}

#[test]
fn identical_configs_give_identical_results() {
    let path = PathConfig::new(vec![
        NodeConfig::new(1.0, CrossTraffic::fgn(0.7, 0.4)),
        NodeConfig::new(2.0, CrossTraffic::fgn(0.9, 0.3)),
    ]);
    let pattern = draw_pattern(&InterSampleSpec::Geometric { p: 0.1 }, 50_000, 8).unwrap();
    for kind in [ProbeKind::Single, ProbeKind::Pair] {
        let a = simulate_path(&path, &pattern, kind, 99).unwrap();
        let b = simulate_path(&path, &pattern, kind, 99).unwrap();
        assert_eq!(a.busy, b.busy);
        assert_eq!(a.probe_delays, b.probe_delays);
        assert_eq!(a.pair_dispersions, b.pair_dispersions);
        assert_eq!(a.stats, b.stats);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn work_is_conserved(
        arrivals in prop::collection::vec(0.0f64..5.0, 1..2000),
        capacity in 0.1f64..3.0,
        buffer in prop::option::of(0.0f64..20.0),
    ) {
        let node = NodeState::run(capacity, buffer, arrivals);
        let s = node.stats;
        let balance = s.arrived - s.served - s.dropped - s.final_backlog;
        prop_assert!(balance.abs() <= 1e-9 * s.arrived.max(1.0), "imbalance {}", balance);
        prop_assert!(s.served <= capacity * node.len() as f64 + 1e-9);
        prop_assert!(node.busy().values.iter().all(|&b| b == 0.0 || b == 1.0));
    }

    #[test]
    fn probe_delays_never_undercut_propagation(util in 0.05f64..0.9, h in 0.55f64..0.95, seed in any::<u64>(), latency in 0usize..4) {
        let mut node = NodeConfig::new(1.0, CrossTraffic::fgn(h, util));
        node.latency = latency;
        let path = PathConfig::new(vec![node, node]);
        let pattern = draw_pattern(&InterSampleSpec::Geometric { p: 0.1 }, 4096, seed).unwrap();
        let r = simulate_path(&path, &pattern, ProbeKind::Single, seed).unwrap();
        for d in &r.probe_delays {
            prop_assert!(d.dropped || d.delay_slots >= r.d_min - 1e-12);
        }
    }
}
