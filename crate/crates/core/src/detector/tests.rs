use super::*;
use crate::jacobian::{evaluate_with, PmuPlacement, SnapshotOrigin, VoltageProfile};
use crate::network::{build_admittance, build_incidence, enumerate_scenarios, enumerate_scenarios_among, NetworkCase};
use nalgebra::DMatrix;
use proptest::prelude::{prop, prop_assert, proptest};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const IEEE39: &str = include_str!("../../../../cases/ieee39.json");
const TRIANGLE: &str = include_str!("../../../../cases/triangle.json");

fn ieee39() -> NetworkCase {
    NetworkCase::from_json_str(IEEE39).unwrap()
}

fn state_with_w(w: Vec<f64>) -> GlrState {
    let case = NetworkCase::from_json_str(TRIANGLE).unwrap();
    let ids = (1..=w.len()).collect();
    GlrState::from_parts(ids, w, AngleState::flat(&case, VoltageProfile::Flat)).unwrap()
}

fn random_state(case: &NetworkCase, rng: &mut impl Rng) -> AngleState {
    let mut angles: Vec<f64> = (0..case.n_buses()).map(|_| rng.random_range(-0.3..0.3)).collect();
    angles[case.reference_index()] = 0.0;
    let mut mags: Vec<f64> = (0..case.n_buses()).map(|_| rng.random_range(0.95..1.06)).collect();
    mags[case.reference_index()] = 1.0;
    AngleState::new(case, 0, angles, mags).unwrap()
}

#[test]
fn thresholds_match_table_one() {
    assert!((threshold_from_arl(1.0, 30.0, 39).unwrap() - 18.43).abs() < 0.01);
    assert!((threshold_from_arl(1.0 / 24.0, 30.0, 10).unwrap() - 13.89).abs() < 0.01);
    assert!((threshold_from_arl(30.0, 30.0, 1000).unwrap() - 25.08).abs() < 0.01);
    assert!(threshold_from_arl(0.0, 30.0, 39).is_err());
    assert!(threshold_from_arl(1.0, -30.0, 39).is_err());
    assert!(threshold_from_arl(1.0, 30.0, 0).is_err());
    assert!(threshold_from_arl(f64::NAN, 30.0, 39).is_err());
}

#[test]
fn config_validation() {
    let ac = JacobianModel::Ac(NeighborRule::Drop);
    assert!(GlrConfig::new(0.0, 18.0, 39, ac).is_err());
    assert!(GlrConfig::new(0.005, -1.0, 39, ac).is_err());
    assert!(GlrConfig::new(0.005, 18.0, 0, ac).is_err());
    let c = GlrConfig::default();
    assert!((c.threshold - 18.43).abs() < 0.01);
    assert_eq!(c.arl0_samples, 86_400.0 * 30.0);
}

#[test]
fn top3_orders_and_breaks_ties() {
    let s = state_with_w(vec![5.0, 7.0, 6.0]);
    assert_eq!(identify_top3(&s), vec![(2, 7.0), (3, 6.0), (1, 5.0)]);
    let s = state_with_w(vec![1.0; 5]);
    assert_eq!(identify_top3(&s), vec![(1, 1.0), (2, 1.0), (3, 1.0)]);
    let s = state_with_w(vec![0.5, 0.25]);
    assert_eq!(identify_top3(&s).len(), 2);
    let case = NetworkCase::from_json_str(TRIANGLE).unwrap();
    assert!(matches!(
        GlrState::new(vec![], AngleState::flat(&case, VoltageProfile::Flat)),
        Err(Error::EmptyScenarioSet)
    ));
}

#[test]
fn recursion_arithmetic() {
    let mut s = state_with_w(vec![0.0, 0.0]);
    s.apply(&[Some(-1.0), Some(-0.5)]).unwrap();
    assert_eq!(s.statistics(), &[0.0, 0.0]);

    let mut s = state_with_w(vec![17.0, 3.0]);
    s.apply(&[Some(2.0), None]).unwrap();
    assert_eq!(s.statistics(), &[19.0, 3.0]);
    assert!(s.overall() >= 18.43);
    assert_eq!(identify_top3(&s)[0], (1, 19.0));
    assert!(s.apply(&[Some(1.0)]).is_err());
}

#[test]
fn gap_policy() {
    assert_eq!(increment_span(4, 5).unwrap(), 1);
    assert_eq!(increment_span(4, 6).unwrap(), 2);
    assert_eq!(increment_span(4, 10).unwrap(), 6);
    assert!(matches!(increment_span(4, 11), Err(Error::SampleGap { gap: 6, max: 5 })));
    assert!(matches!(increment_span(4, 4), Err(Error::NonIncreasingSample { .. })));
    assert!(matches!(increment_span(4, 3), Err(Error::NonIncreasingSample { .. })));
}

fn brute_force(z: &[f64], k: usize) -> f64 {
    (0..=k)
        .map(|i| z[i..=k].iter().sum::<f64>())
        .fold(0.0, f64::max)
}

proptest! {
    #[test]
    fn recursion_equals_double_max(z in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 60), 1..4)) {
        let n = z.len();
        let mut s = state_with_w(vec![0.0; n]);
        for k in 0..60 {
            let zk: Vec<Option<f64>> = z.iter().map(|row| Some(row[k])).collect();
            s.apply(&zk).unwrap();
            let direct: Vec<f64> = z.iter().map(|row| brute_force(row, k)).collect();
            for (w, d) in s.statistics().iter().zip(&direct) {
                prop_assert!(*w >= 0.0);
                prop_assert!((w - d).abs() <= 1e-9 * d.abs().max(1.0));
            }
            // max over scenarios of the recursions is G_k of Eq. (18)
            let g = direct.iter().copied().fold(0.0, f64::max);
            prop_assert!((s.overall() - g).abs() <= 1e-9 * g.max(1.0));
        }
    }
}

/// `ln N(x; 0, σ² (J^T J)^-1)` through the covariance matrix itself.
pub(crate) fn gaussian_log_density(x: &DVector<f64>, j: &DMatrix<f64>, sigma2: f64) -> f64 {
    let k = x.len() as f64;
    let cov = (j.transpose() * j).try_inverse().unwrap() * sigma2;
    let chol = cov.clone().cholesky().unwrap();
    let log_det_cov: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let quad = x.dot(&chol.solve(x));
    -0.5 * (k * (2.0 * std::f64::consts::PI).ln() + log_det_cov + quad)
}

#[test]
fn llr_matches_density_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..200 {
        let k = rng.random_range(1..=5);
        let j0 = DMatrix::from_fn(k, k, |i, j| rng.random_range(-1.0..1.0) + if i == j { 3.0 } else { 0.0 });
        let jl = DMatrix::from_fn(k, k, |i, j| rng.random_range(-1.0..1.0) + if i == j { 3.0 } else { 0.0 });
        let x = DVector::from_fn(k, |_, _| rng.random_range(-0.2..0.2));
        let sigma2 = rng.random_range(0.001..0.1);
        let base = JacobianSnapshot::new(SnapshotOrigin::Base, j0.clone()).unwrap();
        let scen = JacobianSnapshot::new(SnapshotOrigin::Scenario(0), jl.clone()).unwrap();
        let z = log_likelihood_ratio(&x, &base, &scen, sigma2).unwrap();
        let oracle = gaussian_log_density(&x, &jl, sigma2) - gaussian_log_density(&x, &j0, sigma2);
        assert!((z - oracle).abs() <= 1e-8 * oracle.abs().max(1.0), "{z} vs {oracle}");
    }
}

#[test]
fn llr_trivial_cases() {
    let j = DMatrix::from_row_slice(2, 2, &[3.0, -1.0, -1.0, 2.0]);
    let jl = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]);
    let base = JacobianSnapshot::new(SnapshotOrigin::Base, j.clone()).unwrap();
    let same = JacobianSnapshot::new(SnapshotOrigin::Scenario(0), j).unwrap();
    let scen = JacobianSnapshot::new(SnapshotOrigin::Scenario(1), jl).unwrap();
    let x = DVector::from_vec(vec![0.3, -0.7]);
    assert_eq!(log_likelihood_ratio(&x, &base, &same, 0.005).unwrap(), 0.0);
    let zero = DVector::zeros(2);
    assert_eq!(
        log_likelihood_ratio(&zero, &base, &scen, 0.005).unwrap(),
        scen.log_abs_det() - base.log_abs_det()
    );
    assert!(matches!(
        log_likelihood_ratio(&DVector::zeros(3), &base, &scen, 0.005),
        Err(Error::DimensionMismatch { .. })
    ));
}

#[test]
fn strategies_agree_on_ieee39() {
    let case = ieee39();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let singles = enumerate_scenarios(&case, 1).unwrap();
    let pairs = enumerate_scenarios_among(&case, &[1, 3, 5, 9, 12, 22, 30], 2).unwrap();
    let full = PmuPlacement::full(&case);
    let limited = PmuPlacement::new(&case, &[2, 3, 4, 5, 6, 7, 8, 9, 11, 13, 16, 17, 19, 21]).unwrap();
    let nominal = JacobianModel::Ac(NeighborRule::Nominal);
    for (set, placement, model) in [
        (&singles, &full, JacobianModel::Ac(NeighborRule::Drop)),
        (&pairs, &full, JacobianModel::Ac(NeighborRule::Drop)),
        (&singles, &limited, nominal),
        (&pairs, &limited, nominal),
    ] {
        let dense = Evaluator::new(&case, &set.scenarios, placement, model, Strategy::Dense).unwrap();
        let low = Evaluator::new(&case, &set.scenarios, placement, model, Strategy::LowRank).unwrap();
        for _ in 0..5 {
            let prev = random_state(&case, &mut rng);
            let delta = DVector::from_fn(placement.len(), |_, _| rng.random_range(-0.02..0.02));
            let a = dense.log_likelihood_ratios(&prev, &delta, 0.005).unwrap();
            let b = low.log_likelihood_ratios(&prev, &delta, 0.005).unwrap();
            for (x, y) in a.iter().zip(&b) {
                let (x, y) = (x.unwrap(), y.unwrap());
                assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0), "{x} vs {y}");
            }
        }
    }
}

#[test]
fn singular_scenario_is_skipped_and_keeps_its_statistic() {
    let case = NetworkCase::from_json_str(TRIANGLE).unwrap();
    let set = enumerate_scenarios(&case, 1).unwrap();
    let placement = PmuPlacement::new(&case, &[2]).unwrap();
    let delta = DVector::from_vec(vec![0.01]);
    let prev = AngleState::flat(&case, VoltageProfile::Flat);
    for strategy in [Strategy::Dense, Strategy::LowRank] {
        let ev = Evaluator::new(&case, &set.scenarios, &placement, JacobianModel::Ac(NeighborRule::Drop), strategy).unwrap();
        let z = ev.log_likelihood_ratios(&prev, &delta, 0.005).unwrap();
        // line 1 (1-2) is bus 2's only link to a known angle
        let pos = set.scenarios.iter().position(|s| s.removed == [1]).unwrap();
        assert!(z[pos].is_none(), "{strategy:?}");
        assert!(z.iter().enumerate().all(|(i, v)| i == pos || v.is_some()));

        let mut s = GlrState::from_parts(set.scenarios.iter().map(|s| s.id).collect(), vec![2.5; 3], prev.clone()).unwrap();
        s.apply(&z).unwrap();
        assert_eq!(s.statistics()[pos], 2.5);
    }
}

#[test]
fn dc_evaluator_ignores_state() {
    let case = ieee39();
    let set = enumerate_scenarios(&case, 1).unwrap();
    let placement = PmuPlacement::full(&case);
    let ev = Evaluator::new(&case, &set.scenarios, &placement, JacobianModel::Dc, Strategy::LowRank).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let delta = DVector::from_fn(placement.len(), |_, _| rng.random_range(-0.02..0.02));
    let a = ev.log_likelihood_ratios(&random_state(&case, &mut rng), &delta, 0.005).unwrap();
    let b = ev.log_likelihood_ratios(&random_state(&case, &mut rng), &delta, 0.005).unwrap();
    assert_eq!(a, b);
    let y = build_admittance(&build_incidence(&case), case.branches());
    let base = evaluate_with(&case, &y, &AngleState::flat(&case, VoltageProfile::Flat), &placement, JacobianModel::Dc, SnapshotOrigin::Base).unwrap();
    let scen = ev.scenario_snapshot(0, &AngleState::flat(&case, VoltageProfile::Flat)).unwrap();
    let z = log_likelihood_ratio(&delta, &base, &scen, 0.005).unwrap();
    assert!((z - a[0].unwrap()).abs() < 1e-9 * z.abs().max(1.0));
}

fn random_walk(case: &NetworkCase, placement: &PmuPlacement, n: u64, step: f64, seed: u64) -> Vec<AngleState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = vec![0.0; placement.len()];
    (0..n)
        .map(|k| {
            if k > 0 {
                theta.iter_mut().for_each(|t| *t += rng.random_range(-step..step));
            }
            AngleState::from_observed(case, placement, k, &theta, VoltageProfile::Flat).unwrap()
        })
        .collect()
}

#[test]
fn gap_scales_the_variance() {
    let case = ieee39();
    let set = enumerate_scenarios(&case, 1).unwrap();
    let placement = PmuPlacement::full(&case);
    let ev = Evaluator::new(&case, &set.scenarios, &placement, JacobianModel::Ac(NeighborRule::Drop), Strategy::LowRank).unwrap();
    let config = GlrConfig::new(0.005, 1e9, 39, JacobianModel::Ac(NeighborRule::Drop)).unwrap();
    let walk = random_walk(&case, &placement, 4, 0.01, 1);
    let mut state = GlrState::new(set.scenarios.iter().map(|s| s.id).collect(), walk[0].clone()).unwrap();
    step(&mut state, walk[3].clone(), &ev, &config).unwrap();
    let delta = walk[3].observed(&placement) - walk[0].observed(&placement);
    let z = ev.log_likelihood_ratios(&walk[0], &delta, 0.015).unwrap();
    let expected: Vec<f64> = z.iter().map(|z| z.unwrap().max(0.0)).collect();
    assert_eq!(state.statistics(), expected.as_slice());
    assert_eq!(state.sample_index(), 3);

    let far = AngleState { sample_index: 10, ..walk[1].clone() };
    assert!(matches!(step(&mut state, far, &ev, &config), Err(Error::SampleGap { .. })));
    let back = AngleState { sample_index: 2, ..walk[1].clone() };
    assert!(matches!(step(&mut state, back, &ev, &config), Err(Error::NonIncreasingSample { .. })));
}

#[test]
fn run_stream_stops_resets_and_traces() {
    let case = ieee39();
    let set = enumerate_scenarios(&case, 1).unwrap();
    let placement = PmuPlacement::full(&case);
    let model = JacobianModel::Ac(NeighborRule::Drop);
    let ev = Evaluator::new(&case, &set.scenarios, &placement, model, Strategy::LowRank).unwrap();
    // large, unstructured increments push some W up fast
    let walk = random_walk(&case, &placement, 400, 0.05, 2);
    let config = GlrConfig::new(0.005, 10.0, 39, model).unwrap();

    let empty: Vec<Result<AngleState>> = vec![];
    assert!(run_stream(empty, &ev, &config, RunOptions::default()).is_err());

    let once = run_stream(walk.iter().cloned().map(Ok), &ev, &config, RunOptions { trace: true, scenario_trace: true, ..Default::default() }).unwrap();
    let first = once.first_alarm().expect("alarm").clone();
    assert_eq!(once.events.len(), 1);
    assert!(first.overall_statistic >= config.threshold);
    assert!(first.top3.windows(2).all(|w| w[0].1 >= w[1].1));
    assert_eq!(once.processed, first.alarm_sample);
    assert_eq!(once.trace.len() as u64, once.processed);
    assert!(once.trace.last().unwrap().alarm);
    assert!(once.trace[..once.trace.len() - 1].iter().all(|r| !r.alarm));
    let rows = first.per_scenario_trace.as_ref().unwrap();
    assert_eq!(rows.len() as u64, first.alarm_sample);
    assert!(rows.iter().flatten().all(|w| *w >= 0.0));

    let many = run_stream(walk.iter().cloned().map(Ok), &ev, &config, RunOptions { continue_after_alarm: true, ..Default::default() }).unwrap();
    assert_eq!(many.events[0].alarm_sample, first.alarm_sample);
    assert_eq!(many.processed, 399);
    assert!(many.events.windows(2).all(|w| w[0].alarm_sample < w[1].alarm_sample));

    let mut buf = Vec::new();
    write_trace_jsonl(&mut buf, &once.trace).unwrap();
    let line = String::from_utf8(buf).unwrap().lines().next().unwrap().to_string();
    let v: serde_json::Value = serde_json::from_str(&line).unwrap();
    for key in ["sample", "overall_W", "alarm", "top3"] {
        assert!(v.get(key).is_some(), "{key} missing from {line}");
    }
    assert!(once.latency().unwrap().mean_ms > 0.0);
}

#[test]
fn higher_threshold_never_alarms_earlier() {
    let case = ieee39();
    let set = enumerate_scenarios(&case, 1).unwrap();
    let placement = PmuPlacement::full(&case);
    let model = JacobianModel::Ac(NeighborRule::Drop);
    let ev = Evaluator::new(&case, &set.scenarios, &placement, model, Strategy::LowRank).unwrap();
    for seed in 0..4 {
        let walk = random_walk(&case, &placement, 300, 0.03, seed);
        let alarm = |c: f64| {
            let config = GlrConfig::new(0.005, c, 39, model).unwrap();
            run_stream(walk.iter().cloned().map(Ok), &ev, &config, RunOptions::default())
                .unwrap()
                .first_alarm()
                .map_or(u64::MAX, |e| e.alarm_sample)
        };
        let times: Vec<u64> = [2.0, 5.0, 10.0, 20.0, 40.0].into_iter().map(alarm).collect();
        assert!(times.windows(2).all(|w| w[0] <= w[1]), "{times:?}");
    }
}
