use super::*;
use crate::network::{build_admittance, build_incidence, enumerate_scenarios, NetworkCase};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TWO_BUS: &str = include_str!("../../../../cases/two_bus.json");
const IEEE39: &str = include_str!("../../../../cases/ieee39.json");
const LIMITED_10: [BusId; 10] = [2, 3, 7, 9, 11, 13, 16, 17, 19, 21];

fn load(text: &str) -> (NetworkCase, AdmittanceMatrix) {
    let case = NetworkCase::from_json_str(text).unwrap();
    let y = build_admittance(&build_incidence(&case), case.branches());
    (case, y)
}

fn random_state(case: &NetworkCase, rng: &mut impl Rng, spread: f64) -> AngleState {
    let mut angles: Vec<f64> = (0..case.n_buses()).map(|_| rng.random_range(-spread..spread)).collect();
    angles[case.reference_index()] = 0.0;
    let mut mags: Vec<f64> = (0..case.n_buses()).map(|_| rng.random_range(0.95..1.06)).collect();
    mags[case.reference_index()] = 1.0;
    AngleState::new(case, 0, angles, mags).unwrap()
}

/// Random connected reactive network: a spanning path plus random chords.
fn random_reactive_case(rng: &mut impl Rng, n: u32) -> NetworkCase {
    let mut edges: Vec<(u32, u32, f64)> = (1..n).map(|i| (i, i + 1, rng.random_range(2.0..40.0))).collect();
    for _ in 0..n {
        let a = rng.random_range(1..=n);
        let b = rng.random_range(1..=n);
        if a != b {
            edges.push((a, b, rng.random_range(2.0..40.0)));
        }
    }
    let buses: Vec<String> = (1..=n)
        .map(|id| {
            format!(
                r#"{{"id":{id},"kind":"{}","v_mag":1.0}}"#,
                if id == 1 { "reference" } else { "load" }
            )
        })
        .collect();
    let branches: Vec<String> = edges
        .iter()
        .enumerate()
        .map(|(i, (a, b, s))| format!(r#"{{"id":{},"from":{a},"to":{b},"g":0.0,"b":{}}}"#, i + 1, -s))
        .collect();
    NetworkCase::from_json_str(&format!(
        r#"{{"version":1,"reference_bus":1,"buses":[{}],"branches":[{}]}}"#,
        buses.join(","),
        branches.join(",")
    ))
    .unwrap()
}

#[test]
fn two_bus_power_injection_by_hand() {
    let (case, y) = load(TWO_BUS);
    let state = AngleState::new(&case, 0, vec![0.0, -0.1], vec![1.0, 1.0]).unwrap();
    let p = active_power_injection(&y, &state);
    let expected = 10.0 * 0.1f64.sin();
    assert!((p[0] - expected).abs() < 1e-12);
    assert!((p[1] + expected).abs() < 1e-12);
}

#[test]
fn flat_reactive_network_injects_nothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let case = random_reactive_case(&mut rng, 7);
    let y = build_admittance(&build_incidence(&case), case.branches());
    let p = active_power_injection(&y, &AngleState::flat(&case, VoltageProfile::Flat));
    assert!(p.iter().all(|x| x.abs() < 1e-12));
}

#[test]
fn lossless_network_conserves_power() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let case = random_reactive_case(&mut rng, 9);
        let y = build_admittance(&build_incidence(&case), case.branches());
        let state = random_state(&case, &mut rng, 0.5);
        let total: f64 = active_power_injection(&y, &state).iter().sum();
        assert!(total.abs() < 1e-10, "{total}");
    }
}

#[test]
fn two_bus_flat_jacobian_and_dc_matrix() {
    let (case, y) = load(TWO_BUS);
    let placement = PmuPlacement::full(&case);
    let snap = evaluate_jacobian(&case, &y, &AngleState::flat(&case, VoltageProfile::Flat), &placement).unwrap();
    assert_eq!(snap.dim(), 1);
    assert!((snap.matrix()[(0, 0)] - 10.0).abs() < 1e-12);
    assert!((snap.log_abs_det() - 10f64.ln()).abs() < 1e-12);
    let dc = dc_matrix(&case, &y, &placement).unwrap();
    assert!((dc.matrix()[(0, 0)] - 10.0).abs() < 1e-12);
}

#[test]
fn unreduced_rows_sum_to_zero() {
    let (case, y) = load(IEEE39);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let state = random_state(&case, &mut rng, 0.4);
        let j = unreduced_jacobian(&y, &state);
        for row in j.row_iter() {
            let scale = row.iter().map(|x| x.abs()).fold(0.0, f64::max);
            assert!(row.sum().abs() <= 1e-9 * scale);
        }
    }
}

#[test]
fn full_reduction_is_unreduced_minus_reference() {
    let (case, y) = load(IEEE39);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let state = random_state(&case, &mut rng, 0.3);
    let full = unreduced_jacobian(&y, &state);
    let reduced = assemble(&case, &y, &state, &PmuPlacement::full(&case), JacobianModel::Ac(NeighborRule::Drop));
    let r = case.reference_index();
    let expected = full.remove_row(r).remove_column(r);
    assert!((reduced - expected).abs().max() < 1e-12);
}

#[test]
fn reactive_jacobian_is_symmetric_between_equal_angles() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10 {
        let case = random_reactive_case(&mut rng, 8);
        let y = build_admittance(&build_incidence(&case), case.branches());
        let mut angles: Vec<f64> = (0..8).map(|_| f64::from(rng.random_range(0..3u8)) * 0.1).collect();
        angles[0] = 0.0;
        let state = AngleState::new(&case, 0, angles.clone(), vec![1.02; 8]).unwrap();
        let j = unreduced_jacobian(&y, &state);
        for m in 0..8 {
            for n in 0..8 {
                if angles[m] == angles[n] {
                    assert!((j[(m, n)] - j[(n, m)]).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn small_signal_first_order() {
    let (case, y) = load(IEEE39);
    let placement = PmuPlacement::full(&case);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10 {
        let state = random_state(&case, &mut rng, 0.3);
        let j = assemble(&case, &y, &state, &placement, JacobianModel::Ac(NeighborRule::Drop));
        let delta = DVector::from_fn(placement.len(), |_, _| rng.random_range(-1e-5..1e-5));
        let mut moved = state.clone();
        for (i, &bus) in placement.indices().iter().enumerate() {
            moved.angles[bus] += delta[i];
        }
        let p0 = active_power_injection(&y, &state);
        let p1 = active_power_injection(&y, &moved);
        let dp = DVector::from_iterator(placement.len(), placement.indices().iter().map(|&b| p1[b] - p0[b]));
        let predicted = &j * &delta;
        assert!((dp - &predicted).norm() <= 1e-3 * predicted.norm());
    }
}

#[test]
fn limited_placement_drops_only_missing_diagonal_terms() {
    let (case, y) = load(IEEE39);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let full_state = random_state(&case, &mut rng, 0.3);
    let full_placement = PmuPlacement::full(&case);
    let limited = PmuPlacement::new(&case, &LIMITED_10).unwrap();
    let full = assemble(&case, &y, &full_state, &full_placement, JacobianModel::Ac(NeighborRule::Drop));

    // unobserved angles are unknown to the limited evaluation
    let observed: Vec<f64> = limited.indices().iter().map(|&i| full_state.angles[i]).collect();
    let mut state = AngleState::from_observed(&case, &limited, 0, &observed, VoltageProfile::Flat).unwrap();
    state.magnitudes = full_state.magnitudes.clone();
    let reduced = assemble(&case, &y, &state, &limited, JacobianModel::Ac(NeighborRule::Drop));
    assert_eq!(reduced.shape(), (10, 10));
    assert!(reduced.iter().all(|x| x.is_finite()));

    for (i, &m) in limited.indices().iter().enumerate() {
        for (j, &n) in limited.indices().iter().enumerate() {
            let fi = full_placement.position(m).unwrap();
            let fj = full_placement.position(n).unwrap();
            let diff = full[(fi, fj)] - reduced[(i, j)];
            if i != j {
                assert_eq!(diff, 0.0);
                continue;
            }
            // the missing terms are the unobserved, non-reference neighbors
            let missing: f64 = case
                .neighbors(m)
                .into_iter()
                .filter(|&nb| limited.position(nb).is_none() && nb != case.reference_index())
                .map(|nb| -full_placement.position(nb).map_or(0.0, |p| full[(fi, p)]))
                .sum();
            assert!((diff - missing).abs() < 1e-9, "bus {m}: {diff} vs {missing}");
            let has_hidden = case
                .neighbors(m)
                .iter()
                .any(|&nb| limited.position(nb).is_none() && nb != case.reference_index());
            assert_eq!(has_hidden, diff != 0.0);
        }
    }
}

#[test]
fn drop_rule_singles_out_isolated_observers() {
    let (case, y) = load(IEEE39);
    let limited = PmuPlacement::new(&case, &LIMITED_10).unwrap();
    assert_eq!(limited.isolated(&case), vec![7, 9, 11, 13]);
    let state = AngleState::flat(&case, VoltageProfile::Flat);
    assert!(matches!(
        evaluate_jacobian(&case, &y, &state, &limited),
        Err(Error::SingularJacobian { .. })
    ));
    let nominal = evaluate_with(
        &case,
        &y,
        &state,
        &limited,
        JacobianModel::Ac(NeighborRule::Nominal),
        SnapshotOrigin::Base,
    )
    .unwrap();
    assert_eq!(nominal.dim(), 10);
}

#[test]
fn dc_matrix_is_state_independent_and_matches_flat_ac() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let case = random_reactive_case(&mut rng, 9);
    let y = build_admittance(&build_incidence(&case), case.branches());
    let placement = PmuPlacement::full(&case);
    let dc = dc_matrix(&case, &y, &placement).unwrap();
    let again = dc_matrix(&case, &y, &placement).unwrap();
    assert_eq!(dc.matrix(), again.matrix());
    let s1 = random_state(&case, &mut rng, 0.5);
    let s2 = random_state(&case, &mut rng, 0.5);
    assert_eq!(
        assemble(&case, &y, &s1, &placement, JacobianModel::Dc),
        assemble(&case, &y, &s2, &placement, JacobianModel::Dc)
    );
    let flat_ac = evaluate_jacobian(&case, &y, &AngleState::flat(&case, VoltageProfile::Flat), &placement).unwrap();
    assert!((flat_ac.matrix() - dc.matrix()).abs().max() < 1e-12);
}

#[test]
fn ieee39_dimensions() {
    let (case, y) = load(IEEE39);
    let dc = dc_matrix(&case, &y, &PmuPlacement::full(&case)).unwrap();
    assert_eq!(dc.dim(), 38);
    let limited = PmuPlacement::new(&case, &LIMITED_10).unwrap();
    assert_eq!(limited.pmu_count(), 10);
    assert_eq!(PmuPlacement::full(&case).pmu_count(), 39);
}

#[test]
fn scenario_snapshots_follow_scenario_order() {
    let (case, _) = load(IEEE39);
    let set = enumerate_scenarios(&case, 1).unwrap();
    let state = AngleState::flat(&case, VoltageProfile::Flat);
    let placement = PmuPlacement::full(&case);
    assert!(evaluate_scenario_jacobians(&case, &[], &state, &placement, JacobianModel::Dc).is_empty());
    let snaps = evaluate_scenario_jacobians(&case, &set.scenarios, &state, &placement, JacobianModel::Ac(NeighborRule::Drop));
    assert_eq!(snaps.len(), set.len());
    for (s, snap) in set.scenarios.iter().zip(&snaps) {
        assert_eq!(snap.as_ref().unwrap().origin, SnapshotOrigin::Scenario(s.id));
    }
}

#[test]
fn unobserved_line_is_invisible_to_limited_snapshot() {
    let (case, y) = load(IEEE39);
    let set = enumerate_scenarios(&case, 1).unwrap();
    let limited = PmuPlacement::new(&case, &LIMITED_10).unwrap();
    let model = JacobianModel::Ac(NeighborRule::Nominal);
    let state = AngleState::flat(&case, VoltageProfile::Flat);
    let base = evaluate_with(&case, &y, &state, &limited, model, SnapshotOrigin::Base).unwrap();
    // line 9 joins buses 5 and 6, neither monitored
    let hidden = set.find(&[9]).unwrap();
    let snap = evaluate_scenario_jacobians(&case, std::slice::from_ref(hidden), &state, &limited, model)
        .pop()
        .unwrap()
        .unwrap();
    assert_eq!(snap.matrix(), base.matrix());
}

fn check_low_rank(case: &NetworkCase, placement: &PmuPlacement, state: &AngleState, model: JacobianModel) {
    let y = build_admittance(&build_incidence(case), case.branches());
    let base = assemble(case, &y, state, placement, model);
    let inc = build_incidence(case);
    for branch in case.branches() {
        let y_l = build_admittance(&inc.without_lines(&[branch.id]), case.branches());
        let direct = assemble(case, &y_l, state, placement, model);
        let mut updated = base.clone();
        if let Some(upd) = line_update(case, branch, state, placement, model) {
            for &(i, ui) in &upd.u {
                for &(j, vj) in &upd.v {
                    updated[(i, j)] += ui * vj;
                }
            }
        }
        let scale = base.abs().max();
        assert!(
            (&updated - &direct).abs().max() <= 1e-12 * scale,
            "line {} model {model:?}",
            branch.id
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn rank_one_updates_match_direct_rebuild(seed in any::<u64>(), which in 0usize..3, limited in any::<bool>()) {
        let (case, _) = load(IEEE39);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = random_state(&case, &mut rng, 0.3);
        let placement = if limited {
            PmuPlacement::new(&case, &LIMITED_10).unwrap()
        } else {
            PmuPlacement::full(&case)
        };
        let model = [JacobianModel::Ac(NeighborRule::Drop), JacobianModel::Ac(NeighborRule::Nominal), JacobianModel::Dc][which];
        check_low_rank(&case, &placement, &state, model);
    }
}
