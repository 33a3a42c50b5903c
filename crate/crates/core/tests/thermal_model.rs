mod common;

use approx::assert_relative_eq;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use thermident_core::building::{ElementKind, SCHEMA};
use thermident_core::model::flux::disturbance;
use thermident_core::model::*;
use thermident_core::simulation::rollout::{rollout, step, zero_gains};
use thermident_core::{twin, BuildingDescription, Error, ParameterVector};

use common::{closed_two_zone, layer, naive_step, probe, single_room};

fn params(zones: usize) -> ParameterVector {
    ParameterVector { c_ig: vec![4.0; zones], ..twin::reference_parameters() }
}

#[test]
fn twin_state_count_matches_element_count() {
    let desc = twin::building();
    let rooms = desc.elements.iter().filter(|e| e.kind == ElementKind::RoomAir).count();
    let layered = desc.elements.len() - rooms;
    let net = build_rc_network(&desc, &twin::reference_parameters(), &NetworkOptions::default()).unwrap();
    assert_eq!(rooms, 6);
    assert_eq!(net.len(), rooms + 2 * layered);
    assert_eq!(net.len(), 62);

    let three = NetworkOptions { wall_nodes: 3, ..Default::default() };
    let net3 = build_rc_network(&desc, &twin::reference_parameters(), &three).unwrap();
    assert_eq!(net3.len(), rooms + 3 * layered);
}

#[test]
fn single_room_network_conserves_heat() {
    let desc = BuildingDescription::from_json_str(&single_room(serde_json::json!([layer(0.1, 1.0, 2000.0, 900.0)]))).unwrap();
    let net = build_rc_network(&desc, &params(1), &NetworkOptions::default()).unwrap();
    assert_eq!(net.len(), 3);
    // conductance matrix L = -C A_t is symmetric; rows of A_t sum to zero
    let l = -DMatrix::from_diagonal(&net.capacitance) * &net.a_t;
    assert_relative_eq!(l.clone(), l.transpose(), max_relative = 1e-12);
    for i in 0..3 {
        assert!(net.a_t.row(i).sum().abs() < 1e-12 * net.a_t[(i, i)].abs());
        for j in 0..3 {
            if i != j {
                assert!(net.a_t[(i, j)] >= 0.0);
            }
        }
        assert!(net.a_t[(i, i)] < 0.0);
    }
    assert!(net.a_t[(0, 1)] > 0.0 && net.a_t[(1, 0)] > 0.0);
}

use nalgebra::DMatrix;

#[test]
fn room_air_capacity_uses_air_properties() {
    let desc = BuildingDescription::from_json_str(&single_room(serde_json::json!([layer(0.1, 1.0, 2000.0, 900.0)]))).unwrap();
    let net = build_rc_network(&desc, &params(1), &NetworkOptions::default()).unwrap();
    assert_relative_eq!(net.capacitance[0], 1.2 * 1005.0 * 30.0, max_relative = 1e-12);
    // two slabs share the layer's heat capacity
    let total: f64 = net.capacitance.iter().skip(1).sum();
    assert_relative_eq!(total, 2000.0 * 900.0 * 0.1 * 12.0, max_relative = 1e-12);
}

#[test]
fn zero_thickness_layer_is_rejected() {
    let text = single_room(serde_json::json!([layer(0.0, 1.0, 2000.0, 900.0)]));
    let err = BuildingDescription::from_json_str(&text).unwrap_err();
    assert_eq!(err.code(), "E_SCHEMA");
}

#[test]
fn missing_adjacency_reports_line() {
    let text = twin::BUILDING_JSON.replacen("\"adjacency\"", "\"neighbours\"", 1);
    let err = BuildingDescription::from_json_str(&text).unwrap_err();
    assert_eq!(err.code(), "E_SCHEMA");
    assert!(err.line().is_some(), "{err}");
}

#[test]
fn asymmetric_adjacency_is_rejected() {
    let mut desc = twin::building();
    desc.zones[0].adjacency.retain(|z| z != "W");
    assert!(matches!(desc.validate(), Err(Error::Schema { .. })));
}

#[test]
fn twin_description_round_trips() {
    let desc = twin::building();
    assert_eq!(desc.schema, SCHEMA);
    let again = BuildingDescription::from_json_str(&desc.to_json_pretty().unwrap()).unwrap();
    assert_eq!(desc, again);
}

#[test]
fn hull_flux_worked_examples() {
    let p = twin::reference_parameters();
    assert_eq!(hull_flux_scalar(&p, 1.0, 0.0, 0.0, 0.0), 0.0);
    assert_relative_eq!(hull_flux_scalar(&p, 2.0, 0.0, 1.0, 100.0), 171.0, max_relative = 1e-12);
    assert_relative_eq!(hull_flux_scalar(&p, 0.0, 3.0, 2.0, 200.0), 21.78, max_relative = 1e-12);
}

#[test]
fn hull_flux_vanishes_off_the_hull() {
    let desc = twin::building();
    let p = twin::reference_parameters();
    let net = build_rc_network(&desc, &p, &NetworkOptions::default()).unwrap();
    let x = DVector::from_element(net.len(), 20.0);
    let mut v = DVector::from_element(disturbance::LEN, 300.0);
    v[disturbance::AMBIENT] = 5.0;
    let q = hull_flux(&net, &x, &v, &p).unwrap();
    let mut exposed = std::collections::HashSet::new();
    for face in &net.hull {
        exposed.insert(face.outer_state);
        if face.a_win > 0.0 {
            exposed.extend(face.room_state);
        }
    }
    for i in 0..net.len() {
        assert_eq!(q[i] != 0.0, exposed.contains(&i), "state {i}");
    }
}

#[test]
fn hvac_flux_worked_examples() {
    let desc = closed_two_zone();
    let net = build_rc_network(&desc, &params(2), &NetworkOptions::default()).unwrap();
    let room_a = net.room_states[0];
    let mut x = DVector::from_element(net.len(), 20.0);
    let mut v = DVector::zeros(disturbance::LEN);
    v[disturbance::SUPPLY] = 25.0;
    let u = DVector::from_vec(vec![0.1, 0.0]);
    let q = hvac_flux(&net, &x, &v, &u).unwrap();
    assert_relative_eq!(q[room_a], 502.5, max_relative = 1e-12);
    assert_eq!(q.iter().filter(|f| **f != 0.0).count(), 1);

    assert_eq!(hvac_flux(&net, &x, &v, &DVector::zeros(2)).unwrap().norm(), 0.0);
    x[room_a] = 25.0;
    assert_eq!(hvac_flux(&net, &x, &v, &u).unwrap()[room_a], 0.0);

    let bad = DVector::from_vec(vec![-0.01, 0.0]);
    assert!(matches!(hvac_flux(&net, &x, &v, &bad), Err(Error::NegativeAirflow { index: 0, .. })));
}

#[test]
fn ig_flux_worked_examples() {
    let doc = single_room(serde_json::json!([layer(0.1, 1.0, 2000.0, 900.0)]));
    let desc = BuildingDescription::from_json_str(&doc).unwrap();
    let net = build_rc_network(&desc, &params(1), &NetworkOptions::default()).unwrap();
    let q = ig_flux(&net, &[18.8], &DVector::zeros(1)).unwrap();
    assert_relative_eq!(q[0], 188.0, max_relative = 1e-12);
    assert_eq!(q.rows(1, 2).norm(), 0.0);
    assert_eq!(ig_flux(&net, &[0.0], &DVector::zeros(1)).unwrap().norm(), 0.0);

    let mut big = doc.replace("\"floor_area\":10.0", "\"floor_area\":50.0");
    big = big.replace("\"floor_area\": 10.0", "\"floor_area\": 50.0");
    let desc = BuildingDescription::from_json_str(&big).unwrap();
    let net = build_rc_network(&desc, &params(1), &NetworkOptions::default()).unwrap();
    let q = ig_flux(&net, &[0.3], &DVector::from_element(1, 1.7)).unwrap();
    assert_relative_eq!(q[0], 100.0, max_relative = 1e-12);
}

#[test]
fn matrix_form_equals_flux_sum_on_random_probes() {
    let desc = twin::building();
    let p = twin::reference_parameters();
    let model = build_model(&desc, &p, &NetworkOptions::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let x = probe(&mut rng, model.states(), 5.0, 35.0);
        let mut v = probe(&mut rng, disturbance::LEN, 0.0, 600.0);
        v[disturbance::AMBIENT] = probe(&mut rng, 1, -10.0, 35.0)[0];
        v[disturbance::SUPPLY] = probe(&mut rng, 1, 12.0, 30.0)[0];
        let u = probe(&mut rng, model.inputs(), 0.0, 0.5);
        let f = probe(&mut rng, model.zones(), -5.0, 20.0);
        let matrix = model.rhs(&x, &v, &u, &f);
        let oracle = flux_rhs(&model.network, &p, &x, &v, &u, &f).unwrap();
        let scale = oracle.amax().max(1e-300);
        assert!((matrix - &oracle).amax() / scale < 1e-10);
    }
}

#[test]
fn linear_part_when_airflow_is_zero() {
    let desc = twin::building();
    let model = build_model(&desc, &twin::reference_parameters(), &NetworkOptions::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = probe(&mut rng, model.states(), 10.0, 30.0);
    let v = probe(&mut rng, disturbance::LEN, 0.0, 300.0);
    let f = probe(&mut rng, model.zones(), 0.0, 10.0);
    let c_ig = DVector::from_column_slice(&model.params.c_ig);
    let linear = &model.a * &x + &model.b_v * &v + &model.b_ig * (&c_ig + &f);
    let full = model.rhs(&x, &v, &DVector::zeros(model.inputs()), &f);
    assert_relative_eq!(linear, full, max_relative = 1e-12);
}

#[test]
fn uniform_state_at_ambient_is_an_equilibrium() {
    let desc = twin::building();
    let p = ParameterVector { c_ig: vec![0.0; 6], ..twin::reference_parameters() };
    let model = build_model(&desc, &p, &NetworkOptions::default()).unwrap();
    let x = DVector::from_element(model.states(), 0.0);
    let v = DVector::zeros(disturbance::LEN);
    let rhs = model.rhs(&x, &v, &DVector::zeros(6), &DVector::zeros(6));
    assert_eq!(rhs.amax(), 0.0);

    // uniform 18 °C everywhere including ambient and supply air
    let x = DVector::from_element(model.states(), 18.0);
    let mut v = DVector::zeros(disturbance::LEN);
    v[disturbance::AMBIENT] = 18.0;
    v[disturbance::SUPPLY] = 18.0;
    let u = DVector::from_element(6, 0.2);
    assert!(model.rhs(&x, &v, &u, &DVector::zeros(6)).amax() < 1e-12);
    let dm = discretize(&model, 900.0).unwrap();
    let next = step(&dm, &x, &u, &v, &DVector::zeros(6)).unwrap();
    assert!((next - &x).amax() < 1e-10);
}

#[test]
fn structural_invariants() {
    let desc = twin::building();
    let model = build_model(&desc, &twin::reference_parameters(), &NetworkOptions::default()).unwrap();
    let net = &model.network;
    let c = model.output();
    for z in 0..net.zones() {
        assert_relative_eq!(c.row(z).sum(), 1.0, max_relative = 1e-14);
        for i in 0..net.len() {
            assert!(c[(z, i)] >= 0.0);
            if c[(z, i)] > 0.0 {
                assert_eq!(net.state_zone[i], Some(z));
                assert!(net.is_room(i));
            }
        }
    }
    for i in 0..net.len() {
        assert!(net.a_t[(i, i)] <= 0.0);
        for j in 0..net.len() {
            if i != j {
                assert!(net.a_t[(i, j)] >= 0.0);
            }
        }
    }
    for z in 0..net.zones() {
        for i in 0..net.len() {
            if model.b_ig[(i, z)] != 0.0 {
                assert!(net.is_room(i) && net.state_zone[i] == Some(z));
            }
        }
    }
}

#[test]
fn closed_network_conserves_heat() {
    let desc = closed_two_zone();
    let p = ParameterVector { c_ig: vec![0.0; 2], ..twin::reference_parameters() };
    let model = build_model(&desc, &p, &NetworkOptions::default()).unwrap();
    let cap = model.network.capacitance.clone();
    // continuous: 1ᵀ C A = 0
    let weighted = cap.transpose() * &model.a;
    assert!(weighted.amax() < 1e-9 * cap.max() * model.a.amax());

    let dm = discretize(&model, 900.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x0 = probe(&mut rng, dm.states(), 10.0, 30.0);
    let n = 1000;
    let zeros_u = vec![DVector::zeros(2); n];
    let zeros_v = vec![DVector::zeros(disturbance::LEN); n];
    let traj = rollout(&dm, &x0, &zeros_u, &zeros_v, &zero_gains(2, n), n).unwrap();
    let energy0 = cap.dot(&x0);
    for x in &traj.states {
        assert_relative_eq!(cap.dot(x), energy0, max_relative = 1e-8);
    }
    // and it relaxes to the capacitance-weighted mean
    let mean = energy0 / cap.sum();
    assert!((traj.states[n].add_scalar(-mean)).amax() < 1e-3);
}

#[test]
fn raising_supply_temperature_never_cools_a_room() {
    let desc = twin::building();
    let model = build_model(&desc, &twin::reference_parameters(), &NetworkOptions::default()).unwrap();
    let dm = discretize(&model, 900.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let x = probe(&mut rng, dm.states(), 15.0, 28.0);
        let mut v = probe(&mut rng, disturbance::LEN, 0.0, 400.0);
        v[disturbance::AMBIENT] = 10.0;
        v[disturbance::SUPPLY] = 14.0;
        let u = probe(&mut rng, 6, 0.05, 0.5);
        let f = DVector::zeros(6);
        let base = step(&dm, &x, &u, &v, &f).unwrap();
        v[disturbance::SUPPLY] = 18.0;
        let warmer = step(&dm, &x, &u, &v, &f).unwrap();
        for &r in &dm.network().room_states {
            assert!(warmer[r] >= base[r]);
        }
    }
}

#[test]
fn discrete_step_matches_dense_oracle() {
    let desc = twin::building();
    let model = build_model(&desc, &twin::reference_parameters(), &NetworkOptions::default()).unwrap();
    let dm = discretize(&model, 900.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let x = probe(&mut rng, dm.states(), 10.0, 30.0);
        let v = probe(&mut rng, disturbance::LEN, 0.0, 500.0);
        let u = probe(&mut rng, 6, 0.0, 0.6);
        let f = probe(&mut rng, 6, -5.0, 25.0);
        let fast = step(&dm, &x, &u, &v, &f).unwrap();
        let dense = naive_step(&dm, &x, &u, &v, &f);
        assert!((fast - &dense).amax() < 1e-10 * dense.amax());
        // transition/forcing split agrees as well
        let split = dm.transition(&u) * &x + dm.forcing(&u, &v, &f);
        assert!((split - &dense).amax() < 1e-10 * dense.amax());
    }
}

#[test]
fn discrete_step_is_affine_in_airflow() {
    let desc = twin::building();
    let model = build_model(&desc, &twin::reference_parameters(), &NetworkOptions::default()).unwrap();
    let dm = discretize(&model, 900.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = probe(&mut rng, dm.states(), 10.0, 30.0);
    let v = probe(&mut rng, disturbance::LEN, 0.0, 500.0);
    let f = probe(&mut rng, 6, 0.0, 10.0);
    let u1 = probe(&mut rng, 6, 0.0, 0.3);
    let u2 = probe(&mut rng, 6, 0.0, 0.3);
    let z = DVector::zeros(6);
    let s = |u: &DVector<f64>| step(&dm, &x, u, &v, &f).unwrap();
    let lhs = s(&(&u1 + &u2)) - s(&z);
    let rhs = (s(&u1) - s(&z)) + (s(&u2) - s(&z));
    assert!((lhs - rhs).amax() < 1e-10);
}

#[test]
fn unsupported_step_is_rejected() {
    let desc = twin::building();
    let model = build_model(&desc, &twin::reference_parameters(), &NetworkOptions::default()).unwrap();
    assert!(matches!(discretize(&model, 0.0), Err(Error::Config(_))));
    assert!(matches!(discretize(&model, -5.0), Err(Error::Config(_))));
}

#[test]
fn dimension_mismatch_is_an_error() {
    let desc = twin::building();
    let model = build_model(&desc, &twin::reference_parameters(), &NetworkOptions::default()).unwrap();
    let dm = discretize(&model, 900.0).unwrap();
    let x = DVector::zeros(dm.states());
    let r = step(&dm, &x, &DVector::zeros(5), &DVector::zeros(6), &DVector::zeros(6));
    assert!(matches!(r, Err(Error::Dimension(_))));
}

#[test]
fn zero_horizon_rollout_returns_initial_state() {
    let desc = twin::building();
    let model = build_model(&desc, &twin::reference_parameters(), &NetworkOptions::default()).unwrap();
    let dm = discretize(&model, 900.0).unwrap();
    let x = DVector::from_element(dm.states(), 21.0);
    let t = rollout(&dm, &x, &[], &[], &[], 0).unwrap();
    assert_eq!(t.states, vec![x]);
}

#[test]
fn one_step_error_is_second_order() {
    let p = twin::reference_parameters();
    let model = build_model(&twin::building(), &p, &NetworkOptions::default()).unwrap();
    let ds = twin::excitation_weekend(&p, 0, 1, twin::Noise::NONE).unwrap();
    let truth = &ds.truth.as_ref().unwrap().states;
    let f = DVector::zeros(6);
    for k in [0, 40, 130] {
        let errors: Vec<f64> = [112.5, 56.25, 28.125]
            .iter()
            .map(|&dt| {
                let dm = discretize(&model, dt).unwrap();
                let disc = step(&dm, &truth[k], &ds.u[k], &ds.v[k], &f).unwrap();
                let cont = common::dopri45(|s| model.rhs(s, &ds.v[k], &ds.u[k], &f), &truth[k], dt, 1e-12, 1e-12);
                (disc - cont).amax()
            })
            .collect();
        assert!(errors[0] / errors[1] >= 2.0 && errors[1] / errors[2] >= 2.0, "{errors:?}");
    }
}

#[test]
fn weekend_rollout_tracks_continuous_oracle() {
    let p = twin::reference_parameters();
    let model = build_model(&twin::building(), &p, &NetworkOptions::default()).unwrap();
    let dm = discretize(&model, 900.0).unwrap();
    let ds = twin::excitation_weekend(&p, 0, 1, twin::Noise::NONE).unwrap();
    let x0 = ds.truth.as_ref().unwrap().states[0].clone();
    let n = ds.len() - 1;
    let f = zero_gains(6, n);
    let disc = rollout(&dm, &x0, &ds.u[..n], &ds.v[..n], &f, n).unwrap();
    let cont = common::continuous_trajectory(&model, &x0, &ds.u[..n], &ds.v[..n], &f, 900.0);
    let worst = (0..=n).map(|k| (&disc.states[k] - &cont[k]).amax()).fold(0.0, f64::max);
    assert!(worst < 0.05, "{worst}");
}

#[test]
fn artifact_round_trip_preserves_matrices() {
    let desc = twin::building();
    let model = build_model(&desc, &twin::reference_parameters(), &NetworkOptions::default()).unwrap();
    let dm = discretize(&model, 900.0).unwrap();
    let art = ModelArtifact::from_model(&dm, "abc");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    art.write_json(&path).unwrap();
    let back = ModelArtifact::read_json(&path).unwrap();
    assert_eq!(art, back);
    assert_eq!(export::from_rows(&back.discrete.a).unwrap(), dm.a);

    art.write_csv_dir(dir.path().join("csv")).unwrap();
    let a = export::read_matrix_csv(dir.path().join("csv/disc_A.csv")).unwrap();
    assert_relative_eq!(a, dm.a, max_relative = 1e-15);
    assert_eq!(back.state_labels.len(), 62);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hull_flux_is_affine(a_ew in 0.0..50.0f64, a_win in 0.0..20.0f64, dt in -20.0..20.0f64, sol in 0.0..900.0f64, k in 0.0..3.0f64) {
        let p = twin::reference_parameters();
        let base = hull_flux_scalar(&p, a_ew, a_win, dt, sol);
        let scaled = hull_flux_scalar(&p, a_ew, a_win, k * dt, k * sol);
        prop_assert!((scaled - k * base).abs() <= 1e-9 * (1.0 + base.abs() * k));
        let split = hull_flux_scalar(&p, a_ew, 0.0, dt, sol) + hull_flux_scalar(&p, 0.0, a_win, dt, sol);
        prop_assert!((split - base).abs() <= 1e-9 * (1.0 + base.abs()));
    }

    #[test]
    fn step_is_affine_in_disturbance_and_gains(seed in 0u64..1000, k in -2.0..2.0f64) {
        let model = build_model(&closed_two_zone(), &params(2), &NetworkOptions::default()).unwrap();
        let dm = discretize(&model, 900.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = probe(&mut rng, dm.states(), 10.0, 30.0);
        let u = probe(&mut rng, 2, 0.0, 0.1);
        let v1 = probe(&mut rng, disturbance::LEN, 0.0, 30.0);
        let v2 = probe(&mut rng, disturbance::LEN, 0.0, 30.0);
        let f1 = probe(&mut rng, 2, -5.0, 5.0);
        let f2 = probe(&mut rng, 2, -5.0, 5.0);
        let s = |v: &DVector<f64>, f: &DVector<f64>| step(&dm, &x, &u, v, f).unwrap();
        let base = s(&v1, &f1);
        let moved = s(&(&v1 + &v2 * k), &(&f1 + &f2 * k));
        let by_parts = &base + (s(&(&v1 + &v2), &f1) - &base) * k + (s(&v1, &(&f1 + &f2)) - &base) * k;
        prop_assert!((moved - by_parts).amax() < 1e-9);
    }
}
