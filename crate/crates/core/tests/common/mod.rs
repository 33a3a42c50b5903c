//! Independent reference implementations shared by the integration suites.
#![allow(dead_code)]

use nalgebra::DVector;
use thermident_core::model::{flux_rhs, DiscreteModel, RcStateSpaceModel};
use thermident_core::BuildingDescription;

/// Adaptive Dormand–Prince 5(4) integration of `ẋ = f(x)` over `[0, t1]`.
pub fn dopri45<F>(f: F, x0: &DVector<f64>, t1: f64, rtol: f64, atol: f64) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];
    let _ = C;
    let mut x = x0.clone();
    let mut t = 0.0;
    let mut h = (t1 / 100.0).max(1e-3);
    while t < t1 {
        if t + h > t1 {
            h = t1 - t;
        }
        let mut k: Vec<DVector<f64>> = Vec::with_capacity(7);
        #[allow(clippy::needless_range_loop)]
        for s in 0..7 {
            let mut xs = x.clone();
            for (j, kj) in k.iter().enumerate() {
                if A[s][j] != 0.0 {
                    xs.axpy(h * A[s][j], kj, 1.0);
                }
            }
            k.push(f(&xs));
        }
        let mut x5 = x.clone();
        let mut x4 = x.clone();
        for s in 0..7 {
            x5.axpy(h * B5[s], &k[s], 1.0);
            x4.axpy(h * B4[s], &k[s], 1.0);
        }
        let err = (0..x.len())
            .map(|i| {
                let sc = atol + rtol * x[i].abs().max(x5[i].abs());
                ((x5[i] - x4[i]) / sc).powi(2)
            })
            .sum::<f64>()
            / x.len() as f64;
        let err = err.sqrt();
        if err <= 1.0 {
            t += h;
            x = x5;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
    x
}

/// Continuous-time reference trajectory with inputs held over each interval,
/// integrated from the flux-sum right-hand side.
pub fn continuous_trajectory(
    model: &RcStateSpaceModel,
    x0: &DVector<f64>,
    u: &[DVector<f64>],
    v: &[DVector<f64>],
    f: &[DVector<f64>],
    dt: f64,
) -> Vec<DVector<f64>> {
    let mut out = vec![x0.clone()];
    for k in 0..u.len() {
        let rhs = |x: &DVector<f64>| flux_rhs(&model.network, &model.params, x, &v[k], &u[k], &f[k]).unwrap();
        let next = dopri45(rhs, &out[k], dt, 1e-11, 1e-11);
        out.push(next);
    }
    out
}

/// Dense evaluation of the discrete bilinear update.
pub fn naive_step(dm: &DiscreteModel, x: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>, f: &DVector<f64>) -> DVector<f64> {
    let mut next = &dm.a * x + &dm.b_v * v + &dm.b_ig * (&dm.c_ig + f);
    for j in 0..u.len() {
        next += (&dm.b_xu[j] * x + &dm.b_vu[j] * v) * u[j];
    }
    next
}

pub fn layer(thickness: f64, conductivity: f64, density: f64, specific_heat: f64) -> serde_json::Value {
    serde_json::json!({"thickness": thickness, "conductivity": conductivity, "density": density, "specific_heat": specific_heat})
}

/// Two zones separated by one interior wall, floors and ceilings adiabatic,
/// no hull: a closed network.
pub fn closed_two_zone() -> BuildingDescription {
    let concrete = layer(0.12, 1.1, 2000.0, 900.0);
    let doc = serde_json::json!({
        "schema": "thermident-building/1",
        "name": "closed pair",
        "zones": [
            {"id": "A", "floor_area": 40.0, "adjacency": ["B"]},
            {"id": "B", "floor_area": 60.0, "adjacency": ["A"]}
        ],
        "elements": [
            {"id": "room_A", "kind": "room-air", "zone": "A", "floor_area": 40.0, "volume": 120.0},
            {"id": "room_B", "kind": "room-air", "zone": "B", "floor_area": 60.0, "volume": 180.0},
            {"id": "wall_AB", "kind": "wall", "connects": ["room_A", "room_B"], "area": 20.0, "layers": [concrete]},
            {"id": "floor_A", "kind": "floor", "connects": ["room_A", "ADIABATIC"], "area": 40.0,
             "layers": [layer(0.15, 1.4, 2300.0, 880.0)]},
            {"id": "ceiling_B", "kind": "ceiling", "connects": ["room_B", "ADIABATIC"], "area": 60.0,
             "layers": [layer(0.2, 1.4, 2300.0, 880.0)]}
        ],
        "vav_boxes": [
            {"id": "vav_A", "zone": "A", "min_flow": 0.02, "max_flow": 0.1},
            {"id": "vav_B", "zone": "B", "min_flow": 0.03, "max_flow": 0.15}
        ]
    });
    BuildingDescription::from_json_str(&doc.to_string()).unwrap()
}

/// One room and one interior wall whose far side is adiabatic.
pub fn single_room(wall_layers: serde_json::Value) -> String {
    serde_json::json!({
        "schema": "thermident-building/1",
        "name": "toy",
        "zones": [{"id": "Z", "floor_area": 10.0, "adjacency": []}],
        "elements": [
            {"id": "room", "kind": "room-air", "zone": "Z", "floor_area": 10.0, "volume": 30.0},
            {"id": "wall", "kind": "wall", "connects": ["room", "ADIABATIC"], "area": 12.0, "layers": wall_layers}
        ],
        "vav_boxes": [{"id": "vav", "zone": "Z", "min_flow": 0.0, "max_flow": 0.05}]
    })
    .to_string()
}

/// Deterministic pseudo-random vector in `[lo, hi]`.
pub fn probe(rng: &mut rand_chacha::ChaCha8Rng, n: usize, lo: f64, hi: f64) -> DVector<f64> {
    use rand::Rng;
    DVector::from_fn(n, |_, _| lo + (hi - lo) * rng.random::<f64>())
}
