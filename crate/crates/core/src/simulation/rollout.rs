use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::flux::disturbance;
use crate::model::DiscreteModel;
use crate::simulation::dataset::TimeSeriesDataset;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    pub outputs: Vec<DVector<f64>>,
}

fn check(dm: &DiscreteModel, x: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>, f_ig: &DVector<f64>) -> Result<()> {
    let dims = [
        ("state", x.len(), dm.states()),
        ("airflow", u.len(), dm.inputs()),
        ("disturbance", v.len(), disturbance::LEN),
        ("internal gains", f_ig.len(), dm.zones()),
    ];
    for (what, got, want) in dims {
        if got != want {
            return Err(Error::Dimension(format!("{what} has length {got}, expected {want}")));
        }
    }
    Ok(())
}

/// One step of the discrete bilinear model.
pub fn step(dm: &DiscreteModel, x: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>, f_ig: &DVector<f64>) -> Result<DVector<f64>> {
    check(dm, x, u, v, f_ig)?;
    Ok(dm.advance(x, u, v, f_ig))
}

pub fn output(dm: &DiscreteModel, x: &DVector<f64>) -> DVector<f64> {
    &dm.c * x
}

/// Open-loop rollout of `horizon` steps driven by `u[k], v[k], f_ig[k]` for
/// `k < horizon`. Returns `horizon + 1` states starting with `x0`.
pub fn rollout(
    dm: &DiscreteModel,
    x0: &DVector<f64>,
    u: &[DVector<f64>],
    v: &[DVector<f64>],
    f_ig: &[DVector<f64>],
    horizon: usize,
) -> Result<Trajectory> {
    if u.len() < horizon || v.len() < horizon || f_ig.len() < horizon {
        return Err(Error::Horizon { horizon, available: u.len().min(v.len()).min(f_ig.len()) });
    }
    if horizon > 0 {
        check(dm, x0, &u[0], &v[0], &f_ig[0])?;
    } else if x0.len() != dm.states() {
        return Err(Error::Dimension("initial state length".into()));
    }
    let mut states = Vec::with_capacity(horizon + 1);
    states.push(x0.clone());
    for k in 0..horizon {
        let next = dm.advance(&states[k], &u[k], &v[k], &f_ig[k]);
        if let Some(state) = next.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { step: k + 1, state });
        }
        states.push(next);
    }
    let outputs = states.iter().map(|x| &dm.c * x).collect();
    Ok(Trajectory { states, outputs })
}

/// Open-loop simulation over the whole dataset: one state per sample, the
/// first being `x0`. Missing inputs are carried forward.
pub fn simulate(dm: &DiscreteModel, x0: &DVector<f64>, dataset: &TimeSeriesDataset, f_ig: &[DVector<f64>]) -> Result<Trajectory> {
    if dataset.is_empty() {
        return Err(Error::Dataset("empty dataset".into()));
    }
    let (u, v) = dataset.filled_inputs()?;
    rollout(dm, x0, &u, &v, f_ig, dataset.len() - 1)
}

/// Zero internal-gains sequence.
pub fn zero_gains(zones: usize, len: usize) -> Vec<DVector<f64>> {
    vec![DVector::zeros(zones); len]
}
