//! Output-error objective over weekend datasets.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::building::BuildingDescription;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{build_model, discretize, DiscreteModel, NetworkOptions, DEFAULT_STEP_SECONDS};
use crate::params::ParameterVector;
use crate::simulation::kalman::{smoothed_initial_state, KalmanConfig};
use crate::simulation::rollout::{simulate, zero_gains};
use crate::simulation::TimeSeriesDataset;

/// Settings shared by the model build, the state estimator and the objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSettings {
    pub dt: f64,
    pub network: NetworkOptions,
    pub kalman: KalmanConfig,
    /// Samples used to smooth the initial state of each rollout.
    pub init_window: usize,
}

impl Default for ModelSettings {
    fn default() -> Self {
        ModelSettings { dt: DEFAULT_STEP_SECONDS, network: NetworkOptions::default(), kalman: KalmanConfig::default(), init_window: 96 }
    }
}

impl ModelSettings {
    pub fn discrete_model(&self, desc: &BuildingDescription, params: &ParameterVector) -> Result<DiscreteModel> {
        discretize(&build_model(desc, params, &self.network)?, self.dt)
    }
}

/// Residuals `ȳ(k) − y(k, γ)` per dataset and step; NaN where the sample is
/// excluded (missing channel).
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveEvaluation {
    pub sse: f64,
    pub residuals: Vec<Vec<DVector<f64>>>,
    pub samples: usize,
}

impl ObjectiveEvaluation {
    /// Per-zone RMS over all included samples.
    pub fn rms_by_zone(&self) -> DVector<f64> {
        let zones = self.residuals.iter().flatten().next().map(|r| r.len()).unwrap_or(0);
        let mut sum = DVector::zeros(zones);
        let mut n = 0usize;
        for r in self.residuals.iter().flatten() {
            if r.iter().all(|e| e.is_finite()) {
                sum += r.component_mul(r);
                n += 1;
            }
        }
        sum.map(|s| (s / n.max(1) as f64).sqrt())
    }

    /// Flattened residual vector (excluded samples contribute zeros).
    pub fn flat(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.residuals.iter().flatten().map(|r| r.len()).sum(),
            self.residuals.iter().flatten().flat_map(|r| {
                let keep = r.iter().all(|e| e.is_finite());
                r.iter().map(move |e| if keep { *e } else { 0.0 })
            }),
        )
    }
}

/// Residuals of one dataset: KF-smoothed initial state, then an open-loop
/// rollout with `f_IG = 0`.
pub fn dataset_residuals(dm: &DiscreteModel, dataset: &TimeSeriesDataset, settings: &ModelSettings) -> Result<Vec<DVector<f64>>> {
    if dataset.zones() != dm.zones() || dataset.box_ids.len() != dm.inputs() {
        return Err(Error::Mismatch(format!(
            "dataset has {} zones / {} boxes, model has {} / {}",
            dataset.zones(),
            dataset.box_ids.len(),
            dm.zones(),
            dm.inputs()
        )));
    }
    let f = zero_gains(dm.zones(), dataset.len());
    let x0 = smoothed_initial_state(dm, dataset, &f, &settings.kalman, 0, settings.init_window)?;
    let traj = simulate(dm, &x0, dataset, &f)?;
    Ok((0..dataset.len())
        .map(|k| if dataset.is_complete(k) { &dataset.y[k] - &traj.outputs[k] } else { DVector::from_element(dm.zones(), f64::NAN) })
        .collect())
}

/// Sum of squared output errors over all datasets.
pub fn evaluate_objective(
    desc: &BuildingDescription,
    datasets: &[TimeSeriesDataset],
    params: &ParameterVector,
    settings: &ModelSettings,
    execution: Execution,
) -> Result<ObjectiveEvaluation> {
    let dm = settings.discrete_model(desc, params)?;
    let residuals = execution.map(datasets, |ds| dataset_residuals(&dm, ds, settings)).into_iter().collect::<Result<Vec<_>>>()?;
    let mut sse = 0.0;
    let mut samples = 0;
    for r in residuals.iter().flatten() {
        if r.iter().all(|e| e.is_finite()) {
            sse += r.norm_squared();
            samples += 1;
        }
    }
    Ok(ObjectiveEvaluation { sse, residuals, samples })
}
