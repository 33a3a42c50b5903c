//! Parameter identification from excitation data, internal-gains estimation
//! and the two predictors built on them.

pub mod ig;
pub mod objective;
pub mod optimizer;
pub mod predict;

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::building::BuildingDescription;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::params::{ParameterBounds, ParameterVector};
use crate::simulation::TimeSeriesDataset;

pub use ig::{
    estimate_fixed_ig, estimate_ig_snapshot, simulate_no_ig, slot_of, slots_per_week, track_internal_gains, IgSettings, IgSnapshot,
    IgTrace, InternalGainsProfile, SnapshotSolver,
};
pub use objective::{dataset_residuals, evaluate_objective, ModelSettings, ObjectiveEvaluation};
pub use optimizer::{minimize, Method, OptimizerOutcome, OptimizerSettings, TraceEntry};
pub use predict::{predict_fixed_ig, predict_online_ig, Pooling, PredictionSettings, PredictionTable, Predictions, PredictorKind};

pub const REPORT_SCHEMA: &str = "thermident-identification/1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub method: Method,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub best_start: usize,
    pub starts: usize,
}

#[derive(Debug, Clone)]
pub struct IdentificationResult {
    pub parameters: ParameterVector,
    pub bounds: ParameterBounds,
    /// Sum of squared output errors over the training data, °C².
    pub objective: f64,
    pub training: ObjectiveEvaluation,
    pub validation: Option<ObjectiveEvaluation>,
    pub diagnostics: SolverDiagnostics,
    pub trace: Vec<TraceEntry>,
}

/// Minimizes the output error over weekend datasets (internal-gains
/// deviation taken as zero) within `bounds`, starting from `initial`.
pub fn identify_parameters(
    desc: &BuildingDescription,
    datasets: &[TimeSeriesDataset],
    initial: &ParameterVector,
    bounds: &ParameterBounds,
    model: &ModelSettings,
    optimizer: &OptimizerSettings,
    execution: Execution,
) -> Result<IdentificationResult> {
    if datasets.is_empty() {
        return Err(Error::Dataset("no identification data".into()));
    }
    let zones = desc.zones.len();
    initial.validate(zones)?;
    bounds.validate()?;
    if bounds.len() != initial.len() {
        return Err(Error::Dimension(format!("{} bounds for {} parameters", bounds.len(), initial.len())));
    }
    for ds in datasets {
        if ds.zone_ids != desc.zone_ids() || ds.box_ids != desc.box_ids() {
            return Err(Error::Mismatch("dataset channels differ from the building description".into()));
        }
    }
    let residuals = |theta: &[f64]| -> Option<DVector<f64>> {
        let params = ParameterVector::from_slice(theta).ok()?;
        match evaluate_objective(desc, datasets, &params, model, Execution::Sequential) {
            Ok(eval) => Some(eval.flat()),
            Err(e) => {
                log::debug!("candidate rejected: {e}");
                None
            }
        }
    };
    let outcome = minimize(&residuals, &initial.to_vec(), bounds, optimizer, execution)?;
    if !outcome.converged {
        log::warn!("optimizer stopped before convergence; returning the best iterate");
    }
    let parameters = ParameterVector::from_slice(&outcome.x)?;
    let training = evaluate_objective(desc, datasets, &parameters, model, execution)?;
    Ok(IdentificationResult {
        parameters,
        bounds: bounds.clone(),
        objective: training.sse,
        training,
        validation: None,
        diagnostics: SolverDiagnostics {
            method: optimizer.method,
            iterations: outcome.iterations,
            evaluations: outcome.evaluations,
            converged: outcome.converged,
            best_start: outcome.best_start,
            starts: outcome.start_costs.len(),
        },
        trace: outcome.trace,
    })
}

impl IdentificationResult {
    /// Scores the identified parameters on held-out datasets.
    pub fn validate_on(
        &mut self,
        desc: &BuildingDescription,
        datasets: &[TimeSeriesDataset],
        model: &ModelSettings,
        execution: Execution,
    ) -> Result<()> {
        self.validation = Some(evaluate_objective(desc, datasets, &self.parameters, model, execution)?);
        Ok(())
    }

    pub fn report(&self, zone_ids: &[String], config_hash: &str) -> IdentificationReport {
        let info = ParameterVector::info(zone_ids);
        let values = self.parameters.to_vec();
        let parameters = info
            .into_iter()
            .enumerate()
            .map(|(i, p)| ParameterEntry {
                name: p.name,
                description: p.description,
                unit: p.unit,
                value: values[i],
                lower: self.bounds.lower[i],
                upper: self.bounds.upper[i],
            })
            .collect();
        let rms = |e: &ObjectiveEvaluation| -> Vec<f64> { e.rms_by_zone().iter().copied().collect() };
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
        let training = rms(&self.training);
        let validation = self.validation.as_ref().map(rms);
        IdentificationReport {
            schema: REPORT_SCHEMA.to_string(),
            config_hash: config_hash.to_string(),
            parameters,
            values: self.parameters.clone(),
            objective: self.objective,
            samples: self.training.samples,
            rms: RmsTable {
                zones: zone_ids.to_vec(),
                training_mean: mean(&training),
                validation_mean: validation.as_deref().map(mean),
                training,
                validation,
            },
            solver: self.diagnostics,
            trace: self.trace.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterEntry {
    pub name: String,
    pub description: String,
    pub unit: String,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Per-zone RMS, °C.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmsTable {
    pub zones: Vec<String>,
    pub training: Vec<f64>,
    pub training_mean: f64,
    pub validation: Option<Vec<f64>>,
    pub validation_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationReport {
    pub schema: String,
    pub config_hash: String,
    pub parameters: Vec<ParameterEntry>,
    /// The same values in loadable form.
    pub values: ParameterVector,
    pub objective: f64,
    pub samples: usize,
    pub rms: RmsTable,
    pub solver: SolverDiagnostics,
    pub trace: Vec<TraceEntry>,
}

impl IdentificationReport {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let report: IdentificationReport = serde_json::from_slice(&std::fs::read(path)?)?;
        if report.schema != REPORT_SCHEMA {
            return Err(Error::schema(format!("unsupported report schema `{}`", report.schema)));
        }
        Ok(report)
    }
}
