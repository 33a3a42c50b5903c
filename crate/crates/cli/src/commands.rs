//! One function per subcommand. Each reads its inputs from the run config
//! and writes into the output directory, stamping the config hash.

use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};

use thermident_core::evaluation::{compare_predictors, write_ig_overlay_csv, ErrorAccumulator, PredictorScore, ScorePair};
use thermident_core::identification::{
    estimate_fixed_ig, identify_parameters, predict_fixed_ig, predict_online_ig, slot_of, InternalGainsProfile, PredictionTable,
};
use thermident_core::model::{DiscreteModel, ModelArtifact};
use thermident_core::simulation::{generate_excitation, synthesize_dataset, ExcitationSchedule, Operation, TimeSeriesDataset};
use thermident_core::{twin, BuildingDescription, Execution, ParameterBounds, ParameterVector};

use crate::config::{exists, require, OperationKind, RunConfig};
use crate::error::CliError;

/// Parameter file: the values plus the hash of the run that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterFile {
    pub config_hash: String,
    pub parameters: ParameterVector,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AnyParameters {
    Wrapped(ParameterFile),
    Bare(ParameterVector),
}

pub fn read_parameters(path: &Path) -> Result<ParameterVector, CliError> {
    let any: AnyParameters = serde_json::from_slice(&std::fs::read(path)?)
        .map_err(|e| CliError::Config { message: format!("{}: not a parameter file ({e})", path.display()), line: Some(e.line()) })?;
    Ok(match any {
        AnyParameters::Wrapped(f) => f.parameters,
        AnyParameters::Bare(p) => p,
    })
}

fn write_parameters(path: &Path, parameters: &ParameterVector, hash: &str) -> Result<(), CliError> {
    let file = ParameterFile { config_hash: hash.to_string(), parameters: parameters.clone() };
    std::fs::write(path, serde_json::to_vec_pretty(&file)?)?;
    Ok(())
}

pub struct Context {
    pub cfg: RunConfig,
    pub hash: String,
    pub execution: Execution,
}

impl Context {
    fn out(&self, name: &str) -> PathBuf {
        self.cfg.output_dir.join(name)
    }

    fn building(&self) -> Result<BuildingDescription, CliError> {
        Ok(BuildingDescription::from_path(require(&self.cfg.paths.building, "building")?)?)
    }

    fn parameters(&self) -> Result<ParameterVector, CliError> {
        read_parameters(require(&self.cfg.paths.parameters, "parameters")?)
    }

    fn model(&self) -> Result<DiscreteModel, CliError> {
        Ok(self.cfg.model.discrete_model(&self.building()?, &self.parameters()?)?)
    }

    fn datasets(&self, paths: &[PathBuf], key: &str) -> Result<Vec<TimeSeriesDataset>, CliError> {
        paths.iter().map(|p| Ok(TimeSeriesDataset::read_csv(exists(p, key)?)?)).collect()
    }

    fn test_dataset(&self) -> Result<TimeSeriesDataset, CliError> {
        Ok(TimeSeriesDataset::read_csv(require(&self.cfg.paths.test, "test")?)?)
    }
}

/// Sample inputs: the bundled six-zone building, its reference parameters
/// and a starting guess.
pub fn twin_files(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let building = ctx.out("twin_building.json");
    std::fs::write(&building, twin::BUILDING_JSON)?;
    let truth = ctx.out("twin_parameters.json");
    write_parameters(&truth, &twin::reference_parameters(), &ctx.hash)?;
    let guess = ctx.out("twin_initial_guess.json");
    write_parameters(&guess, &twin::initial_guess(), &ctx.hash)?;
    Ok(vec![building, truth, guess])
}

pub fn build(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let dm = ctx.model()?;
    let artifact = ModelArtifact::from_model(&dm, &ctx.hash);
    let json = ctx.out("model.json");
    artifact.write_json(&json)?;
    let dir = ctx.out("matrices");
    std::fs::create_dir_all(&dir)?;
    artifact.write_csv_dir(&dir)?;
    info!("{} states, {} zones, {} boxes", dm.states(), dm.zones(), dm.inputs());
    Ok(vec![json, dir])
}

pub fn excite(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let schedule = generate_excitation(&ctx.building()?, ctx.cfg.seed, &ctx.cfg.excitation)?;
    let path = ctx.out("excitation.csv");
    schedule.write_csv(&path, Some(&ctx.hash))?;
    Ok(vec![path])
}

pub fn synthesize(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let desc = ctx.building()?;
    let params = ctx.parameters()?;
    let syn = &ctx.cfg.synthesis;
    let operation = match syn.operation {
        OperationKind::Schedule => {
            let (_, setpoints) = ExcitationSchedule::read_setpoints(require(&ctx.cfg.paths.schedule, "schedule")?)?;
            Operation::Schedule(setpoints)
        }
        OperationKind::Regular => {
            let c =
                thermident_core::simulation::ProportionalController::for_building(&desc, syn.options.setpoint, syn.options.controller_gain);
            Operation::Regular(c)
        }
        OperationKind::Constant => Operation::Constant(nalgebra::DVector::from_vec(syn.constant_flow.clone())),
    };
    let options = thermident_core::simulation::SynthesisOptions {
        seed: ctx.cfg.seed,
        dt: ctx.cfg.model.dt,
        network: ctx.cfg.model.network,
        ..syn.options.clone()
    };
    let ds = synthesize_dataset(
        &desc,
        &params,
        syn.internal_gains.as_ref().filter(|_| syn.use_internal_gains),
        &syn.weather,
        &operation,
        &options,
    )?;
    let path = ctx.out(&syn.output);
    ds.write_csv(&path, Some(&ctx.hash))?;
    let mut written = vec![path.clone()];
    if ds.truth.is_some() {
        written.push(thermident_core::simulation::dataset::truth_path(&path));
    }
    Ok(written)
}

pub fn identify(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let desc = ctx.building()?;
    let cfg = &ctx.cfg;
    if cfg.paths.training.is_empty() {
        return Err(CliError::config("`paths.training` lists no datasets"));
    }
    let training = ctx.datasets(&cfg.paths.training, "training")?;
    let validation = ctx.datasets(&cfg.paths.validation, "validation")?;
    let initial = match &cfg.identification.initial {
        Some(p) => p.clone(),
        None => ctx.parameters()?,
    };
    let bounds = cfg.identification.bounds.clone().unwrap_or_else(|| ParameterBounds::default_for(desc.zones.len()));
    let mut result = identify_parameters(&desc, &training, &initial, &bounds, &cfg.model, &cfg.identification.optimizer, ctx.execution)?;
    if !validation.is_empty() {
        result.validate_on(&desc, &validation, &cfg.model, ctx.execution)?;
    }
    info!(
        "objective {:.6e} after {} evaluations (converged: {})",
        result.objective, result.diagnostics.evaluations, result.diagnostics.converged
    );
    let report = result.report(&desc.zone_ids(), &ctx.hash);
    let report_path = ctx.out("identification.json");
    report.write_json(&report_path)?;
    let params_path = ctx.out("parameters.json");
    write_parameters(&params_path, &result.parameters, &ctx.hash)?;
    Ok(vec![report_path, params_path])
}

/// Splits a dataset at every return to the start of the weekly grid.
pub fn split_weeks(ds: &TimeSeriesDataset) -> Vec<TimeSeriesDataset> {
    let mut cuts = vec![0];
    for k in 1..ds.len() {
        if slot_of(&ds.timestamps[k], ds.dt) < slot_of(&ds.timestamps[k - 1], ds.dt) {
            cuts.push(k);
        }
    }
    cuts.push(ds.len());
    cuts.windows(2).filter(|w| w[1] > w[0]).map(|w| ds.slice(w[0]..w[1])).collect()
}

pub fn estimate_ig(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let dm = ctx.model()?;
    if ctx.cfg.paths.ig_weeks.is_empty() {
        return Err(CliError::config("`paths.ig_weeks` lists no datasets"));
    }
    let weeks: Vec<_> = ctx.datasets(&ctx.cfg.paths.ig_weeks, "ig_weeks")?.iter().flat_map(split_weeks).collect();
    info!("estimating the weekly profile from {} weeks", weeks.len());
    let profile = estimate_fixed_ig(&dm, &weeks, &ctx.cfg.internal_gains, ctx.execution)?;
    let (mean, weekly, overlay) = (ctx.out("ig_profile.csv"), ctx.out("ig_weekly.csv"), ctx.out("ig_overlay.csv"));
    profile.write_csv(&mean, Some(&ctx.hash))?;
    profile.write_weekly_csv(&weekly, Some(&ctx.hash))?;
    write_ig_overlay_csv(&dm, &profile, &overlay, Some(&ctx.hash))?;
    Ok(vec![mean, weekly, overlay])
}

pub fn predict(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let dm = ctx.model()?;
    let ds = ctx.test_dataset()?;
    let settings = &ctx.cfg.prediction.settings;
    let mut written = Vec::new();
    for name in &ctx.cfg.prediction.predictors {
        let preds = match name.as_str() {
            "fixed" => {
                let profile = InternalGainsProfile::read_csv(require(&ctx.cfg.paths.ig_profile, "ig_profile")?)?;
                predict_fixed_ig(&dm, &profile, &ds, settings, ctx.execution)?
            }
            "online" => predict_online_ig(&dm, &ds, settings, ctx.execution)?,
            other => return Err(CliError::config(format!("unknown predictor `{other}` (fixed, online)"))),
        };
        let path = ctx.out(&format!("predictions_{name}.csv"));
        preds.write_csv(&ds, &path, Some(&ctx.hash))?;
        written.push(path);
    }
    Ok(written)
}

fn score_table(ctx: &Context, path: &Path, dataset: &str, written: &mut Vec<PathBuf>) -> Result<PredictorScore, CliError> {
    let table = PredictionTable::read_csv(path)?;
    let leads = table.leads.iter().copied().max().unwrap_or(0);
    let mut acc = ErrorAccumulator::new(table.zone_ids.len(), leads);
    acc.add_table(&table)?;
    let curves = ctx.cfg.evaluation.horizon_curves;
    let score = PredictorScore::from_accumulator(&table.predictor, dataset, &table.cadence, &table.zone_ids, &acc, curves)?;
    if let Some(curve) = &score.horizon_curve {
        let p = ctx.out(&format!("horizon_{}.csv", table.predictor));
        curve.write_csv(&p, Some(&ctx.hash))?;
        written.push(p);
    }
    Ok(score)
}

pub fn evaluate(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let paths = &ctx.cfg.paths;
    let mut written = Vec::new();
    let (fixed, online) = match &paths.scores {
        Some(scores) => {
            let pair = ScorePair::read_json(exists(scores, "scores")?)?;
            (pair.fixed, pair.online)
        }
        None => {
            let label = ctx.cfg.evaluation.dataset.clone().unwrap_or_else(|| {
                paths
                    .test
                    .as_ref()
                    .and_then(|p| p.file_name())
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "dataset".into())
            });
            let f = score_table(ctx, require(&paths.fixed_predictions, "fixed_predictions")?, &label, &mut written)?;
            let o = score_table(ctx, require(&paths.online_predictions, "online_predictions")?, &label, &mut written)?;
            (f, o)
        }
    };
    let report = compare_predictors(&fixed, &online, &ctx.hash, &[ctx.cfg.seed])?;
    info!("mean RMS fixed {:.4} vs online {:.4}: improvement {:.2}%", fixed.mean_rms, online.mean_rms, report.improvement_mean);
    let json = ctx.out("evaluation.json");
    report.write_json(&json)?;
    let zones = ctx.out("evaluation_zones.csv");
    report.write_zone_csv(&zones)?;
    written.push(json);
    written.push(zones);
    Ok(written)
}
