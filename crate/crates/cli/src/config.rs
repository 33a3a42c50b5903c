//! Run configuration: one TOML file plus command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use thermident_core::identification::{IgSettings, ModelSettings, OptimizerSettings, PredictionSettings};
use thermident_core::simulation::{ExcitationOptions, IgModel, SynthesisOptions, WeatherModel};
use thermident_core::{ParameterBounds, ParameterVector};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Directory receiving every output file.
    pub output_dir: PathBuf,
    /// Seed for excitation schedules and synthetic data.
    pub seed: u64,
    pub paths: Paths,
    pub model: ModelSettings,
    pub excitation: ExcitationOptions,
    pub synthesis: SynthesisConfig,
    pub identification: IdentificationConfig,
    pub internal_gains: IgSettings,
    pub prediction: PredictionConfig,
    pub evaluation: EvaluationConfig,
}

/// Input files. Relative paths are taken from the config file's directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub building: Option<PathBuf>,
    /// Parameter JSON (as written by `identify` or `twin`).
    pub parameters: Option<PathBuf>,
    /// Airflow schedule CSV used when synthesizing with `operation = "schedule"`.
    pub schedule: Option<PathBuf>,
    /// Identification datasets.
    pub training: Vec<PathBuf>,
    pub validation: Vec<PathBuf>,
    /// Regular-operation datasets for the fixed internal-gains profile; each
    /// is split into Monday-anchored weeks.
    pub ig_weeks: Vec<PathBuf>,
    pub ig_profile: Option<PathBuf>,
    /// Dataset the predictors run on.
    pub test: Option<PathBuf>,
    pub fixed_predictions: Option<PathBuf>,
    pub online_predictions: Option<PathBuf>,
    /// Stored fixed/online score pair for compare-only evaluation.
    pub scores: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperationKind {
    /// Follow the airflow schedule in `paths.schedule`.
    Schedule,
    /// Proportional control to the setpoint.
    #[default]
    Regular,
    /// Every box at `constant_flow`.
    Constant,
}

// Flattened sections cannot deny unknown fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisConfig {
    pub operation: OperationKind,
    pub constant_flow: Vec<f64>,
    #[serde(flatten)]
    pub options: SynthesisOptions,
    pub weather: WeatherModel,
    /// Stochastic internal gains; none when absent.
    pub internal_gains: Option<IgModel>,
    /// Switches `internal_gains` off without removing it (e.g. weekends).
    pub use_internal_gains: bool,
    /// File name inside the output directory.
    pub output: String,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            operation: OperationKind::default(),
            constant_flow: Vec::new(),
            options: SynthesisOptions::default(),
            weather: WeatherModel::default(),
            internal_gains: None,
            use_internal_gains: true,
            output: "dataset.csv".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentificationConfig {
    /// Starting point; falls back to `paths.parameters`.
    pub initial: Option<ParameterVector>,
    /// Box constraints; defaults scale with the zone count.
    pub bounds: Option<ParameterBounds>,
    pub optimizer: OptimizerSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictionConfig {
    /// Any of "fixed" and "online".
    pub predictors: Vec<String>,
    #[serde(flatten)]
    pub settings: PredictionSettings,
}

impl Default for PredictionConfig {
    fn default() -> Self {
        PredictionConfig { predictors: vec!["fixed".into(), "online".into()], settings: PredictionSettings::default() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Label stored in the report; defaults to the test file name.
    pub dataset: Option<String>,
    /// Also write per-lead horizon curves.
    pub horizon_curves: bool,
}

impl RunConfig {
    /// Reads `path` (if any), applies `key=value` overrides and resolves
    /// relative paths against the config file's directory.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let (mut table, base) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config { message: format!("cannot read {}: {e}", p.display()), line: None })?;
                let table: toml::Table = toml::from_str(&text).map_err(|e| toml_error(&text, e))?;
                (table, p.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            None => (toml::Table::new(), PathBuf::new()),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        datetimes_to_strings(&mut table);
        let text = toml::to_string(&table).map_err(|e| CliError::config(e.to_string()))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| CliError::config(e.to_string()))?;
        if cfg.output_dir.as_os_str().is_empty() {
            cfg.output_dir = PathBuf::from("out");
        }
        cfg.resolve(&base);
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() && !base.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        let p = &mut self.paths;
        for opt in [
            &mut p.building,
            &mut p.parameters,
            &mut p.schedule,
            &mut p.ig_profile,
            &mut p.test,
            &mut p.fixed_predictions,
            &mut p.online_predictions,
            &mut p.scores,
        ]
        .into_iter()
        .flatten()
        {
            fix(opt);
        }
        for list in [&mut p.training, &mut p.validation, &mut p.ig_weeks] {
            list.iter_mut().for_each(fix);
        }
    }

    /// SHA-256 of the effective configuration.
    pub fn hash(&self) -> Result<String, CliError> {
        Ok(thermident_core::report::config_hash(self)?)
    }
}

fn toml_error(text: &str, e: toml::de::Error) -> CliError {
    let line = e.span().map(|s| text[..s.start.min(text.len())].lines().count().max(1));
    CliError::Config { message: e.message().to_string(), line }
}

/// Timestamps are plain strings in the data model; TOML date-time literals
/// are accepted and converted.
fn datetimes_to_strings(table: &mut toml::Table) {
    fn walk(v: &mut toml::Value) {
        match v {
            toml::Value::Datetime(d) => *v = toml::Value::String(d.to_string()),
            toml::Value::Table(t) => t.iter_mut().for_each(|(_, v)| walk(v)),
            toml::Value::Array(a) => a.iter_mut().for_each(walk),
            _ => {}
        }
    }
    table.iter_mut().for_each(|(_, v)| walk(v));
}

/// `a.b.c=value`; the value is read as a TOML literal, or as a string when
/// it does not parse as one.
fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| CliError::config(format!("override `{spec}` is not key=value")))?;
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let mut node = table;
    for part in &parts[..parts.len() - 1] {
        let entry = node.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry.as_table_mut().ok_or_else(|| CliError::config(format!("override `{key}`: `{part}` is not a table")))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Path that a command needs; it must be configured and exist.
pub fn require<'a>(path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path, CliError> {
    let p = path.as_deref().ok_or_else(|| CliError::config(format!("`paths.{key}` is not set")))?;
    exists(p, key)
}

pub fn exists<'a>(p: &'a Path, key: &str) -> Result<&'a Path, CliError> {
    if p.exists() {
        Ok(p)
    } else {
        Err(CliError::config(format!("`paths.{key}`: {} does not exist", p.display())))
    }
}
