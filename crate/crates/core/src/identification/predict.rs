//! Multi-step predictors with a fixed weekly internal-gains profile or with
//! gains re-estimated online from the latest measurement.

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::identification::ig::{track_internal_gains, tracker_initial_state, IgSettings, InternalGainsProfile, SnapshotSolver};
use crate::model::DiscreteModel;
use crate::simulation::dataset::{fmt_value, parse_timestamp, read_table, write_table, TIMESTAMP_FORMAT};
use crate::simulation::kalman::{kalman_filter, KalmanConfig};
use crate::simulation::rollout::rollout;
use crate::simulation::TimeSeriesDataset;

/// Where prediction runs start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    /// Every `period` samples after the warm-up (e.g. once a day).
    Anchored,
    /// At every sample after the warm-up.
    Sliding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorKind {
    Fixed,
    Online,
}

impl PredictorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PredictorKind::Fixed => "fixed",
            PredictorKind::Online => "online",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictionSettings {
    pub horizon: usize,
    /// Samples before the first prediction start.
    pub warmup: usize,
    pub pooling: Pooling,
    /// Spacing of anchored starts.
    pub period: usize,
    pub kalman: KalmanConfig,
    /// Samples used to smooth the online tracker's initial state.
    pub tracker_window: usize,
    pub allow_rank_deficient: bool,
}

impl Default for PredictionSettings {
    fn default() -> Self {
        PredictionSettings {
            horizon: 96,
            warmup: 96,
            pooling: Pooling::Anchored,
            period: 96,
            kalman: KalmanConfig::default(),
            tracker_window: 32,
            allow_rank_deficient: false,
        }
    }
}

impl PredictionSettings {
    /// Short description of the cadence, used to check that compared scores
    /// are comparable.
    pub fn cadence(&self) -> String {
        match self.pooling {
            Pooling::Sliding => format!("horizon {} sliding", self.horizon),
            Pooling::Anchored => format!("horizon {} every {}", self.horizon, self.period),
        }
    }

    pub fn starts(&self, len: usize) -> Result<Vec<usize>> {
        if self.horizon == 0 {
            return Err(Error::Config("prediction horizon must be at least one step".into()));
        }
        let warmup = self.warmup;
        if len == 0 || warmup + self.horizon > len - 1 {
            return Err(Error::Horizon { horizon: self.horizon, available: len.saturating_sub(warmup + 1) });
        }
        let last = len - 1 - self.horizon;
        Ok(match self.pooling {
            Pooling::Sliding => (warmup..=last).collect(),
            Pooling::Anchored => (warmup..=last).step_by(self.period.max(1)).collect(),
        })
    }
}

/// `outputs[i][l]` predicts `y(starts[i] + l + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub predictor: PredictorKind,
    pub cadence: String,
    pub horizon: usize,
    pub zone_ids: Vec<String>,
    pub starts: Vec<usize>,
    pub outputs: Vec<Vec<DVector<f64>>>,
}

impl Predictions {
    /// Long-format CSV: one row per (start, lead) with predicted and measured
    /// outputs.
    pub fn write_csv(&self, dataset: &TimeSeriesDataset, path: impl AsRef<Path>, config_hash: Option<&str>) -> Result<()> {
        let mut header = vec!["start".to_string(), "target".to_string(), "lead".to_string()];
        header.extend(self.zone_ids.iter().map(|z| format!("yhat_{z}")));
        header.extend(self.zone_ids.iter().map(|z| format!("y_{z}")));
        let mut rows = Vec::with_capacity(self.starts.len() * self.horizon);
        for (i, &s) in self.starts.iter().enumerate() {
            for (l, yhat) in self.outputs[i].iter().enumerate() {
                let k = s + l + 1;
                let mut row = vec![
                    dataset.timestamps[s].format(TIMESTAMP_FORMAT).to_string(),
                    dataset.timestamps[k].format(TIMESTAMP_FORMAT).to_string(),
                    (l + 1).to_string(),
                ];
                row.extend(yhat.iter().map(|v| fmt_value(*v)));
                row.extend(dataset.y[k].iter().map(|v| fmt_value(*v)));
                rows.push(row);
            }
        }
        let meta = format!("{}\n# predictor: {}\n# cadence: {}", config_hash.unwrap_or("unknown"), self.predictor.as_str(), self.cadence);
        write_table(path.as_ref(), Some(&meta), &header, &rows)
    }
}

/// Predictions read back from CSV, paired with the measurements they target.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTable {
    pub predictor: String,
    pub cadence: String,
    pub config_hash: String,
    pub zone_ids: Vec<String>,
    pub leads: Vec<usize>,
    pub targets: Vec<chrono::NaiveDateTime>,
    pub predicted: Vec<DVector<f64>>,
    pub measured: Vec<DVector<f64>>,
}

impl PredictionTable {
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let comments = crate::simulation::dataset::read_comments(path)?;
        let get = |key: &str| comments.iter().find(|(k, _)| k == key).map(|(_, v)| v.clone()).unwrap_or_default();
        let (header, rows) = read_table(path)?;
        let zone_ids: Vec<String> = header.iter().filter_map(|h| h.strip_prefix("yhat_").map(str::to_string)).collect();
        let z = zone_ids.len();
        let col = |name: &str| header.iter().position(|h| h == name).ok_or_else(|| Error::Dataset(format!("missing column `{name}`")));
        let (target, lead, first) =
            (col("target")?, col("lead")?, col(&format!("yhat_{}", zone_ids.first().cloned().unwrap_or_default()))?);
        let mut t = PredictionTable {
            predictor: get("predictor"),
            cadence: get("cadence"),
            config_hash: get("config_hash"),
            zone_ids,
            leads: Vec::new(),
            targets: Vec::new(),
            predicted: Vec::new(),
            measured: Vec::new(),
        };
        let num = |s: &str| -> f64 { s.trim().parse().unwrap_or(f64::NAN) };
        for row in rows {
            t.targets.push(parse_timestamp(&row[target])?);
            t.leads.push(row[lead].trim().parse().map_err(|e| Error::Dataset(format!("lead: {e}")))?);
            t.predicted.push(DVector::from_iterator(z, row[first..first + z].iter().map(|s| num(s))));
            t.measured.push(DVector::from_iterator(z, row[first + z..first + 2 * z].iter().map(|s| num(s))));
        }
        Ok(t)
    }
}

/// Kalman-filtered state at each start, open-loop rollout with the profile's
/// gains by time of week.
pub fn predict_fixed_ig(
    dm: &DiscreteModel,
    profile: &InternalGainsProfile,
    dataset: &TimeSeriesDataset,
    settings: &PredictionSettings,
    execution: Execution,
) -> Result<Predictions> {
    let starts = settings.starts(dataset.len())?;
    let f = profile.sequence_for(dataset)?;
    let est = kalman_filter(dm, dataset, &f, &settings.kalman, 0..dataset.len(), None)?;
    let (u, v) = dataset.filled_inputs()?;
    let h = settings.horizon;
    let outputs = execution
        .map(&starts, |&s| -> Result<Vec<DVector<f64>>> {
            let traj = rollout(dm, &est.means[s], &u[s..s + h], &v[s..s + h], &f[s..s + h], h)?;
            Ok(traj.outputs.into_iter().skip(1).collect())
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(Predictions {
        predictor: PredictorKind::Fixed,
        cadence: settings.cadence(),
        horizon: h,
        zone_ids: dataset.zone_ids.clone(),
        starts,
        outputs,
    })
}

/// Tracked state at each start; the latest snapshot estimate of the gains is
/// held over the horizon.
pub fn predict_online_ig(
    dm: &DiscreteModel,
    dataset: &TimeSeriesDataset,
    settings: &PredictionSettings,
    execution: Execution,
) -> Result<Predictions> {
    let starts = settings.starts(dataset.len())?;
    let solver = SnapshotSolver::new(dm, settings.allow_rank_deficient)?;
    let ig =
        IgSettings { kalman: settings.kalman, init_window: settings.tracker_window, allow_rank_deficient: settings.allow_rank_deficient };
    let x0 = tracker_initial_state(dm, dataset, &ig)?;
    let trace = track_internal_gains(dm, &solver, dataset, &x0)?;
    let (u, v) = dataset.filled_inputs()?;
    let h = settings.horizon;
    let outputs = execution
        .map(&starts, |&s| -> Result<Vec<DVector<f64>>> {
            let hold = trace.latest_at(s).cloned().unwrap_or_else(|| DVector::zeros(dm.zones()));
            let f = vec![hold; h];
            let traj = rollout(dm, &trace.states[s], &u[s..s + h], &v[s..s + h], &f, h)?;
            Ok(traj.outputs.into_iter().skip(1).collect())
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(Predictions {
        predictor: PredictorKind::Online,
        cadence: settings.cadence(),
        horizon: h,
        zone_ids: dataset.zone_ids.clone(),
        starts,
        outputs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn start_grids() {
        let mut s = PredictionSettings { horizon: 4, warmup: 2, period: 3, ..Default::default() };
        assert_eq!(s.starts(12).unwrap(), vec![2, 5]);
        s.pooling = Pooling::Sliding;
        assert_eq!(s.starts(12).unwrap(), (2..=7).collect::<Vec<_>>());
        s.horizon = 10;
        assert!(matches!(s.starts(12), Err(Error::Horizon { .. })));
    }
}
