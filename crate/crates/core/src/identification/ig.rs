//! Internal-gains estimation: one-step snapshot solves, per-week tracking and
//! the averaged time-of-week profile.

use std::path::Path;

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};
use nalgebra::{DMatrix, DVector, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::DiscreteModel;
use crate::simulation::dataset::{fmt_value, read_table, write_table};
use crate::simulation::kalman::{smoothed_initial_state, KalmanConfig};
use crate::simulation::rollout::zero_gains;
use crate::simulation::TimeSeriesDataset;

/// Singular values below this fraction of the largest one count as zero.
const RANK_TOLERANCE: f64 = 1e-10;

/// One model step with `f_IG = 0` (background gains `c_IG` kept).
pub fn simulate_no_ig(
    dm: &DiscreteModel,
    x_prev: &DVector<f64>,
    u_prev: &DVector<f64>,
    v_prev: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let x = crate::simulation::rollout::step(dm, x_prev, u_prev, v_prev, &DVector::zeros(dm.zones()))?;
    let y = &dm.c * &x;
    Ok((x, y))
}

/// Least-squares solver for `(C B_IG) f = ȳ − ỹ`.
#[derive(Debug, Clone)]
pub struct SnapshotSolver {
    matrix: DMatrix<f64>,
    svd: SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    qr: Option<nalgebra::linalg::QR<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    condition: f64,
    rank_deficient: bool,
}

impl SnapshotSolver {
    /// Factorizes `C B_IG`. A rank-deficient matrix is an error unless
    /// `allow_rank_deficient`, in which case solves return the minimum-norm
    /// least-squares solution.
    pub fn new(dm: &DiscreteModel, allow_rank_deficient: bool) -> Result<Self> {
        let matrix = &dm.c * &dm.b_ig;
        let svd = SVD::new(matrix.clone(), true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        let rank_deficient = !(smin > RANK_TOLERANCE * smax) || matrix.nrows() < matrix.ncols();
        if rank_deficient {
            if !allow_rank_deficient {
                return Err(Error::Singular(condition));
            }
            log::warn!("C·B_IG is rank deficient (condition {condition:e}); using minimum-norm solutions");
        }
        let qr = (!rank_deficient).then(|| matrix.clone().qr());
        Ok(SnapshotSolver { matrix, svd, qr, condition, rank_deficient })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn condition_number(&self) -> f64 {
        self.condition
    }

    pub fn is_rank_deficient(&self) -> bool {
        self.rank_deficient
    }

    pub fn solve(&self, residual: &DVector<f64>) -> DVector<f64> {
        match &self.qr {
            // R f = Qᵀ b restricted to the leading square block
            Some(qr) => {
                let n = self.matrix.ncols();
                let qtb = qr.q().tr_mul(residual);
                let r = qr.r();
                let rhs = qtb.rows(0, n).into_owned();
                r.solve_upper_triangular(&rhs).expect("full-rank triangular factor")
            }
            None => {
                let smax = self.svd.singular_values.max();
                self.svd.solve(residual, RANK_TOLERANCE * smax).expect("SVD computed with both factors")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IgSnapshot {
    pub gains: DVector<f64>,
    pub rank_deficient: bool,
}

/// Solves `(C B_IG) f(k−1) = ȳ(k) − ỹ(k)`.
pub fn estimate_ig_snapshot(dm: &DiscreteModel, y_measured: &DVector<f64>, y_simulated: &DVector<f64>) -> Result<IgSnapshot> {
    estimate_ig_snapshot_with(dm, y_measured, y_simulated, false)
}

pub fn estimate_ig_snapshot_with(
    dm: &DiscreteModel,
    y_measured: &DVector<f64>,
    y_simulated: &DVector<f64>,
    allow_rank_deficient: bool,
) -> Result<IgSnapshot> {
    if y_measured.len() != dm.zones() || y_simulated.len() != dm.zones() {
        return Err(Error::Dimension("measurement length differs from zone count".into()));
    }
    let solver = SnapshotSolver::new(dm, allow_rank_deficient)?;
    Ok(IgSnapshot { gains: solver.solve(&(y_measured - y_simulated)), rank_deficient: solver.is_rank_deficient() })
}

/// Observer that alternates `simulate_no_ig` and the snapshot solve, so the
/// tracked state always reproduces the latest complete measurement.
#[derive(Debug, Clone)]
pub struct IgTrace {
    /// Tracked state per sample.
    pub states: Vec<DVector<f64>>,
    /// `gains[k]` is the estimate of `f_IG(k)`, obtained from `ȳ(k+1)`;
    /// `None` when that measurement is incomplete (the previous estimate is
    /// then carried forward in the state update). The last entry is always
    /// `None`.
    pub gains: Vec<Option<DVector<f64>>>,
}

impl IgTrace {
    /// Most recent estimate available at sample `k` (uses data up to `ȳ(k)`).
    pub fn latest_at(&self, k: usize) -> Option<&DVector<f64>> {
        (0..k).rev().find_map(|i| self.gains[i].as_ref())
    }
}

pub fn track_internal_gains(
    dm: &DiscreteModel,
    solver: &SnapshotSolver,
    dataset: &TimeSeriesDataset,
    x0: &DVector<f64>,
) -> Result<IgTrace> {
    let n = dataset.len();
    let (u, v) = dataset.filled_inputs()?;
    let mut states = Vec::with_capacity(n);
    let mut gains = Vec::with_capacity(n);
    states.push(x0.clone());
    let mut last = DVector::zeros(dm.zones());
    for k in 1..n {
        let (x_sim, y_sim) = simulate_no_ig(dm, &states[k - 1], &u[k - 1], &v[k - 1])?;
        let f = if dataset.y[k].iter().all(|e| e.is_finite()) {
            let f = solver.solve(&(&dataset.y[k] - y_sim));
            last = f.clone();
            Some(f)
        } else {
            None
        };
        let x = x_sim + &dm.b_ig * &last;
        if let Some(state) = x.iter().position(|e| !e.is_finite()) {
            return Err(Error::NonFinite { step: k, state });
        }
        states.push(x);
        gains.push(f);
    }
    gains.push(None);
    Ok(IgTrace { states, gains })
}

/// Settings for the internal-gains estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IgSettings {
    pub kalman: KalmanConfig,
    /// Samples used to smooth the tracker's initial state (with `f_IG = 0`).
    pub init_window: usize,
    pub allow_rank_deficient: bool,
}

impl Default for IgSettings {
    fn default() -> Self {
        IgSettings { kalman: KalmanConfig::default(), init_window: 32, allow_rank_deficient: false }
    }
}

/// Initial state for tracking: smoothed estimate over the first samples.
pub fn tracker_initial_state(dm: &DiscreteModel, dataset: &TimeSeriesDataset, settings: &IgSettings) -> Result<DVector<f64>> {
    let f = zero_gains(dm.zones(), dataset.len());
    smoothed_initial_state(dm, dataset, &f, &settings.kalman, 0, settings.init_window)
}

/// Weekly grid anchored at Monday 00:00.
pub fn slots_per_week(dt: f64) -> usize {
    (7.0 * 86400.0 / dt).round() as usize
}

pub fn slot_of(t: &NaiveDateTime, dt: f64) -> usize {
    let secs = t.weekday().num_days_from_monday() as f64 * 86400.0 + t.num_seconds_from_midnight() as f64 + t.nanosecond() as f64 * 1e-9;
    ((secs / dt).floor() as usize) % slots_per_week(dt)
}

/// Label `Day HH:MM` for a slot on the weekly grid.
pub fn slot_label(slot: usize, dt: f64) -> String {
    let anchor = NaiveDate::from_ymd_opt(1970, 1, 5).and_then(|d| d.and_hms_opt(0, 0, 0)).expect("valid anchor");
    let t = anchor + chrono::Duration::milliseconds((slot as f64 * dt * 1000.0).round() as i64);
    t.format("%a %H:%M").to_string()
}

/// Averaged internal-gains deviation on a weekly grid, with the per-week
/// estimates it was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct InternalGainsProfile {
    pub dt: f64,
    pub zone_ids: Vec<String>,
    pub c_ig: Vec<f64>,
    /// `f̂_IG` per slot.
    pub mean: Vec<DVector<f64>>,
    /// Number of week estimates averaged into each slot.
    pub counts: Vec<usize>,
    /// Per-week estimates per slot (`None` where missing).
    pub weekly: Vec<Vec<Option<DVector<f64>>>>,
}

impl InternalGainsProfile {
    /// Pointwise mean over the weeks that have a value. Slots without any
    /// estimate take the value of the preceding slot (zero if none exists).
    pub fn from_weekly(dt: f64, zone_ids: Vec<String>, c_ig: Vec<f64>, weekly: Vec<Vec<Option<DVector<f64>>>>) -> Result<Self> {
        let slots = slots_per_week(dt);
        let zones = zone_ids.len();
        if weekly.iter().any(|w| w.len() != slots) {
            return Err(Error::Dimension(format!("weekly estimates must have {slots} slots")));
        }
        let mut mean = vec![DVector::zeros(zones); slots];
        let mut counts = vec![0usize; slots];
        for week in &weekly {
            for (s, f) in week.iter().enumerate() {
                if let Some(f) = f {
                    if f.len() != zones {
                        return Err(Error::Dimension("estimate width differs from zone count".into()));
                    }
                    mean[s] += f;
                    counts[s] += 1;
                }
            }
        }
        for s in 0..slots {
            if counts[s] > 0 {
                mean[s] /= counts[s] as f64;
            }
        }
        if let Some(first) = (0..slots).find(|&s| counts[s] > 0) {
            for i in 1..=slots {
                let s = (first + i) % slots;
                if counts[s] == 0 {
                    mean[s] = mean[(s + slots - 1) % slots].clone();
                }
            }
        }
        Ok(InternalGainsProfile { dt, zone_ids, c_ig, mean, counts, weekly })
    }

    pub fn slots(&self) -> usize {
        self.mean.len()
    }

    pub fn gains_at(&self, t: &NaiveDateTime) -> &DVector<f64> {
        &self.mean[slot_of(t, self.dt)]
    }

    /// `f̂_IG` aligned with the samples of `dataset`.
    pub fn sequence_for(&self, dataset: &TimeSeriesDataset) -> Result<Vec<DVector<f64>>> {
        if dataset.zone_ids != self.zone_ids {
            return Err(Error::Mismatch("profile zones differ from dataset zones".into()));
        }
        if (dataset.dt - self.dt).abs() > 1e-9 {
            return Err(Error::Mismatch(format!("profile step {} s, dataset step {} s", self.dt, dataset.dt)));
        }
        Ok(dataset.timestamps.iter().map(|t| self.gains_at(t).clone()).collect())
    }

    /// CSV: `slot, time_of_week, count, f_<zone>...` with a `# c_ig:` line.
    pub fn write_csv(&self, path: impl AsRef<Path>, config_hash: Option<&str>) -> Result<()> {
        let mut header = vec!["slot".to_string(), "time_of_week".to_string(), "count".to_string()];
        header.extend(self.zone_ids.iter().map(|z| format!("f_{z}")));
        let rows: Vec<Vec<String>> = (0..self.slots())
            .map(|s| {
                let mut row = vec![s.to_string(), slot_label(s, self.dt), self.counts[s].to_string()];
                row.extend(self.mean[s].iter().map(|v| fmt_value(*v)));
                row
            })
            .collect();
        let c_ig = self.c_ig.iter().map(|c| format!("{c}")).collect::<Vec<_>>().join(" ");
        let meta = match config_hash {
            Some(h) => format!("{h}\n# dt: {}\n# c_ig: {c_ig}", self.dt),
            None => format!("unknown\n# dt: {}\n# c_ig: {c_ig}", self.dt),
        };
        write_table(path.as_ref(), Some(&meta), &header, &rows)
    }

    /// Per-week estimates in long format: `week, slot, time_of_week, f_<zone>...`.
    pub fn write_weekly_csv(&self, path: impl AsRef<Path>, config_hash: Option<&str>) -> Result<()> {
        let mut header = vec!["week".to_string(), "slot".to_string(), "time_of_week".to_string()];
        header.extend(self.zone_ids.iter().map(|z| format!("f_{z}")));
        let mut rows = Vec::new();
        for (w, week) in self.weekly.iter().enumerate() {
            for (s, f) in week.iter().enumerate() {
                let mut row = vec![w.to_string(), s.to_string(), slot_label(s, self.dt)];
                match f {
                    Some(f) => row.extend(f.iter().map(|v| fmt_value(*v))),
                    None => row.extend(self.zone_ids.iter().map(|_| String::new())),
                }
                rows.push(row);
            }
        }
        write_table(path.as_ref(), config_hash, &header, &rows)
    }

    /// Reads a profile CSV (the per-week estimates are not restored).
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let comments = crate::simulation::dataset::read_comments(path)?;
        let get = |key: &str| comments.iter().find(|(k, _)| k == key).map(|(_, v)| v.clone());
        let dt: f64 = get("dt")
            .ok_or_else(|| Error::Dataset("profile lacks a `# dt:` line".into()))?
            .parse()
            .map_err(|e| Error::Dataset(format!("profile dt: {e}")))?;
        let c_ig = get("c_ig")
            .unwrap_or_default()
            .split_whitespace()
            .map(|s| s.parse::<f64>().map_err(|e| Error::Dataset(format!("profile c_ig: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        let (header, rows) = read_table(path)?;
        let zone_ids: Vec<String> = header.iter().filter_map(|h| h.strip_prefix("f_").map(str::to_string)).collect();
        let first = header.iter().position(|h| h.starts_with("f_")).unwrap_or(header.len());
        let count_col = header.iter().position(|h| h == "count");
        let mut mean = Vec::with_capacity(rows.len());
        let mut counts = Vec::with_capacity(rows.len());
        for row in &rows {
            let vals = row[first..first + zone_ids.len()]
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Dataset(format!("profile value: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            mean.push(DVector::from_vec(vals));
            counts.push(count_col.and_then(|c| row[c].trim().parse().ok()).unwrap_or(0));
        }
        if mean.len() != slots_per_week(dt) {
            return Err(Error::Dataset(format!("profile has {} slots, expected {}", mean.len(), slots_per_week(dt))));
        }
        Ok(InternalGainsProfile { dt, zone_ids, c_ig, mean, counts, weekly: Vec::new() })
    }
}

/// Estimates `f_IG,w` for every training week by tracking, then averages
/// them per time-of-week slot.
pub fn estimate_fixed_ig(
    dm: &DiscreteModel,
    weeks: &[TimeSeriesDataset],
    settings: &IgSettings,
    execution: Execution,
) -> Result<InternalGainsProfile> {
    if weeks.is_empty() {
        return Err(Error::Dataset("no training weeks".into()));
    }
    let solver = SnapshotSolver::new(dm, settings.allow_rank_deficient)?;
    let dt = weeks[0].dt;
    let slots = slots_per_week(dt);
    let zone_ids = dm.network().zone_ids.clone();
    let weekly = execution
        .map(weeks, |week| -> Result<Vec<Option<DVector<f64>>>> {
            if week.zone_ids != zone_ids {
                return Err(Error::Mismatch("training week zones differ from model zones".into()));
            }
            if (week.dt - dt).abs() > 1e-9 {
                return Err(Error::Mismatch("training weeks use different time steps".into()));
            }
            let x0 = tracker_initial_state(dm, week, settings)?;
            let trace = track_internal_gains(dm, &solver, week, &x0)?;
            let mut out = vec![None; slots];
            for (k, f) in trace.gains.into_iter().enumerate() {
                if let Some(f) = f {
                    if week.inputs_complete(k) {
                        out[slot_of(&week.timestamps[k], dt)] = Some(f);
                    }
                }
            }
            Ok(out)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    InternalGainsProfile::from_weekly(dt, zone_ids, dm.c_ig.iter().copied().collect(), weekly)
}
