//! Prediction scoring: per-zone RMS, RMS versus horizon, predictor
//! comparison, replication statistics and plot-ready CSV output.

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, DiscreteCDF};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::identification::ig::{slot_label, InternalGainsProfile};
use crate::identification::predict::{predict_fixed_ig, predict_online_ig, Pooling, PredictionSettings, PredictionTable, Predictions};
use crate::model::DiscreteModel;
use crate::simulation::dataset::{fmt_value, write_table};
use crate::simulation::TimeSeriesDataset;

pub const REPORT_SCHEMA: &str = "thermident-evaluation/1";

/// Per-zone RMS over aligned samples. Pairs where either value is missing
/// are skipped zone by zone.
pub fn rms_by_zone(predicted: &[DVector<f64>], measured: &[DVector<f64>]) -> Result<DVector<f64>> {
    if predicted.len() != measured.len() {
        return Err(Error::Dimension(format!("{} predictions for {} measurements", predicted.len(), measured.len())));
    }
    let zones = predicted.first().map(|p| p.len()).ok_or(Error::EmptyOverlap)?;
    let mut acc = ErrorAccumulator::new(zones, 1);
    for (p, m) in predicted.iter().zip(measured) {
        if p.len() != zones || m.len() != zones {
            return Err(Error::Dimension("sample width differs".into()));
        }
        acc.add(0, p, m);
    }
    acc.pooled_rms()
}

/// Running sums of squared errors per lead and zone.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorAccumulator {
    sum_sq: Vec<Vec<f64>>,
    counts: Vec<Vec<usize>>,
}

impl ErrorAccumulator {
    pub fn new(zones: usize, leads: usize) -> Self {
        ErrorAccumulator { sum_sq: vec![vec![0.0; zones]; leads], counts: vec![vec![0; zones]; leads] }
    }

    pub fn leads(&self) -> usize {
        self.sum_sq.len()
    }

    pub fn zones(&self) -> usize {
        self.sum_sq.first().map(Vec::len).unwrap_or(0)
    }

    /// Adds one prediction at lead index `lead` (0-based).
    pub fn add(&mut self, lead: usize, predicted: &DVector<f64>, measured: &DVector<f64>) {
        for z in 0..predicted.len() {
            let e = predicted[z] - measured[z];
            if e.is_finite() {
                self.sum_sq[lead][z] += e * e;
                self.counts[lead][z] += 1;
            }
        }
    }

    pub fn add_predictions(&mut self, preds: &Predictions, dataset: &TimeSeriesDataset) -> Result<()> {
        if preds.zone_ids != dataset.zone_ids || preds.zone_ids.len() != self.zones() {
            return Err(Error::Mismatch("prediction zones differ from dataset zones".into()));
        }
        if preds.horizon > self.leads() {
            return Err(Error::Horizon { horizon: preds.horizon, available: self.leads() });
        }
        for (i, &s) in preds.starts.iter().enumerate() {
            for (l, yhat) in preds.outputs[i].iter().enumerate() {
                self.add(l, yhat, &dataset.y[s + l + 1]);
            }
        }
        Ok(())
    }

    pub fn add_table(&mut self, table: &PredictionTable) -> Result<()> {
        if table.zone_ids.len() != self.zones() {
            return Err(Error::Mismatch("prediction table zone count".into()));
        }
        for ((lead, p), m) in table.leads.iter().zip(&table.predicted).zip(&table.measured) {
            if *lead == 0 || *lead > self.leads() {
                return Err(Error::Horizon { horizon: *lead, available: self.leads() });
            }
            self.add(lead - 1, p, m);
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ErrorAccumulator) -> Result<()> {
        if other.leads() != self.leads() || other.zones() != self.zones() {
            return Err(Error::Mismatch("accumulator shapes differ".into()));
        }
        for l in 0..self.leads() {
            for z in 0..self.zones() {
                self.sum_sq[l][z] += other.sum_sq[l][z];
                self.counts[l][z] += other.counts[l][z];
            }
        }
        Ok(())
    }

    /// RMS per zone pooled over all leads.
    pub fn pooled_rms(&self) -> Result<DVector<f64>> {
        DVector::from_iterator(
            self.zones(),
            (0..self.zones()).map(|z| {
                let n: usize = self.counts.iter().map(|c| c[z]).sum();
                let s: f64 = self.sum_sq.iter().map(|c| c[z]).sum();
                (n > 0).then(|| (s / n as f64).sqrt())
            }),
        )
        .iter()
        .map(|v| v.ok_or(Error::EmptyOverlap))
        .collect::<Result<Vec<f64>>>()
        .map(DVector::from_vec)
    }

    pub fn samples(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn curve(&self, zone_ids: &[String]) -> Result<HorizonCurve> {
        let mut rms = Vec::with_capacity(self.leads());
        let mut samples = Vec::with_capacity(self.leads());
        for l in 0..self.leads() {
            let row = (0..self.zones())
                .map(|z| match self.counts[l][z] {
                    0 => Err(Error::EmptyOverlap),
                    n => Ok((self.sum_sq[l][z] / n as f64).sqrt()),
                })
                .collect::<Result<Vec<f64>>>()?;
            rms.push(row);
            samples.push(self.counts[l].iter().copied().min().unwrap_or(0));
        }
        let mean = rms.iter().map(|r| r.iter().sum::<f64>() / r.len().max(1) as f64).collect();
        Ok(HorizonCurve { zone_ids: zone_ids.to_vec(), horizons: (1..=self.leads()).collect(), rms, mean, samples })
    }
}

/// RMS by prediction horizon (steps), per zone and averaged over zones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonCurve {
    pub zone_ids: Vec<String>,
    pub horizons: Vec<usize>,
    /// `rms[h][z]`
    pub rms: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    /// Pooled samples per horizon (minimum over zones).
    pub samples: Vec<usize>,
}

impl HorizonCurve {
    /// Spearman rank correlation between horizon and mean RMS.
    pub fn trend(&self) -> f64 {
        let h: Vec<f64> = self.horizons.iter().map(|&h| h as f64).collect();
        spearman(&h, &self.mean)
    }

    /// Least-squares slope of each zone's RMS against horizon, °C per step.
    pub fn growth_slopes(&self) -> Vec<f64> {
        let h: Vec<f64> = self.horizons.iter().map(|&h| h as f64).collect();
        (0..self.zone_ids.len())
            .map(|z| {
                let r: Vec<f64> = self.rms.iter().map(|row| row[z]).collect();
                linear_slope(&h, &r)
            })
            .collect()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, config_hash: Option<&str>) -> Result<()> {
        let mut header = vec!["horizon".to_string(), "samples".to_string(), "mean".to_string()];
        header.extend(self.zone_ids.iter().cloned());
        let rows: Vec<Vec<String>> = (0..self.horizons.len())
            .map(|i| {
                let mut row = vec![self.horizons[i].to_string(), self.samples[i].to_string(), fmt_value(self.mean[i])];
                row.extend(self.rms[i].iter().map(|v| fmt_value(*v)));
                row
            })
            .collect();
        write_table(path.as_ref(), config_hash, &header, &rows)
    }
}

/// Which predictor to score.
#[derive(Debug, Clone, Copy)]
pub enum Predictor<'a> {
    Fixed(&'a InternalGainsProfile),
    Online,
}

pub fn predict(
    dm: &DiscreteModel,
    predictor: Predictor<'_>,
    dataset: &TimeSeriesDataset,
    settings: &PredictionSettings,
    execution: Execution,
) -> Result<Predictions> {
    match predictor {
        Predictor::Fixed(profile) => predict_fixed_ig(dm, profile, dataset, settings, execution),
        Predictor::Online => predict_online_ig(dm, dataset, settings, execution),
    }
}

/// RMS at horizons `1..=max_horizon`, pooled over every start allowed by
/// `pooling` (Kalman- or tracker-initialized at each start).
pub fn horizon_curve(
    dm: &DiscreteModel,
    predictor: Predictor<'_>,
    dataset: &TimeSeriesDataset,
    max_horizon: usize,
    pooling: Pooling,
    base: &PredictionSettings,
    execution: Execution,
) -> Result<HorizonCurve> {
    let settings = PredictionSettings { horizon: max_horizon, pooling, ..*base };
    let preds = predict(dm, predictor, dataset, &settings, execution)?;
    let mut acc = ErrorAccumulator::new(dataset.zones(), max_horizon);
    acc.add_predictions(&preds, dataset)?;
    acc.curve(&dataset.zone_ids)
}

/// Score of one predictor on one data set at one cadence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorScore {
    pub predictor: String,
    pub dataset: String,
    pub cadence: String,
    pub zone_ids: Vec<String>,
    pub per_zone_rms: Vec<f64>,
    pub mean_rms: f64,
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon_curve: Option<HorizonCurve>,
}

impl PredictorScore {
    pub fn from_accumulator(
        predictor: &str,
        dataset: &str,
        cadence: &str,
        zone_ids: &[String],
        acc: &ErrorAccumulator,
        with_curve: bool,
    ) -> Result<Self> {
        let rms: Vec<f64> = acc.pooled_rms()?.iter().copied().collect();
        Ok(PredictorScore {
            predictor: predictor.to_string(),
            dataset: dataset.to_string(),
            cadence: cadence.to_string(),
            zone_ids: zone_ids.to_vec(),
            mean_rms: rms.iter().sum::<f64>() / rms.len().max(1) as f64,
            per_zone_rms: rms,
            samples: acc.samples(),
            horizon_curve: if with_curve { Some(acc.curve(zone_ids)?) } else { None },
        })
    }

    /// Score from per-zone RMS values alone (e.g. published tables).
    pub fn from_zone_rms(predictor: &str, dataset: &str, cadence: &str, zone_ids: &[String], rms: &[f64]) -> Self {
        PredictorScore {
            predictor: predictor.to_string(),
            dataset: dataset.to_string(),
            cadence: cadence.to_string(),
            zone_ids: zone_ids.to_vec(),
            per_zone_rms: rms.to_vec(),
            mean_rms: rms.iter().sum::<f64>() / rms.len().max(1) as f64,
            samples: 0,
            horizon_curve: None,
        }
    }
}

/// A fixed and an online score stored together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorePair {
    pub fixed: PredictorScore,
    pub online: PredictorScore,
}

impl ScorePair {
    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub dataset: String,
    pub cadence: String,
    pub zone_ids: Vec<String>,
    pub fixed: PredictorScore,
    pub online: PredictorScore,
    /// `(fixed − online) / fixed` per zone, percent.
    pub improvement_per_zone: Vec<f64>,
    /// Same ratio on the mean RMS values, percent.
    pub improvement_mean: f64,
}

/// Compares two scores taken on the same data at the same cadence.
pub fn compare_predictors(fixed: &PredictorScore, online: &PredictorScore, config_hash: &str, seeds: &[u64]) -> Result<EvaluationReport> {
    if fixed.zone_ids != online.zone_ids {
        return Err(Error::Mismatch("scores cover different zones".into()));
    }
    if fixed.cadence != online.cadence {
        return Err(Error::Mismatch(format!("cadence `{}` vs `{}`", fixed.cadence, online.cadence)));
    }
    if fixed.dataset != online.dataset {
        return Err(Error::Mismatch(format!("dataset `{}` vs `{}`", fixed.dataset, online.dataset)));
    }
    if fixed.per_zone_rms.len() != fixed.zone_ids.len() || online.per_zone_rms.len() != online.zone_ids.len() {
        return Err(Error::Dimension("per-zone RMS length differs from zone count".into()));
    }
    let improvement = |f: f64, o: f64| if f > 0.0 { 100.0 * (f - o) / f } else { 0.0 };
    Ok(EvaluationReport {
        schema: REPORT_SCHEMA.to_string(),
        config_hash: config_hash.to_string(),
        seeds: seeds.to_vec(),
        dataset: fixed.dataset.clone(),
        cadence: fixed.cadence.clone(),
        zone_ids: fixed.zone_ids.clone(),
        improvement_per_zone: fixed.per_zone_rms.iter().zip(&online.per_zone_rms).map(|(f, o)| improvement(*f, *o)).collect(),
        improvement_mean: improvement(fixed.mean_rms, online.mean_rms),
        fixed: fixed.clone(),
        online: online.clone(),
    })
}

impl EvaluationReport {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }

    /// Bar-chart data: `zone, fixed, online, improvement_percent` plus a
    /// `mean` row.
    pub fn write_zone_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let header: Vec<String> = ["zone", "fixed", "online", "improvement_percent"].iter().map(|s| s.to_string()).collect();
        let mut rows: Vec<Vec<String>> = (0..self.zone_ids.len())
            .map(|z| {
                vec![
                    self.zone_ids[z].clone(),
                    fmt_value(self.fixed.per_zone_rms[z]),
                    fmt_value(self.online.per_zone_rms[z]),
                    fmt_value(self.improvement_per_zone[z]),
                ]
            })
            .collect();
        rows.push(vec!["mean".into(), fmt_value(self.fixed.mean_rms), fmt_value(self.online.mean_rms), fmt_value(self.improvement_mean)]);
        write_table(path.as_ref(), Some(&self.config_hash), &header, &rows)
    }
}

/// Temperature-equivalent internal gains `C·B_IG (c_IG + f)` per slot for
/// the averaged profile and every week estimate.
pub fn write_ig_overlay_csv(
    dm: &DiscreteModel,
    profile: &InternalGainsProfile,
    path: impl AsRef<Path>,
    config_hash: Option<&str>,
) -> Result<()> {
    let cb = &dm.c * &dm.b_ig;
    let c = DVector::from_column_slice(&profile.c_ig);
    if c.len() != cb.ncols() {
        return Err(Error::Mismatch("profile zones differ from model zones".into()));
    }
    let temp = |f: &DVector<f64>| &cb * (&c + f);
    let mut header = vec!["slot".to_string(), "time_of_week".to_string(), "series".to_string()];
    header.extend(profile.zone_ids.iter().cloned());
    let mut rows = Vec::new();
    for s in 0..profile.slots() {
        let mut row = vec![s.to_string(), slot_label(s, profile.dt), "mean".to_string()];
        row.extend(temp(&profile.mean[s]).iter().map(|v| fmt_value(*v)));
        rows.push(row);
        for (w, week) in profile.weekly.iter().enumerate() {
            let mut row = vec![s.to_string(), slot_label(s, profile.dt), format!("week{w}")];
            match &week[s] {
                Some(f) => row.extend(temp(f).iter().map(|v| fmt_value(*v))),
                None => row.extend(profile.zone_ids.iter().map(|_| String::new())),
            }
            rows.push(row);
        }
    }
    write_table(path.as_ref(), config_hash, &header, &rows)
}

/// One-sided sign test of `H0: median ≤ 0`; zeros are discarded. Returns the
/// p-value `P(X ≥ positives)` for `X ~ Binomial(n, 1/2)`.
pub fn sign_test(differences: &[f64]) -> f64 {
    let positives = differences.iter().filter(|d| **d > 0.0).count() as u64;
    let n = differences.iter().filter(|d| **d != 0.0 && d.is_finite()).count() as u64;
    if n == 0 {
        return 1.0;
    }
    let binom = Binomial::new(0.5, n).expect("valid binomial");
    if positives == 0 {
        1.0
    } else {
        binom.sf(positives - 1)
    }
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "spearman needs paired samples");
    if x.len() < 2 {
        return 0.0;
    }
    pearson(&ranks(x), &ranks(y))
}

/// Least-squares slope of `y` against `x`.
pub fn linear_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Two-sided `confidence` interval for a χ² variable with `dof` degrees of
/// freedom.
pub fn chi_square_band(dof: f64, confidence: f64) -> (f64, f64) {
    let chi = ChiSquared::new(dof).expect("positive degrees of freedom");
    let tail = (1.0 - confidence) / 2.0;
    (chi.inverse_cdf(tail), chi.inverse_cdf(1.0 - tail))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_test_values() {
        assert!((sign_test(&[1.0; 10]) - 1.0 / 1024.0).abs() < 1e-12);
        assert!((sign_test(&[1.0, -1.0]) - 0.75).abs() < 1e-12);
        assert_eq!(sign_test(&[]), 1.0);
    }

    #[test]
    fn spearman_handles_ties_and_order() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        assert_eq!(ranks(&[5.0, 1.0, 5.0]), vec![2.5, 1.0, 2.5]);
    }

    #[test]
    fn chi_square_band_brackets_mean() {
        let (lo, hi) = chi_square_band(600.0, 0.95);
        assert!(lo < 600.0 && 600.0 < hi);
        assert!((hi - lo) > 100.0 && (hi - lo) < 150.0);
    }
}
