//! Kalman filter and Rauch–Tung–Striebel smoother for the discrete bilinear
//! model with known airflows (the model is linear time-varying once `u` is
//! given).

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DiscreteModel;
use crate::simulation::dataset::TimeSeriesDataset;

/// Noise levels in °C² (per step for process noise).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KalmanConfig {
    pub process_noise_air: f64,
    pub process_noise_wall: f64,
    pub measurement_noise: f64,
    pub initial_variance_air: f64,
    pub initial_variance_wall: f64,
}

impl Default for KalmanConfig {
    fn default() -> Self {
        KalmanConfig {
            process_noise_air: 1e-4,
            process_noise_wall: 1e-5,
            measurement_noise: 0.05 * 0.05,
            initial_variance_air: 1.0,
            initial_variance_wall: 4.0,
        }
    }
}

impl KalmanConfig {
    /// For data without measurement or process noise.
    pub fn noiseless() -> Self {
        KalmanConfig {
            process_noise_air: 1e-12,
            process_noise_wall: 1e-12,
            measurement_noise: 1e-10,
            initial_variance_air: 1.0,
            initial_variance_wall: 9.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.process_noise_air,
            self.process_noise_wall,
            self.measurement_noise,
            self.initial_variance_air,
            self.initial_variance_wall,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config("Kalman variances must be positive".into()));
        }
        Ok(())
    }

    fn diagonal(&self, dm: &DiscreteModel, air: f64, wall: f64) -> DMatrix<f64> {
        let net = dm.network();
        DMatrix::from_diagonal(&DVector::from_iterator(dm.states(), (0..dm.states()).map(|i| if net.is_room(i) { air } else { wall })))
    }

    pub fn process_covariance(&self, dm: &DiscreteModel) -> DMatrix<f64> {
        self.diagonal(dm, self.process_noise_air, self.process_noise_wall)
    }

    pub fn initial_covariance(&self, dm: &DiscreteModel) -> DMatrix<f64> {
        self.diagonal(dm, self.initial_variance_air, self.initial_variance_wall)
    }
}

/// Prior mean from a single measurement: every room takes its zone reading,
/// every layer node the mean of the readings.
pub fn initial_state_guess(dm: &DiscreteModel, y: &DVector<f64>) -> DVector<f64> {
    let net = dm.network();
    let finite: Vec<f64> = y.iter().copied().filter(|v| v.is_finite()).collect();
    let mean = if finite.is_empty() { 20.0 } else { finite.iter().sum::<f64>() / finite.len() as f64 };
    DVector::from_iterator(
        dm.states(),
        (0..dm.states()).map(|i| match net.is_room(i) {
            true => {
                let z = net.state_zone[i].expect("room has a zone");
                if y[z].is_finite() {
                    y[z]
                } else {
                    mean
                }
            }
            false => mean,
        }),
    )
}

#[derive(Debug, Clone)]
pub struct KalmanEstimate {
    pub start: usize,
    /// Filtered means `x̂(k|k)`, `k = start..end`.
    pub means: Vec<DVector<f64>>,
    pub covariances: Vec<DMatrix<f64>>,
    /// `y(k) − C x̂(k|k−1)`; NaN where the measurement is missing.
    pub innovations: Vec<DVector<f64>>,
    /// Normalized innovation squared; NaN when no measurement was used.
    pub nis: Vec<f64>,
    /// Number of measurement components used at each step.
    pub measured: Vec<usize>,
    /// Predicted means `x̂(k|k−1)` (the prior at `start`).
    predicted: Vec<DVector<f64>>,
    predicted_cov: Vec<DMatrix<f64>>,
    transitions: Vec<DMatrix<f64>>,
}

fn check_psd(p: &DMatrix<f64>, step: usize) -> Result<()> {
    if p.iter().any(|v| !v.is_finite()) || p.diagonal().iter().any(|d| *d < 0.0) {
        return Err(Error::Covariance(step));
    }
    let scale = p.diagonal().max().max(1e-300);
    let shifted = p + DMatrix::identity(p.nrows(), p.ncols()) * (scale * 1e-12);
    if Cholesky::new(shifted).is_none() {
        return Err(Error::Covariance(step));
    }
    Ok(())
}

fn symmetrize(p: &mut DMatrix<f64>) {
    let t = p.transpose();
    *p += t;
    *p *= 0.5;
}

/// Runs the filter over `range` of the dataset. The prior at `range.start` is
/// `x0` (or a guess from the first measurement) with the configured initial
/// covariance. `f_ig` is indexed like the dataset.
pub fn kalman_filter(
    dm: &DiscreteModel,
    dataset: &TimeSeriesDataset,
    f_ig: &[DVector<f64>],
    config: &KalmanConfig,
    range: std::ops::Range<usize>,
    x0: Option<&DVector<f64>>,
) -> Result<KalmanEstimate> {
    config.validate()?;
    if range.start >= range.end || range.end > dataset.len() {
        return Err(Error::Dataset(format!("invalid filter range {range:?} for {} samples", dataset.len())));
    }
    if f_ig.len() < range.end || dataset.zones() != dm.zones() {
        return Err(Error::Dimension("internal gains or zone count do not match the model".into()));
    }
    let (u, v) = dataset.filled_inputs()?;
    let n = dm.states();
    let q = config.process_covariance(dm);
    let len = range.len();
    let mut est = KalmanEstimate {
        start: range.start,
        means: Vec::with_capacity(len),
        covariances: Vec::with_capacity(len),
        innovations: Vec::with_capacity(len),
        nis: Vec::with_capacity(len),
        measured: Vec::with_capacity(len),
        predicted: Vec::with_capacity(len),
        predicted_cov: Vec::with_capacity(len),
        transitions: Vec::with_capacity(len),
    };

    let mut x = match x0 {
        Some(x0) if x0.len() == n => x0.clone(),
        Some(_) => return Err(Error::Dimension("initial state length".into())),
        None => initial_state_guess(dm, &dataset.y[range.start]),
    };
    let mut p = config.initial_covariance(dm);
    for k in range.clone() {
        if k > range.start {
            let f = dm.transition(&u[k - 1]);
            x = &f * &x + dm.forcing(&u[k - 1], &v[k - 1], &f_ig[k - 1]);
            p = &f * &p * f.transpose() + &q;
            symmetrize(&mut p);
            est.transitions.push(f);
        }
        if let Some(state) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: k, state });
        }
        est.predicted.push(x.clone());
        est.predicted_cov.push(p.clone());

        let idx: Vec<usize> = (0..dm.zones()).filter(|&z| dataset.y[k][z].is_finite()).collect();
        let y_pred = &dm.c * &x;
        let mut innovation = DVector::from_element(dm.zones(), f64::NAN);
        let mut nis = f64::NAN;
        if !idx.is_empty() {
            let m = idx.len();
            let h = DMatrix::from_fn(m, n, |r, c| dm.c[(idx[r], c)]);
            let e = DVector::from_fn(m, |r, _| dataset.y[k][idx[r]] - y_pred[idx[r]]);
            let ph = &p * h.transpose();
            let s = &h * &ph + DMatrix::identity(m, m) * config.measurement_noise;
            let chol = Cholesky::new(s).ok_or(Error::Covariance(k))?;
            // K = P Hᵀ S⁻¹
            let gain = chol.solve(&ph.transpose()).transpose();
            let s_inv_e = chol.solve(&e);
            nis = e.dot(&s_inv_e);
            x += &gain * &e;
            let mut ikh = DMatrix::identity(n, n);
            ikh -= &gain * &h;
            p = &ikh * &p * ikh.transpose() + &gain * gain.transpose() * config.measurement_noise;
            symmetrize(&mut p);
            for (r, &z) in idx.iter().enumerate() {
                innovation[z] = e[r];
            }
        }
        check_psd(&p, k)?;
        est.means.push(x.clone());
        est.covariances.push(p.clone());
        est.innovations.push(innovation);
        est.nis.push(nis);
        est.measured.push(idx.len());
    }
    Ok(est)
}

impl KalmanEstimate {
    /// Rauch–Tung–Striebel smoothed means over the filtered range.
    pub fn smooth(&self) -> Result<Vec<DVector<f64>>> {
        let len = self.means.len();
        let mut out = vec![DVector::zeros(0); len];
        out[len - 1] = self.means[len - 1].clone();
        for i in (0..len - 1).rev() {
            // x_s(i) = x_f(i) + P_f(i) Fᵀ P_pred(i+1)⁻¹ (x_s(i+1) − x_pred(i+1))
            let chol: Cholesky<f64, Dyn> = Cholesky::new(self.predicted_cov[i + 1].clone()).ok_or(Error::Covariance(self.start + i + 1))?;
            let d = &out[i + 1] - &self.predicted[i + 1];
            let w = chol.solve(&d);
            let corr = &self.covariances[i] * (self.transitions[i].transpose() * w);
            out[i] = &self.means[i] + corr;
        }
        Ok(out)
    }
}

/// Smoothed estimate of the state at `start` from the `window` samples that
/// follow it.
pub fn smoothed_initial_state(
    dm: &DiscreteModel,
    dataset: &TimeSeriesDataset,
    f_ig: &[DVector<f64>],
    config: &KalmanConfig,
    start: usize,
    window: usize,
) -> Result<DVector<f64>> {
    let end = (start + window.max(1)).min(dataset.len());
    let est = kalman_filter(dm, dataset, f_ig, config, start..end, None)?;
    Ok(est.smooth()?.swap_remove(0))
}
