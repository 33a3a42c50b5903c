//! Zero-order-hold discretization of the bilinear model.
//!
//! The `u = 0` linear part is propagated exactly with the matrix exponential;
//! disturbances, internal gains and the bilinear HVAC forcing are held
//! constant over the step and integrated through `Γ = ∫₀^Δt e^{Aτ} dτ`. The
//! bilinear forcing is evaluated at the start-of-step state, which keeps the
//! discrete model affine in `u`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::continuous::RcStateSpaceModel;
use crate::model::flux::disturbance;

pub const DEFAULT_STEP_SECONDS: f64 = 900.0;

/// `x(k+1) = A x + B_v v + B_IG (c_IG + f_IG) + Σ_j (B_xu_j x + B_vu_j v) u_j`,
/// `y(k) = C x(k)`.
#[derive(Debug, Clone)]
pub struct DiscreteModel {
    pub dt: f64,
    pub a: DMatrix<f64>,
    pub b_v: DMatrix<f64>,
    pub b_ig: DMatrix<f64>,
    pub b_xu: Vec<DMatrix<f64>>,
    pub b_vu: Vec<DMatrix<f64>>,
    pub c: DMatrix<f64>,
    pub c_ig: DVector<f64>,
    /// `∫₀^Δt e^{Aτ} dτ`
    pub input_integral: DMatrix<f64>,
    pub continuous: RcStateSpaceModel,
    /// (box, room state, c_p / C_room) for every bilinear tap.
    taps: Vec<(usize, usize, f64)>,
}

/// Largest eigenvalue modulus. Falls back to the Gelfand limit
/// `‖M^(2^k)‖^(1/2^k)` when the Schur iteration does not converge.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if let Some(schur) = nalgebra::Schur::try_new(m.clone(), f64::EPSILON, 10_000) {
        return schur.complex_eigenvalues().iter().map(|l| l.norm()).fold(0.0, f64::max);
    }
    let mut p = m.clone();
    let mut log_scale = 0.0;
    let mut estimate = p.norm().ln();
    for k in 1..=40 {
        let norm = p.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return if norm == 0.0 { 0.0 } else { f64::INFINITY };
        }
        p /= norm;
        log_scale = 2.0 * (log_scale + norm.ln());
        p = &p * &p;
        estimate = (log_scale + p.norm().ln()) / 2f64.powi(k);
    }
    estimate.exp()
}

pub fn discretize(model: &RcStateSpaceModel, dt: f64) -> Result<DiscreteModel> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    let n = model.states();
    let mut block = DMatrix::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(&(&model.a * dt));
    block.view_mut((0, n), (n, n)).fill_diagonal(dt);
    let e = block.exp();
    let a = e.view((0, 0), (n, n)).into_owned();
    let gamma = e.view((0, n), (n, n)).into_owned();

    let radius = spectral_radius(&a);
    if !(radius <= 1.0 + 1e-12) {
        return Err(Error::UnstableDiscretization { radius, context: "zero-airflow linear part".into() });
    }

    let b_v = &gamma * &model.b_v;
    let b_ig = &gamma * &model.b_ig;
    let b_xu: Vec<DMatrix<f64>> = model.b_xu.iter().map(|b| &gamma * b).collect();
    let b_vu: Vec<DMatrix<f64>> = model.b_vu.iter().map(|b| &gamma * b).collect();
    let taps =
        model.network.boxes.iter().enumerate().map(|(j, b)| (j, b.room_state, -model.b_xu[j][(b.room_state, b.room_state)])).collect();

    let dm = DiscreteModel {
        dt,
        a,
        b_v,
        b_ig,
        b_xu,
        b_vu,
        c: model.output().clone(),
        c_ig: DVector::from_column_slice(&model.params.c_ig),
        input_integral: gamma,
        continuous: model.clone(),
        taps,
    };

    if !dm.taps.is_empty() {
        let u_max = DVector::from_iterator(dm.inputs(), model.network.boxes.iter().map(|b| b.max_flow));
        let radius = spectral_radius(&dm.transition(&u_max));
        if !(radius <= 1.0 + 1e-12) {
            return Err(Error::UnstableDiscretization { radius, context: "bilinear part at maximum airflow".into() });
        }
    }
    Ok(dm)
}

impl DiscreteModel {
    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    pub fn zones(&self) -> usize {
        self.c.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b_xu.len()
    }

    pub fn network(&self) -> &crate::model::RcNetwork {
        &self.continuous.network
    }

    /// State transition for known airflows: `A + Σ_j u_j B_xu_j`.
    pub fn transition(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let mut f = self.a.clone();
        for &(j, r, g) in &self.taps {
            if u[j] != 0.0 {
                let scale = -u[j] * g;
                let col = self.input_integral.column(r);
                f.column_mut(r).axpy(scale, &col, 1.0);
            }
        }
        f
    }

    /// Everything that does not multiply the state:
    /// `B_v v + B_IG (c_IG + f_IG) + Σ_j u_j B_vu_j v`.
    pub fn forcing(&self, u: &DVector<f64>, v: &DVector<f64>, f_ig: &DVector<f64>) -> DVector<f64> {
        let mut out = &self.b_v * v + &self.b_ig * (&self.c_ig + f_ig);
        let ts = v[disturbance::SUPPLY];
        let mut w = DVector::zeros(self.states());
        let mut any = false;
        for &(j, r, g) in &self.taps {
            if u[j] != 0.0 {
                w[r] += u[j] * g * ts;
                any = true;
            }
        }
        if any {
            out.gemv(1.0, &self.input_integral, &w, 1.0);
        }
        out
    }

    /// One step of the discrete model without dimension checks.
    pub(crate) fn advance(&self, x: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>, f_ig: &DVector<f64>) -> DVector<f64> {
        let mut next = &self.a * x;
        next.gemv(1.0, &self.b_v, v, 1.0);
        next.gemv(1.0, &self.b_ig, &(&self.c_ig + f_ig), 1.0);
        let ts = v[disturbance::SUPPLY];
        let mut w = DVector::zeros(self.states());
        let mut any = false;
        for &(j, r, g) in &self.taps {
            if u[j] != 0.0 {
                w[r] += u[j] * g * (ts - x[r]);
                any = true;
            }
        }
        if any {
            next.gemv(1.0, &self.input_integral, &w, 1.0);
        }
        next
    }
}
