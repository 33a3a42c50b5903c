//! Bound-constrained least-squares minimization.
//!
//! The default method is a projected Levenberg–Marquardt iteration on the
//! residual vector with a forward-difference Jacobian. Coordinates sitting at
//! a bound whose gradient points outward are frozen for the step; every trial
//! point is projected onto the box. A bound-projected Nelder–Mead on the sum
//! of squares is available as a derivative-free alternative. Both can be
//! restarted from seeded perturbations of the initial guess.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::params::ParameterBounds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    LevenbergMarquardt,
    NelderMead,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerSettings {
    pub method: Method,
    pub max_iterations: usize,
    /// Objective evaluations per start.
    pub max_evaluations: usize,
    pub starts: usize,
    pub seed: u64,
    /// Log-normal spread of the extra starting points.
    pub start_spread: f64,
    /// Relative cost decrease below which an iteration counts as converged.
    pub ftol: f64,
    /// Relative step size below which an iteration counts as converged.
    pub xtol: f64,
    /// Relative forward-difference step.
    pub fd_step: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            method: Method::LevenbergMarquardt,
            max_iterations: 50,
            max_evaluations: 5000,
            starts: 1,
            seed: 0,
            start_spread: 0.3,
            ftol: 1e-10,
            xtol: 1e-9,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub start: usize,
    pub iteration: usize,
    pub evaluations: usize,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerOutcome {
    pub x: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub best_start: usize,
    pub start_costs: Vec<f64>,
    pub trace: Vec<TraceEntry>,
}

struct Problem<'a, F> {
    residuals: &'a F,
    bounds: &'a ParameterBounds,
    settings: &'a OptimizerSettings,
    execution: Execution,
    evaluations: AtomicUsize,
}

impl<F> Problem<'_, F>
where
    F: Fn(&[f64]) -> Option<DVector<f64>> + Sync,
{
    fn eval(&self, x: &[f64]) -> Option<DVector<f64>> {
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        (self.residuals)(x).filter(|r| r.iter().all(|v| v.is_finite()))
    }

    fn cost(&self, x: &[f64]) -> f64 {
        self.eval(x).map(|r| r.norm_squared()).unwrap_or(f64::INFINITY)
    }

    fn evaluations(&self) -> usize {
        self.evaluations.load(Ordering::Relaxed)
    }

    fn range(&self, i: usize) -> f64 {
        self.bounds.upper[i] - self.bounds.lower[i]
    }

    /// Forward-difference Jacobian; columns whose probe fails are zero.
    fn jacobian(&self, x: &[f64], r: &DVector<f64>) -> DMatrix<f64> {
        let cols = self.execution.map_range(0..x.len(), |i| {
            let mut h = self.settings.fd_step * x[i].abs().max(1e-3 * self.range(i));
            if x[i] + h > self.bounds.upper[i] {
                h = -h;
            }
            let mut probe = x.to_vec();
            probe[i] += h;
            self.eval(&probe).map(|rp| (rp - r) / h)
        });
        let mut j = DMatrix::zeros(r.len(), x.len());
        for (i, col) in cols.into_iter().enumerate() {
            if let Some(col) = col {
                j.set_column(i, &col);
            }
        }
        j
    }

    fn levenberg_marquardt(&self, start: usize, x0: &[f64], trace: &mut Vec<TraceEntry>) -> (Vec<f64>, f64, usize, bool) {
        let p = x0.len();
        let mut x = x0.to_vec();
        self.bounds.clamp(&mut x);
        let Some(mut r) = self.eval(&x) else {
            return (x, f64::INFINITY, 0, false);
        };
        let mut cost = r.norm_squared();
        let mut lambda = 1e-3;
        let base = self.evaluations();
        trace.push(TraceEntry { start, iteration: 0, evaluations: 1, cost });
        for it in 1..=self.settings.max_iterations {
            if cost == 0.0 || self.evaluations() - base >= self.settings.max_evaluations {
                return (x, cost, it - 1, cost == 0.0);
            }
            let j = self.jacobian(&x, &r);
            let g = j.tr_mul(&r);
            let h = j.tr_mul(&j);
            let tol = |i: usize| 1e-12 * self.range(i);
            let free: Vec<usize> = (0..p)
                .filter(|&i| {
                    let at_lower = x[i] - self.bounds.lower[i] <= tol(i) && g[i] > 0.0;
                    let at_upper = self.bounds.upper[i] - x[i] <= tol(i) && g[i] < 0.0;
                    !(at_lower || at_upper)
                })
                .collect();
            if free.is_empty() {
                return (x, cost, it, true);
            }
            let m = free.len();
            let hf = DMatrix::from_fn(m, m, |a, b| h[(free[a], free[b])]);
            let gf = DVector::from_fn(m, |a, _| g[free[a]]);
            let dmax = hf.diagonal().max().max(f64::MIN_POSITIVE);
            let mut accepted = false;
            loop {
                let mut a = hf.clone();
                for d in 0..m {
                    a[(d, d)] += lambda * hf[(d, d)].max(1e-12 * dmax);
                }
                let step = match a.clone().cholesky() {
                    Some(ch) => ch.solve(&(-&gf)),
                    None => match a.lu().solve(&(-&gf)) {
                        Some(s) => s,
                        None => {
                            lambda *= 10.0;
                            if lambda > 1e16 {
                                break;
                            }
                            continue;
                        }
                    },
                };
                let mut trial = x.clone();
                for (a, &i) in free.iter().enumerate() {
                    trial[i] += step[a];
                }
                self.bounds.clamp(&mut trial);
                let moved: f64 = trial.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                let size: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if let Some(rt) = self.eval(&trial) {
                    let ct = rt.norm_squared();
                    if ct < cost {
                        let decrease = cost - ct;
                        x = trial;
                        r = rt;
                        cost = ct;
                        lambda = (lambda / 5.0).max(1e-12);
                        accepted = true;
                        trace.push(TraceEntry { start, iteration: it, evaluations: self.evaluations() - base, cost });
                        let small_f = decrease <= self.settings.ftol * (cost + decrease);
                        let small_x = moved <= self.settings.xtol * (size + self.settings.xtol);
                        if small_f || small_x {
                            return (x, cost, it, true);
                        }
                        break;
                    }
                }
                lambda *= 5.0;
                if lambda > 1e16 || moved <= f64::EPSILON * size {
                    break;
                }
            }
            if !accepted {
                // No descent direction left within the box.
                return (x, cost, it, true);
            }
        }
        (x, cost, self.settings.max_iterations, false)
    }

    fn nelder_mead(&self, start: usize, x0: &[f64], trace: &mut Vec<TraceEntry>) -> (Vec<f64>, f64, usize, bool) {
        let p = x0.len();
        let lo = &self.bounds.lower;
        let to_x = |s: &DVector<f64>| -> Vec<f64> { (0..p).map(|i| lo[i] + s[i].clamp(0.0, 1.0) * self.range(i)).collect() };
        let project = |s: DVector<f64>| s.map(|v| v.clamp(0.0, 1.0));
        let s0 = DVector::from_fn(p, |i, _| ((x0[i] - lo[i]) / self.range(i)).clamp(0.0, 1.0));
        let mut simplex: Vec<DVector<f64>> = vec![s0.clone()];
        for i in 0..p {
            let mut s = s0.clone();
            s[i] += if s[i] + 0.05 <= 1.0 { 0.05 } else { -0.05 };
            simplex.push(s);
        }
        let mut costs: Vec<f64> = self.execution.map(&simplex, |s| self.cost(&to_x(s)));
        let pf = p as f64;
        let (alpha, beta, gamma, delta) = (1.0, 1.0 + 2.0 / pf, 0.75 - 0.5 / pf, 1.0 - 1.0 / pf);
        let base = self.evaluations();
        for it in 1..=self.settings.max_iterations * p {
            let mut order: Vec<usize> = (0..=p).collect();
            order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            costs = order.iter().map(|&i| costs[i]).collect();
            if it % p == 0 {
                trace.push(TraceEntry { start, iteration: it, evaluations: self.evaluations() - base, cost: costs[0] });
            }
            let spread = costs[p] - costs[0];
            let diameter = simplex[1..].iter().map(|s| (s - &simplex[0]).amax()).fold(0.0, f64::max);
            if (spread.is_finite() && spread <= self.settings.ftol * costs[0].abs().max(1e-300)) && diameter <= self.settings.xtol.sqrt()
                || costs[0] == 0.0
            {
                return (to_x(&simplex[0]), costs[0], it, true);
            }
            if self.evaluations() - base >= self.settings.max_evaluations {
                return (to_x(&simplex[0]), costs[0], it, false);
            }
            let centroid = simplex[..p].iter().fold(DVector::zeros(p), |acc, s| acc + s) / pf;
            let worst = simplex[p].clone();
            let reflect = project(&centroid + (&centroid - &worst) * alpha);
            let fr = self.cost(&to_x(&reflect));
            if fr < costs[0] {
                let expand = project(&centroid + (&reflect - &centroid) * beta);
                let fe = self.cost(&to_x(&expand));
                if fe < fr {
                    simplex[p] = expand;
                    costs[p] = fe;
                } else {
                    simplex[p] = reflect;
                    costs[p] = fr;
                }
                continue;
            }
            if fr < costs[p - 1] {
                simplex[p] = reflect;
                costs[p] = fr;
                continue;
            }
            let (contract, fc) = if fr < costs[p] {
                let c = project(&centroid + (&reflect - &centroid) * gamma);
                let f = self.cost(&to_x(&c));
                (c, f)
            } else {
                let c = project(&centroid - (&centroid - &worst) * gamma);
                let f = self.cost(&to_x(&c));
                (c, f)
            };
            if fc < costs[p].min(fr) {
                simplex[p] = contract;
                costs[p] = fc;
                continue;
            }
            let best = simplex[0].clone();
            for s in simplex.iter_mut().skip(1) {
                *s = project(&best + (&*s - &best) * delta);
            }
            let shrunk: Vec<f64> = self.execution.map(&simplex[1..], |s| self.cost(&to_x(s)));
            costs[1..].copy_from_slice(&shrunk);
        }
        let best = (0..=p).min_by(|&a, &b| costs[a].total_cmp(&costs[b])).unwrap_or(0);
        (to_x(&simplex[best]), costs[best], self.settings.max_iterations * p, false)
    }
}

/// Starting points: `x0` followed by `starts − 1` log-normal perturbations
/// projected onto the bounds.
pub fn starting_points(x0: &[f64], bounds: &ParameterBounds, settings: &OptimizerSettings) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut out = vec![x0.to_vec()];
    for _ in 1..settings.starts.max(1) {
        let mut x: Vec<f64> = x0
            .iter()
            .map(|v| {
                let z: f64 = StandardNormal.sample(&mut rng);
                v * (settings.start_spread * z).exp()
            })
            .collect();
        bounds.clamp(&mut x);
        out.push(x);
    }
    out
}

/// Minimizes `‖residuals(x)‖²` over the box. `residuals` returns `None` for
/// infeasible points (their cost is treated as infinite).
pub fn minimize<F>(
    residuals: &F,
    x0: &[f64],
    bounds: &ParameterBounds,
    settings: &OptimizerSettings,
    execution: Execution,
) -> Result<OptimizerOutcome>
where
    F: Fn(&[f64]) -> Option<DVector<f64>> + Sync,
{
    bounds.check_box()?;
    if x0.len() != bounds.len() {
        return Err(Error::Dimension(format!("{} starting values for {} bounds", x0.len(), bounds.len())));
    }
    if !bounds.contains(x0) {
        return Err(Error::Parameters("initial guess lies outside the bounds".into()));
    }
    let starts = starting_points(x0, bounds, settings);
    let runs = execution.map(&starts, |x| {
        let problem = Problem { residuals, bounds, settings, execution, evaluations: AtomicUsize::new(0) };
        let mut trace = Vec::new();
        let start = starts.iter().position(|s| std::ptr::eq(s, x)).unwrap_or(0);
        let (xb, cost, iterations, converged) = match settings.method {
            Method::LevenbergMarquardt => problem.levenberg_marquardt(start, x, &mut trace),
            Method::NelderMead => problem.nelder_mead(start, x, &mut trace),
        };
        (xb, cost, iterations, converged, problem.evaluations(), trace)
    });
    let start_costs: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let best = (0..runs.len()).min_by(|&a, &b| start_costs[a].total_cmp(&start_costs[b])).expect("at least one start");
    if !start_costs[best].is_finite() {
        return Err(Error::Parameters("objective is not finite at any starting point".into()));
    }
    let evaluations = runs.iter().map(|r| r.4).sum();
    let trace = runs.iter().flat_map(|r| r.5.iter().cloned()).collect();
    let (x, cost, iterations, converged, _, _) = runs.into_iter().nth(best).expect("best run");
    Ok(OptimizerOutcome { x, cost, iterations, evaluations, converged, best_start: best, start_costs, trace })
}
