//! Gaussian-process regression with an isotropic RBF kernel.

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::OptimizerError;

pub const LENGTH_SCALE_BOUNDS: (f64, f64) = (1e-2, 1e1);
pub const SIGNAL_VARIANCE_BOUNDS: (f64, f64) = (1e-2, 1e2);
pub const NOISE_VARIANCE_BOUNDS: (f64, f64) = (1e-10, 1e-1);
pub const INITIAL_JITTER: f64 = 1e-8;
const MAX_JITTER: f64 = 1e-1;
pub const MIN_TRAINING_SAMPLES: usize = 10;

/// Kernel hyperparameters in standardized target units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub length_scale: f64,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpConfig {
    pub restarts: usize,
    /// When false the noise variance stays at `noise_variance`.
    pub fit_noise: bool,
    pub noise_variance: f64,
    pub seed: u64,
    pub max_iters: u64,
    /// Hyperparameters are fitted on an evenly strided subset of at most this
    /// many samples; the model is then conditioned on all of them.
    pub max_fit_samples: usize,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            fit_noise: true,
            noise_variance: 1e-6,
            seed: 0,
            max_iters: 150,
            max_fit_samples: 96,
        }
    }
}

pub fn rbf(a: &[f64], b: &[f64], h: &Hyperparameters) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    h.signal_variance * (-d2 / (2.0 * h.length_scale * h.length_scale)).exp()
}

/// Factorizes K + σ_n²I, adding jitter (×10 per failure) until positive definite.
fn factorize(x: &[Vec<f64>], h: &Hyperparameters) -> Option<(Cholesky<f64, Dyn>, f64)> {
    let n = x.len();
    let k = DMatrix::from_fn(n, n, |i, j| rbf(&x[i], &x[j], h));
    let mut jitter = INITIAL_JITTER;
    while jitter <= MAX_JITTER {
        let m = &k + DMatrix::identity(n, n) * (h.noise_variance + jitter);
        if let Some(c) = Cholesky::new(m) {
            return Some((c, jitter));
        }
        jitter *= 10.0;
    }
    None
}

/// Log marginal likelihood of standardized targets `y`.
pub fn log_marginal_likelihood(
    x: &[Vec<f64>],
    y: &DVector<f64>,
    h: &Hyperparameters,
) -> Option<f64> {
    let (chol, _) = factorize(x, h)?;
    let alpha = chol.solve(y);
    let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
    let n = y.len() as f64;
    Some(-0.5 * y.dot(&alpha) - log_det - 0.5 * n * (2.0 * std::f64::consts::PI).ln())
}

#[derive(Clone, Copy)]
struct NegLml<'a> {
    x: &'a [Vec<f64>],
    y: &'a DVector<f64>,
    fixed_noise: Option<f64>,
}

impl NegLml<'_> {
    fn decode(&self, p: &[f64]) -> Hyperparameters {
        let c = |v: f64, (lo, hi): (f64, f64)| v.exp().clamp(lo, hi);
        Hyperparameters {
            length_scale: c(p[0], LENGTH_SCALE_BOUNDS),
            signal_variance: c(p[1], SIGNAL_VARIANCE_BOUNDS),
            noise_variance: match self.fixed_noise {
                Some(n) => n,
                None => c(p[2], NOISE_VARIANCE_BOUNDS),
            },
        }
    }
}

impl CostFunction for NegLml<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> Result<f64, argmin::core::Error> {
        let h = self.decode(p);
        // out-of-box steps are clamped, plus a penalty so the simplex returns
        let outside: f64 = p
            .iter()
            .zip([
                LENGTH_SCALE_BOUNDS,
                SIGNAL_VARIANCE_BOUNDS,
                NOISE_VARIANCE_BOUNDS,
            ])
            .map(|(v, (lo, hi))| (lo.ln() - v).max(0.0) + (v - hi.ln()).max(0.0))
            .sum();
        Ok(match log_marginal_likelihood(self.x, self.y, &h) {
            Some(l) => -l + 1e3 * outside,
            None => 1e12,
        })
    }
}

/// Affine map of inputs to the unit cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputScaling {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl InputScaling {
    pub fn from_data(x: &[Vec<f64>]) -> Self {
        let d = x.first().map_or(0, Vec::len);
        let mut lower = vec![f64::INFINITY; d];
        let mut upper = vec![f64::NEG_INFINITY; d];
        for row in x {
            for (j, &v) in row.iter().enumerate() {
                lower[j] = lower[j].min(v);
                upper[j] = upper[j].max(v);
            }
        }
        Self { lower, upper }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, &v)| {
                let span = self.upper[j] - self.lower[j];
                if span > 0.0 {
                    (v - self.lower[j]) / span
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Fitted GP; inputs normalized to the unit cube, targets standardized.
#[derive(Debug, Clone)]
pub struct GpModel {
    pub scaling: InputScaling,
    pub hyper: Hyperparameters,
    pub y_mean: f64,
    pub y_scale: f64,
    /// Targets had zero variance; the model predicts their constant value.
    pub flat: bool,
    pub jitter: f64,
    x: Vec<Vec<f64>>,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

impl GpModel {
    /// Fits hyperparameters by multi-start Nelder–Mead on the log marginal likelihood.
    pub fn fit(
        x: &[Vec<f64>],
        y: &[f64],
        scaling: Option<InputScaling>,
        config: &GpConfig,
    ) -> Result<Self, OptimizerError> {
        let (xs, ys, scaling, mean, scale, flat) = prepare(x, y, scaling)?;
        let stride = xs.len().div_ceil(config.max_fit_samples.max(1));
        let fit_x: Vec<Vec<f64>> = xs.iter().step_by(stride).cloned().collect();
        let yv = DVector::from_iterator(fit_x.len(), ys.iter().step_by(stride).copied());
        let fixed_noise = (!config.fit_noise).then_some(config.noise_variance);
        let problem = NegLml {
            x: &fit_x,
            y: &yv,
            fixed_noise,
        };
        let dims = if config.fit_noise { 3 } else { 2 };
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut best: Option<(f64, Hyperparameters)> = None;
        for start in 0..config.restarts.max(1) {
            let p0: Vec<f64> = if start == 0 {
                vec![0.5f64.ln(), 0.0, 1e-4f64.ln()][..dims].to_vec()
            } else {
                let u =
                    |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| rng.gen_range(lo.ln()..hi.ln());
                let mut p = vec![u(&mut rng, (0.05, 5.0)), u(&mut rng, (0.1, 10.0))];
                if dims == 3 {
                    p.push(u(&mut rng, (1e-8, 1e-2)));
                }
                p
            };
            let mut simplex = vec![p0.clone()];
            for d in 0..dims {
                let mut v = p0.clone();
                v[d] += 0.7;
                simplex.push(v);
            }
            let solver = NelderMead::new(simplex)
                .with_sd_tolerance(1e-6)
                .map_err(|e| OptimizerError::Fit(e.to_string()))?;
            let res = Executor::new(problem, solver)
                .configure(|s| s.max_iters(config.max_iters))
                .run()
                .map_err(|e| OptimizerError::Fit(e.to_string()))?;
            let state = res.state();
            if let Some(p) = state.best_param.as_ref() {
                let cost = state.best_cost;
                if cost.is_finite() && best.as_ref().is_none_or(|(c, _)| cost < *c) {
                    best = Some((cost, problem.decode(p)));
                }
            }
        }
        let (_, hyper) = best.ok_or_else(|| OptimizerError::Fit("no start converged".into()))?;
        Self::condition(xs, ys, scaling, mean, scale, flat, hyper)
    }

    /// Conditions on data with given hyperparameters, no fitting.
    pub fn with_hyperparameters(
        x: &[Vec<f64>],
        y: &[f64],
        scaling: Option<InputScaling>,
        hyper: Hyperparameters,
    ) -> Result<Self, OptimizerError> {
        let (xs, ys, scaling, mean, scale, flat) = prepare(x, y, scaling)?;
        Self::condition(xs, ys, scaling, mean, scale, flat, hyper)
    }

    fn condition(
        xs: Vec<Vec<f64>>,
        ys: Vec<f64>,
        scaling: InputScaling,
        y_mean: f64,
        y_scale: f64,
        flat: bool,
        hyper: Hyperparameters,
    ) -> Result<Self, OptimizerError> {
        let (chol, jitter) = factorize(&xs, &hyper).ok_or(OptimizerError::NotPositiveDefinite)?;
        let y = DVector::from_vec(ys);
        let mut alpha = chol.solve(&y);
        // Iterative refinement against the unjittered system so the jitter
        // regularizes the solve without biasing the interpolant.
        let n = xs.len();
        let k = DMatrix::from_fn(n, n, |i, j| rbf(&xs[i], &xs[j], &hyper))
            + DMatrix::identity(n, n) * hyper.noise_variance;
        let mut residual = &y - &k * &alpha;
        for _ in 0..100 {
            let next = &alpha + chol.solve(&residual);
            let r = &y - &k * &next;
            if r.norm() >= 0.99 * residual.norm() {
                break;
            }
            alpha = next;
            residual = r;
        }
        Ok(Self {
            scaling,
            hyper,
            y_mean,
            y_scale,
            flat,
            jitter,
            x: xs,
            chol,
            alpha,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Posterior mean and standard deviation of the latent function at `x`
    /// (raw input units).
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        self.predict_normalized(&self.scaling.apply(x))
    }

    pub fn predict_normalized(&self, z: &[f64]) -> (f64, f64) {
        let k = DVector::from_iterator(
            self.x.len(),
            self.x.iter().map(|xi| rbf(xi, z, &self.hyper)),
        );
        let mean = k.dot(&self.alpha);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&k)
            .unwrap_or_else(|| DVector::zeros(k.len()));
        let var = (self.hyper.signal_variance - v.dot(&v)).max(0.0);
        (self.y_mean + self.y_scale * mean, self.y_scale * var.sqrt())
    }
}

type Prepared = (Vec<Vec<f64>>, Vec<f64>, InputScaling, f64, f64, bool);

fn prepare(
    x: &[Vec<f64>],
    y: &[f64],
    scaling: Option<InputScaling>,
) -> Result<Prepared, OptimizerError> {
    if x.is_empty() || x.len() != y.len() {
        return Err(OptimizerError::Shape(format!(
            "{} inputs, {} targets",
            x.len(),
            y.len()
        )));
    }
    let d = x[0].len();
    if x.iter().any(|r| r.len() != d) {
        return Err(OptimizerError::Shape("ragged inputs".into()));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(OptimizerError::Shape("non-finite sample".into()));
    }
    let scaling = scaling.unwrap_or_else(|| InputScaling::from_data(x));
    let xs: Vec<Vec<f64>> = x.iter().map(|r| scaling.apply(r)).collect();
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let flat = !(sd > 1e-12 * mean.abs().max(1.0));
    let scale = if flat { 1.0 } else { sd };
    let ys = y.iter().map(|v| (v - mean) / scale).collect();
    Ok((xs, ys, scaling, mean, scale, flat))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n_train: usize,
    pub n_test: usize,
    pub r2: f64,
    pub rmse: f64,
    pub flat: bool,
    /// (actual, predicted, σ) on the held-out samples.
    pub predictions: Vec<(f64, f64, f64)>,
}

pub fn r_squared(actual: &[f64], predicted: &[f64]) -> f64 {
    let n = actual.len() as f64;
    let mean = actual.iter().sum::<f64>() / n;
    let ss_tot: f64 = actual.iter().map(|a| (a - mean).powi(2)).sum();
    let ss_res: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (a - p).powi(2))
        .sum();
    if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Seeded 80/20 split, fit on the larger part, score on the rest.
pub fn train(
    x: &[Vec<f64>],
    y: &[f64],
    split_seed: u64,
    config: &GpConfig,
) -> Result<(GpModel, ValidationReport), OptimizerError> {
    if x.len() < MIN_TRAINING_SAMPLES {
        return Err(OptimizerError::TooFewSamples(x.len()));
    }
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(split_seed));
    let n_test = (x.len() as f64 * 0.2).round() as usize;
    let (test, tr) = idx.split_at(n_test);
    let xt: Vec<Vec<f64>> = tr.iter().map(|&i| x[i].clone()).collect();
    let yt: Vec<f64> = tr.iter().map(|&i| y[i]).collect();
    let scaling = InputScaling::from_data(x);
    let model = GpModel::fit(&xt, &yt, Some(scaling), config)?;
    let predictions: Vec<(f64, f64, f64)> = test
        .iter()
        .map(|&i| {
            let (m, s) = model.predict(&x[i]);
            (y[i], m, s)
        })
        .collect();
    let actual: Vec<f64> = predictions.iter().map(|p| p.0).collect();
    let pred: Vec<f64> = predictions.iter().map(|p| p.1).collect();
    let rmse = if predictions.is_empty() {
        0.0
    } else {
        (actual
            .iter()
            .zip(&pred)
            .map(|(a, p)| (a - p).powi(2))
            .sum::<f64>()
            / actual.len() as f64)
            .sqrt()
    };
    let report = ValidationReport {
        n_train: tr.len(),
        n_test,
        r2: if predictions.is_empty() {
            1.0
        } else {
            r_squared(&actual, &pred)
        },
        rmse,
        flat: model.flat,
        predictions,
    };
    Ok((model, report))
}
