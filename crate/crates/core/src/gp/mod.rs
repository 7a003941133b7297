//! Noise-free Gaussian-process regression with a Matérn-5/2 ARD kernel.
//!
//! Inputs are expected in the normalized unit box. Targets are z-scored
//! internally and the prior mean is zero in standardized space, so every
//! [`Posterior`] handed out is already back on the original target scale.
//!
//! The Cholesky factor of `K + jitter·I` is cached. New observations extend
//! it by one bordered row (same factor as a fresh decomposition, at O(n²)
//! cost); hyperparameter refits rebuild it from scratch.

mod fit;
mod kernel;

pub use fit::{log_marginal_likelihood, FitOptions};
pub use kernel::{kernel_eval, matern52, KernelParams};

use faer::linalg::cholesky::llt::factor::{cholesky_in_place, cholesky_in_place_scratch};
use faer::linalg::triangular_solve::{
    solve_lower_triangular_in_place, solve_upper_triangular_in_place,
};
use faer::{dyn_stack::MemBuffer, dyn_stack::MemStack, Mat, Par};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};
use kernel::scaled_kernel;

pub const JITTER_START: f64 = 1e-8;
pub const JITTER_MAX: f64 = 1e-4;

const PREDICT_BLOCK: usize = 256;

/// Posterior marginal at one point, on the original target scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub mean: f64,
    pub std: f64,
}

impl Posterior {
    pub fn new(mean: f64, std: f64) -> Self {
        Self {
            mean,
            std: std.max(0.0),
        }
    }

    /// A point mass; what a white-box quantity looks like to the acquisition.
    pub fn exact(value: f64) -> Self {
        Self {
            mean: value,
            std: 0.0,
        }
    }
}

/// Serializable form of a trained model: data plus hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpSnapshot {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub params: KernelParams,
}

#[derive(Clone)]
pub struct GpModel {
    dim: usize,
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    params: KernelParams,
    /// Row-major `inputs[i][d] / ℓ_d`.
    scaled: Vec<f64>,
    target_mean: f64,
    target_scale: f64,
    jitter: f64,
    chol: Mat<f64>,
    alpha: Vec<f64>,
}

impl std::fmt::Debug for GpModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GpModel")
            .field("n", &self.len())
            .field("dim", &self.dim)
            .field("params", &self.params)
            .field("jitter", &self.jitter)
            .finish()
    }
}

pub(crate) fn standardization(targets: &[f64]) -> (f64, f64) {
    let n = targets.len() as f64;
    let mean = targets.iter().sum::<f64>() / n;
    let var = targets.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n;
    let scale = var.sqrt();
    if scale.is_finite() && scale > 1e-12 * mean.abs().max(1.0) {
        (mean, scale)
    } else {
        (mean, 1.0)
    }
}

pub(crate) fn scale_inputs(inputs: &[Vec<f64>], lengthscales: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(inputs.len() * lengthscales.len());
    for x in inputs {
        out.extend(x.iter().zip(lengthscales).map(|(v, l)| v / l));
    }
    out
}

/// Lower-triangular Cholesky factor of the Gram matrix, escalating the
/// diagonal jitter ×10 from `start_jitter` up to [`JITTER_MAX`].
pub(crate) fn factorize(
    scaled: &[f64],
    dim: usize,
    signal_variance: f64,
    start_jitter: f64,
) -> Option<(Mat<f64>, f64)> {
    let n = scaled.len() / dim;
    let mut jitter = start_jitter.max(JITTER_START);
    let mut scratch = MemBuffer::new(cholesky_in_place_scratch::<f64>(
        n,
        Par::Seq,
        Default::default(),
    ));
    loop {
        let mut gram = Mat::<f64>::zeros(n, n);
        for j in 0..n {
            let xj = &scaled[j * dim..(j + 1) * dim];
            let col = gram.col_as_slice_mut(j);
            col[j] = signal_variance + jitter;
            for (i, c) in col.iter_mut().enumerate().skip(j + 1) {
                *c = scaled_kernel(&scaled[i * dim..(i + 1) * dim], xj, signal_variance);
            }
        }
        let ok = cholesky_in_place(
            gram.as_mut(),
            Default::default(),
            Par::Seq,
            MemStack::new(&mut scratch),
            Default::default(),
        )
        .is_ok();
        if ok {
            return Some((gram, jitter));
        }
        if jitter >= JITTER_MAX * (1.0 - 1e-9) {
            return None;
        }
        jitter = (jitter * 10.0).min(JITTER_MAX);
    }
}

/// `K⁻¹ y` from the lower factor of `K`.
pub(crate) fn cholesky_solve(chol: &Mat<f64>, y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut rhs = Mat::<f64>::from_fn(n, 1, |i, _| y[i]);
    let l = chol.as_ref().submatrix(0, 0, n, n);
    solve_lower_triangular_in_place(l, rhs.as_mut(), Par::Seq);
    solve_upper_triangular_in_place(l.transpose(), rhs.as_mut(), Par::Seq);
    rhs.col_as_slice(0).to_vec()
}

impl GpModel {
    /// Conditions a GP with fixed hyperparameters on the given data.
    pub fn with_params(
        inputs: Vec<Vec<f64>>,
        targets: Vec<f64>,
        params: KernelParams,
    ) -> Result<Self> {
        params.validate()?;
        let dim = params.dim();
        if inputs.is_empty() {
            return Err(Error::Fit("no training data".into()));
        }
        if inputs.len() != targets.len() {
            return Err(Error::Fit(format!(
                "{} inputs but {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        if let Some(bad) = inputs.iter().find(|x| x.len() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                got: bad.len(),
            });
        }
        if !targets.iter().all(|t| t.is_finite()) {
            return Err(Error::Fit("non-finite target".into()));
        }
        let scaled = scale_inputs(&inputs, &params.lengthscales);
        let (chol, jitter) = factorize(&scaled, dim, params.signal_variance, JITTER_START)
            .ok_or_else(|| Error::Fit(format!("gram matrix singular at jitter {JITTER_MAX}")))?;
        let mut model = Self {
            dim,
            inputs,
            targets,
            params,
            scaled,
            target_mean: 0.0,
            target_scale: 1.0,
            jitter,
            chol,
            alpha: Vec::new(),
        };
        model.restandardize();
        Ok(model)
    }

    pub fn from_snapshot(snapshot: GpSnapshot) -> Result<Self> {
        Self::with_params(snapshot.inputs, snapshot.targets, snapshot.params)
    }

    pub fn snapshot(&self) -> GpSnapshot {
        GpSnapshot {
            inputs: self.inputs.clone(),
            targets: self.targets.clone(),
            params: self.params.clone(),
        }
    }

    fn restandardize(&mut self) {
        let (mean, scale) = standardization(&self.targets);
        self.target_mean = mean;
        self.target_scale = scale;
        let y: Vec<f64> = self.targets.iter().map(|t| (t - mean) / scale).collect();
        self.alpha = cholesky_solve(&self.chol, &y);
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Target mean and scale used for standardization.
    pub fn standardization(&self) -> (f64, f64) {
        (self.target_mean, self.target_scale)
    }

    fn scaled_row(&self, i: usize) -> &[f64] {
        &self.scaled[i * self.dim..(i + 1) * self.dim]
    }

    fn scale_point(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim, "query dimension mismatch");
        x.iter()
            .zip(&self.params.lengthscales)
            .map(|(v, l)| v / l)
            .collect()
    }

    /// Extends the model with one observation, keeping hyperparameters.
    pub fn add_observation(&mut self, x: Vec<f64>, y: f64) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: x.len(),
            });
        }
        if !y.is_finite() {
            return Err(Error::Fit("non-finite target".into()));
        }
        let n = self.len();
        let sv = self.params.signal_variance;
        let xs = self.scale_point(&x);
        let mut v = Mat::<f64>::from_fn(n, 1, |i, _| scaled_kernel(self.scaled_row(i), &xs, sv));
        solve_lower_triangular_in_place(self.chol.as_ref(), v.as_mut(), Par::Seq);
        let v = v.col_as_slice(0);
        let d2 = sv + self.jitter - v.iter().map(|t| t * t).sum::<f64>();

        self.inputs.push(x);
        self.targets.push(y);
        self.scaled.extend_from_slice(&xs);

        if d2 > 0.5 * self.jitter {
            let cap = (n + 1).next_power_of_two();
            self.chol.reserve(cap, cap);
            self.chol.resize_with(n + 1, n + 1, |_, _| 0.0);
            for (j, &vj) in v.iter().enumerate() {
                self.chol[(n, j)] = vj;
            }
            self.chol[(n, n)] = d2.sqrt();
        } else {
            let (chol, jitter) = factorize(&self.scaled, self.dim, sv, self.jitter * 10.0)
                .ok_or_else(|| {
                    Error::Fit(format!("gram matrix singular at jitter {JITTER_MAX}"))
                })?;
            self.chol = chol;
            self.jitter = jitter;
        }
        self.restandardize();
        Ok(())
    }

    pub fn predict(&self, x: &[f64]) -> Posterior {
        self.predict_batch(std::slice::from_ref(&x.to_vec()))[0]
    }

    /// Exact posterior mean and standard deviation at each query point.
    pub fn predict_batch(&self, xs: &[Vec<f64>]) -> Vec<Posterior> {
        let n = self.len();
        let sv = self.params.signal_variance;
        let mut out = Vec::with_capacity(xs.len());
        for chunk in xs.chunks(PREDICT_BLOCK) {
            let b = chunk.len();
            let mut ks = Mat::<f64>::zeros(n, b);
            let mut means = Vec::with_capacity(b);
            for (j, x) in chunk.iter().enumerate() {
                let xs = self.scale_point(x);
                let col = ks.col_as_slice_mut(j);
                let mut m = 0.0;
                for (i, c) in col.iter_mut().enumerate() {
                    *c = scaled_kernel(self.scaled_row(i), &xs, sv);
                    m += *c * self.alpha[i];
                }
                means.push(m);
            }
            solve_lower_triangular_in_place(self.chol.as_ref(), ks.as_mut(), Par::Seq);
            for (j, m) in means.into_iter().enumerate() {
                let explained: f64 = ks.col_as_slice(j).iter().map(|v| v * v).sum();
                let var = (sv - explained).max(0.0);
                out.push(Posterior::new(
                    self.target_mean + self.target_scale * m,
                    self.target_scale * var.sqrt(),
                ));
            }
        }
        out
    }

    pub fn predict_mean(&self, x: &[f64]) -> f64 {
        let xs = self.scale_point(x);
        let sv = self.params.signal_variance;
        let m: f64 = (0..self.len())
            .map(|i| scaled_kernel(self.scaled_row(i), &xs, sv) * self.alpha[i])
            .sum();
        self.target_mean + self.target_scale * m
    }

    pub fn predict_mean_batch(&self, xs: &[Vec<f64>]) -> Vec<f64> {
        xs.iter().map(|x| self.predict_mean(x)).collect()
    }

    /// Log marginal likelihood of the standardized targets.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.len();
        let y: Vec<f64> = self
            .targets
            .iter()
            .map(|t| (t - self.target_mean) / self.target_scale)
            .collect();
        let fit: f64 = y.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let logdet: f64 = (0..n).map(|i| self.chol[(i, i)].ln()).sum();
        -0.5 * fit - logdet - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
    }
}
