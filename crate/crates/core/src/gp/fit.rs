use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kernel::KernelParams;
use super::{factorize, scale_inputs, standardization, GpModel, JITTER_START};
use crate::optimizer::pattern::{pattern_search_batch, PatternSearchConfig};
use crate::{Error, Result};

/// Hyperparameter search settings. Bounds apply in standardized target space
/// and normalized input space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub restarts: usize,
    pub lengthscale_bounds: (f64, f64),
    pub variance_bounds: (f64, f64),
    /// Likelihood is evaluated on at most this many points (evenly strided).
    pub max_fit_points: usize,
    pub cold_search: PatternSearchConfig,
    pub warm_search: PatternSearchConfig,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 8,
            lengthscale_bounds: (0.005, 4.0),
            variance_bounds: (0.05, 20.0),
            max_fit_points: 300,
            cold_search: PatternSearchConfig {
                initial_step: 0.2,
                contraction: 0.5,
                max_generations: 100,
                max_evals_per_generation: 1500,
                min_step: 2e-3,
            },
            warm_search: PatternSearchConfig {
                initial_step: 0.025,
                contraction: 0.5,
                max_generations: 40,
                max_evals_per_generation: 1500,
                min_step: 2e-3,
            },
            seed: 0,
        }
    }
}

fn to_unit(v: f64, (lo, hi): (f64, f64)) -> f64 {
    ((v.ln() - lo.ln()) / (hi.ln() - lo.ln())).clamp(0.0, 1.0)
}

fn from_unit(u: f64, (lo, hi): (f64, f64)) -> f64 {
    (lo.ln() + u.clamp(0.0, 1.0) * (hi.ln() - lo.ln())).exp()
}

impl FitOptions {
    fn encode(&self, p: &KernelParams) -> Vec<f64> {
        let mut theta: Vec<f64> = p
            .lengthscales
            .iter()
            .map(|&l| to_unit(l, self.lengthscale_bounds))
            .collect();
        theta.push(to_unit(p.signal_variance, self.variance_bounds));
        theta
    }

    fn decode(&self, theta: &[f64]) -> KernelParams {
        let (ls, sv) = theta.split_at(theta.len() - 1);
        KernelParams {
            lengthscales: ls
                .iter()
                .map(|&u| from_unit(u, self.lengthscale_bounds))
                .collect(),
            signal_variance: from_unit(sv[0], self.variance_bounds),
        }
    }

    fn default_params(&self, dim: usize) -> KernelParams {
        let (lo, hi) = self.lengthscale_bounds;
        let (vlo, vhi) = self.variance_bounds;
        KernelParams {
            lengthscales: vec![0.3_f64.clamp(lo, hi); dim],
            signal_variance: 1.0_f64.clamp(vlo, vhi),
        }
    }
}

/// Log marginal likelihood of standardized targets under a zero-mean GP;
/// `-inf` when the Gram matrix cannot be factorized.
pub fn log_marginal_likelihood(
    inputs: &[Vec<f64>],
    std_targets: &[f64],
    params: &KernelParams,
) -> f64 {
    let dim = params.dim();
    let scaled = scale_inputs(inputs, &params.lengthscales);
    lml_scaled(&scaled, dim, std_targets, params.signal_variance)
}

fn lml_scaled(scaled: &[f64], dim: usize, y: &[f64], signal_variance: f64) -> f64 {
    let Some((chol, _)) = factorize(scaled, dim, signal_variance, JITTER_START) else {
        return f64::NEG_INFINITY;
    };
    let n = y.len();
    let alpha = super::cholesky_solve(&chol, y);
    let fit: f64 = y.iter().zip(&alpha).map(|(a, b)| a * b).sum();
    let logdet: f64 = (0..n).map(|i| chol[(i, i)].ln()).sum();
    let v = -0.5 * fit - logdet - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    if v.is_finite() {
        v
    } else {
        f64::NEG_INFINITY
    }
}

fn fit_subset(n: usize, cap: usize) -> Vec<usize> {
    if n <= cap {
        return (0..n).collect();
    }
    let mut idx: Vec<usize> = (0..cap).map(|i| i * n / cap).collect();
    idx.dedup();
    idx
}

fn optimize(
    inputs: &[Vec<f64>],
    targets: &[f64],
    opts: &FitOptions,
    incumbent: Option<&KernelParams>,
    warm: bool,
) -> KernelParams {
    let dim = inputs[0].len();
    let idx = fit_subset(inputs.len(), opts.max_fit_points.max(2));
    let xs: Vec<Vec<f64>> = idx.iter().map(|&i| inputs[i].clone()).collect();
    let ts: Vec<f64> = idx.iter().map(|&i| targets[i]).collect();
    let (mean, scale) = standardization(&ts);
    let y: Vec<f64> = ts.iter().map(|t| (t - mean) / scale).collect();

    let start_params = incumbent
        .cloned()
        .unwrap_or_else(|| opts.default_params(dim));
    if xs.len() < 2 {
        return start_params;
    }

    let objective = |pts: &[Vec<f64>]| -> Vec<f64> {
        pts.iter()
            .map(|theta| {
                let p = opts.decode(theta);
                let scaled = scale_inputs(&xs, &p.lengthscales);
                lml_scaled(&scaled, dim, &y, p.signal_variance)
            })
            .collect()
    };

    let (starts, config) = match warm {
        true => (vec![opts.encode(&start_params)], &opts.warm_search),
        false => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let mut starts = vec![opts.encode(&start_params)];
            while starts.len() < opts.restarts.max(1) {
                starts.push((0..=dim).map(|_| rng.random::<f64>()).collect());
            }
            (starts, &opts.cold_search)
        }
    };
    let results = pattern_search_batch(objective, &starts, config);
    let best = results
        .iter()
        .enumerate()
        .max_by(|(i, a), (j, b)| a.value.total_cmp(&b.value).then(j.cmp(i)))
        .map(|(_, r)| r)
        .expect("at least one start");
    opts.decode(&best.x)
}

impl GpModel {
    /// Maximizes the log marginal likelihood with multi-start pattern search,
    /// then conditions on all data.
    pub fn fit(inputs: Vec<Vec<f64>>, targets: Vec<f64>, opts: &FitOptions) -> Result<Self> {
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
        if !targets.iter().all(|t| t.is_finite()) {
            return Err(Error::Fit("non-finite target".into()));
        }
        let dim = inputs[0].len();
        if let Some(bad) = inputs.iter().find(|x| x.len() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                got: bad.len(),
            });
        }
        let params = optimize(&inputs, &targets, opts, None, false);
        GpModel::with_params(inputs, targets, params)
    }

    /// Re-optimizes hyperparameters on the model's own data. A warm refit
    /// runs one short local search from the current hyperparameters; a cold
    /// refit is the full multi-start search seeded with the current values.
    pub fn refit(&self, opts: &FitOptions, warm: bool) -> Result<Self> {
        let params = optimize(&self.inputs, &self.targets, opts, Some(&self.params), warm);
        GpModel::with_params(self.inputs.clone(), self.targets.clone(), params)
    }
}
