use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Problem;
use crate::gp::{factorize, scale_inputs, GpModel, KernelParams, JITTER_START};
use crate::sobol::sobol_points;

pub const SYNTHETIC_DIM: usize = 10;
pub const SYNTHETIC_ANCHORS: usize = 300;
const PROBES: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticGpSpec {
    pub seed: u64,
    pub descriptors: usize,
    pub input_dim: usize,
    pub anchors: usize,
    pub lengthscale_range: (f64, f64),
    /// Fixed lengthscale for every function instead of a random draw.
    pub lengthscale: Option<f64>,
}

impl SyntheticGpSpec {
    pub fn new(seed: u64, descriptors: usize) -> Self {
        Self {
            seed,
            descriptors,
            input_dim: SYNTHETIC_DIM,
            anchors: SYNTHETIC_ANCHORS,
            lengthscale_range: (0.1, 1.0),
            lengthscale: None,
        }
    }
}

/// One objective and `k` descriptor functions, each the posterior mean of a
/// Matérn-5/2 GP conditioned on a prior sample at Sobol anchor points.
pub struct SyntheticGp {
    spec: SyntheticGpSpec,
    functions: Vec<GpModel>,
    descriptor_bounds: Vec<(f64, f64)>,
}

/// Draws one realization at the anchors and returns the interpolating model.
fn realize(anchors: &[Vec<f64>], lengthscale: f64, rng: &mut ChaCha8Rng) -> GpModel {
    let dim = anchors[0].len();
    let params = KernelParams::isotropic(dim, lengthscale, 1.0).expect("positive lengthscale");
    let scaled = scale_inputs(anchors, &params.lengthscales);
    let (chol, _) =
        factorize(&scaled, dim, 1.0, JITTER_START).expect("Matérn Gram matrix factorizes");
    let z: Vec<f64> = (0..anchors.len())
        .map(|_| rng.sample(StandardNormal))
        .collect();
    let values: Vec<f64> = (0..anchors.len())
        .map(|i| (0..=i).map(|j| chol[(i, j)] * z[j]).sum())
        .collect();
    GpModel::with_params(anchors.to_vec(), values, params).expect("anchors are distinct")
}

impl SyntheticGp {
    pub fn new(spec: SyntheticGpSpec) -> Self {
        let anchor_seed = (spec.seed as u32).wrapping_mul(2_654_435_761);
        let anchors = sobol_points(spec.anchors, spec.input_dim, anchor_seed);
        let functions: Vec<GpModel> = (0..=spec.descriptors)
            .map(|f| {
                let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                rng.set_stream(f as u64);
                let (lo, hi) = spec.lengthscale_range;
                let ls = spec
                    .lengthscale
                    .unwrap_or_else(|| rng.random_range(lo..=hi));
                realize(&anchors, ls, &mut rng)
            })
            .collect();
        let probes = sobol_points(PROBES, spec.input_dim, anchor_seed ^ 0x5bd1_e995);
        let descriptor_bounds = functions[1..]
            .iter()
            .map(|g| {
                let v = g.predict_mean_batch(&probes);
                let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            })
            .collect();
        Self {
            spec,
            functions,
            descriptor_bounds,
        }
    }

    pub fn spec(&self) -> &SyntheticGpSpec {
        &self.spec
    }

    pub fn lengthscales(&self) -> Vec<f64> {
        self.functions
            .iter()
            .map(|g| g.params().lengthscales[0])
            .collect()
    }

    pub fn anchors(&self) -> &[Vec<f64>] {
        self.functions[0].inputs()
    }

    /// Drawn values at the anchors: objective first, then each descriptor.
    pub fn anchor_values(&self) -> Vec<&[f64]> {
        self.functions.iter().map(|g| g.targets()).collect()
    }
}

impl Problem for SyntheticGp {
    fn name(&self) -> String {
        format!("synthetic_gp:{}:{}", self.spec.seed, self.spec.descriptors)
    }

    fn input_bounds(&self) -> Vec<(f64, f64)> {
        vec![(0.0, 1.0); self.spec.input_dim]
    }

    fn descriptor_bounds(&self) -> Vec<(f64, f64)> {
        self.descriptor_bounds.clone()
    }

    fn objective(&self, x: &[f64]) -> f64 {
        self.functions[0].predict_mean(x)
    }

    fn descriptors(&self, x: &[f64]) -> Vec<f64> {
        self.functions[1..]
            .iter()
            .map(|g| g.predict_mean(x))
            .collect()
    }
}
