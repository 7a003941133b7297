use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const SQRT5: f64 = 2.236_067_977_499_79;

/// Matérn-5/2 ARD hyperparameters, expressed in standardized target units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
}

impl KernelParams {
    pub fn new(lengthscales: Vec<f64>, signal_variance: f64) -> Result<Self> {
        let p = Self {
            lengthscales,
            signal_variance,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn isotropic(dim: usize, lengthscale: f64, signal_variance: f64) -> Result<Self> {
        Self::new(vec![lengthscale; dim], signal_variance)
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn validate(&self) -> Result<()> {
        let good = |v: f64| v.is_finite() && v > 0.0;
        if self.lengthscales.is_empty() || !self.lengthscales.iter().all(|&l| good(l)) {
            return Err(Error::Config(format!(
                "lengthscales must be positive and finite: {:?}",
                self.lengthscales
            )));
        }
        if !good(self.signal_variance) {
            return Err(Error::Config(format!(
                "signal variance must be positive and finite: {}",
                self.signal_variance
            )));
        }
        Ok(())
    }
}

/// Matérn-5/2 correlation at scaled distance `r`.
#[inline]
pub fn matern52(r: f64) -> f64 {
    let s = SQRT5 * r;
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

/// `σ_f² · (1 + √5 r + 5r²/3) · exp(−√5 r)` with `r² = Σ (a_d − b_d)² / ℓ_d²`.
pub fn kernel_eval(a: &[f64], b: &[f64], params: &KernelParams) -> Result<f64> {
    let d = params.dim();
    if a.len() != d {
        return Err(Error::Dimension {
            expected: d,
            got: a.len(),
        });
    }
    if b.len() != d {
        return Err(Error::Dimension {
            expected: d,
            got: b.len(),
        });
    }
    let r2: f64 = a
        .iter()
        .zip(b)
        .zip(&params.lengthscales)
        .map(|((x, y), l)| ((x - y) / l).powi(2))
        .sum();
    Ok(params.signal_variance * matern52(r2.sqrt()))
}

/// Kernel on inputs that were already divided by their lengthscales.
#[inline]
pub(crate) fn scaled_kernel(a: &[f64], b: &[f64], signal_variance: f64) -> f64 {
    let mut r2 = 0.0;
    for (x, y) in a.iter().zip(b) {
        let t = x - y;
        r2 += t * t;
    }
    signal_variance * matern52(r2.sqrt())
}
