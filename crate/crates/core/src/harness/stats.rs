use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Sample mean and standard error (sample std over √n; 0 for n ≤ 1).
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p_value: f64,
}

impl WelchTest {
    pub fn significant(&self, confidence: f64) -> bool {
        self.p_value < 1.0 - confidence
    }
}

/// Welch's unequal-variance t-test of mean(a) against mean(b).
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Option<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return None;
    }
    let (ma, sa) = mean_se(a);
    let (mb, sb) = mean_se(b);
    let (va, vb) = (sa * sa, sb * sb);
    let se = (va + vb).sqrt();
    if se == 0.0 {
        let p_value = if ma == mb { 1.0 } else { 0.0 };
        let t = if ma == mb {
            0.0
        } else {
            (ma - mb).signum() * f64::INFINITY
        };
        return Some(WelchTest {
            t,
            df: f64::INFINITY,
            p_value,
        });
    }
    let t = (ma - mb) / se;
    let df = (va + vb).powi(2) / (va * va / (a.len() - 1) as f64 + vb * vb / (b.len() - 1) as f64);
    let dist = StudentsT::new(0.0, 1.0, df).ok()?;
    let p_value = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Some(WelchTest { t, df, p_value })
}

/// Per evaluation index, mean and standard error across traces. Shorter
/// traces carry their last value forward.
pub fn convergence(traces: &[Vec<f64>]) -> Vec<(f64, f64)> {
    let len = traces.iter().map(Vec::len).max().unwrap_or(0);
    (0..len)
        .map(|i| {
            let column: Vec<f64> = traces
                .iter()
                .filter_map(|t| t.get(i).or(t.last()).copied())
                .collect();
            mean_se(&column)
        })
        .collect()
}
