use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmOptions {
    pub c: f64,
    /// RBF width; defaults to `1 / (2 (0.15 √d)²)` for unit-cube inputs.
    pub gamma: Option<f64>,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SvmOptions {
    fn default() -> Self {
        Self {
            c: 100.0,
            gamma: None,
            tolerance: 1e-3,
            max_iterations: 100_000,
        }
    }
}

/// RBF support vector classifier with Platt-scaled probabilities of
/// validity. Inactive until trained on both valid and invalid points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityModel {
    active: bool,
    support: Vec<Vec<f64>>,
    coef: Vec<f64>,
    rho: f64,
    gamma: f64,
    platt_a: f64,
    platt_b: f64,
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// Dual coordinate ascent with second-order working set selection. Returns
/// `(alpha, rho)`.
fn smo(k: &[Vec<f64>], y: &[f64], opts: &SvmOptions) -> (Vec<f64>, f64) {
    let n = y.len();
    let c = opts.c;
    let q = |i: usize, j: usize| y[i] * y[j] * k[i][j];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);
    for _ in 0..opts.max_iterations {
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            if up(alpha[t], y[t]) && -y[t] * grad[t] >= gmax {
                gmax = -y[t] * grad[t];
                i = t;
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !low(alpha[t], y[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            gmin = gmin.min(v);
            if i != usize::MAX && v < gmax {
                let b = gmax - v;
                let a = (k[i][i] + k[t][t] - 2.0 * k[i][t]).max(1e-12);
                let obj = -b * b / a;
                if obj <= best {
                    best = obj;
                    j = t;
                }
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < opts.tolerance {
            break;
        }
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (q(i, i) + q(j, j) + 2.0 * q(i, j)).max(1e-12);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 && alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = diff;
            } else if diff <= 0.0 && alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 && alpha[i] > c {
                alpha[i] = c;
                alpha[j] = c - diff;
            } else if diff <= 0.0 && alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (q(i, i) + q(j, j) - 2.0 * q(i, j)).max(1e-12);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c && alpha[i] > c {
                alpha[i] = c;
                alpha[j] = sum - c;
            } else if sum <= c && alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c && alpha[j] > c {
                alpha[j] = c;
                alpha[i] = sum - c;
            } else if sum <= c && alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
    }
    let (mut free_sum, mut free_n) = (0.0, 0usize);
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            free_sum += yg;
            free_n += 1;
        } else if (alpha[t] >= c && y[t] < 0.0) || (alpha[t] <= 0.0 && y[t] > 0.0) {
            ub = ub.min(yg);
        } else {
            lb = lb.max(yg);
        }
    }
    let rho = if free_n > 0 {
        free_sum / free_n as f64
    } else {
        0.5 * (ub + lb)
    };
    (alpha, rho)
}

/// Fits `P(valid | f) = 1 / (1 + exp(a f + b))` by Newton's method with
/// backtracking on regularized targets.
fn platt(decision: &[f64], labels: &[bool]) -> (f64, f64) {
    let prior1 = labels.iter().filter(|&&l| l).count() as f64;
    let prior0 = labels.len() as f64 - prior1;
    let hi = (prior1 + 1.0) / (prior1 + 2.0);
    let lo = 1.0 / (prior0 + 2.0);
    let t: Vec<f64> = labels.iter().map(|&l| if l { hi } else { lo }).collect();
    let objective = |a: f64, b: f64| -> f64 {
        decision
            .iter()
            .zip(&t)
            .map(|(&f, &ti)| {
                let z = f * a + b;
                if z >= 0.0 {
                    ti * z + (1.0 + (-z).exp()).ln()
                } else {
                    (ti - 1.0) * z + (1.0 + z.exp()).ln()
                }
            })
            .sum()
    };
    let (mut a, mut b) = (0.0, ((prior0 + 1.0) / (prior1 + 1.0)).ln());
    let mut fval = objective(a, b);
    for _ in 0..100 {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (1e-12, 1e-12, 0.0, 0.0, 0.0);
        for (&f, &ti) in decision.iter().zip(&t) {
            let z = f * a + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = ti - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        let mut moved = false;
        while step >= 1e-10 {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (a, b)
}

impl FeasibilityModel {
    pub fn inactive() -> Self {
        Self {
            active: false,
            support: Vec::new(),
            coef: Vec::new(),
            rho: 0.0,
            gamma: 1.0,
            platt_a: 0.0,
            platt_b: 0.0,
        }
    }

    /// Trains on unit-cube inputs; single-class data yields an inactive model.
    pub fn fit(xs: &[Vec<f64>], valid: &[bool], opts: &SvmOptions) -> Self {
        let n_valid = valid.iter().filter(|&&v| v).count();
        if xs.is_empty() || n_valid == 0 || n_valid == valid.len() {
            return Self::inactive();
        }
        let d = xs[0].len().max(1) as f64;
        let gamma = opts.gamma.unwrap_or(1.0 / (2.0 * 0.0225 * d));
        let y: Vec<f64> = valid.iter().map(|&v| if v { 1.0 } else { -1.0 }).collect();
        let k: Vec<Vec<f64>> = xs
            .iter()
            .map(|a| xs.iter().map(|b| rbf(a, b, gamma)).collect())
            .collect();
        let (alpha, rho) = smo(&k, &y, opts);
        let decision: Vec<f64> = (0..xs.len())
            .map(|i| {
                (0..xs.len())
                    .map(|j| alpha[j] * y[j] * k[i][j])
                    .sum::<f64>()
                    - rho
            })
            .collect();
        let (platt_a, platt_b) = platt(&decision, valid);
        let keep: Vec<usize> = (0..xs.len()).filter(|&i| alpha[i] > 0.0).collect();
        Self {
            active: true,
            support: keep.iter().map(|&i| xs[i].clone()).collect(),
            coef: keep.iter().map(|&i| alpha[i] * y[i]).collect(),
            rho,
            gamma,
            platt_a,
            platt_b,
        }
    }

    pub fn is_active(&self) -> bool {
        self.active
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(s, c)| c * rbf(s, x, self.gamma))
            .sum::<f64>()
            - self.rho
    }

    /// Probability of validity; 1 when inactive.
    pub fn probability(&self, x: &[f64]) -> f64 {
        if !self.active {
            return 1.0;
        }
        let z = self.platt_a * self.decision(x) + self.platt_b;
        if z >= 0.0 {
            let e = (-z).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + z.exp())
        }
    }

    /// `Some(P_valid)` when active, for weighting acquisitions.
    pub fn p_valid(&self, x: &[f64]) -> Option<f64> {
        self.active.then(|| self.probability(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sobol::sobol_points;

    fn auc(scores: &[f64], labels: &[bool]) -> f64 {
        let (mut good, mut total) = (0.0, 0.0);
        for (i, &si) in scores.iter().enumerate() {
            for (j, &sj) in scores.iter().enumerate() {
                if labels[i] && !labels[j] {
                    total += 1.0;
                    good += if si > sj {
                        1.0
                    } else if si == sj {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        good / total
    }

    #[test]
    fn separable_data_ranks_perfectly() {
        let xs: Vec<Vec<f64>> = sobol_points(100, 2, 1)
            .into_iter()
            .filter(|x| (x[0] + x[1] - 1.0).abs() > 0.1)
            .collect();
        let labels: Vec<bool> = xs.iter().map(|x| x[0] + x[1] > 1.0).collect();
        let m = FeasibilityModel::fit(&xs, &labels, &SvmOptions::default());
        assert!(m.is_active());
        let scores: Vec<f64> = xs.iter().map(|x| m.probability(x)).collect();
        assert_eq!(auc(&scores, &labels), 1.0);
        assert!(scores.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn single_class_is_inactive() {
        let xs = sobol_points(10, 2, 1);
        let m = FeasibilityModel::fit(&xs, &[true; 10], &SvmOptions::default());
        assert!(!m.is_active());
        assert_eq!(m.probability(&[0.5, 0.5]), 1.0);
        assert_eq!(m.p_valid(&[0.5, 0.5]), None);
    }

    #[test]
    fn checkerboard_is_learned() {
        let xs = sobol_points(400, 2, 5);
        let labels: Vec<bool> = xs
            .iter()
            .map(|x| ((x[0] * 4.0) as usize + (x[1] * 4.0) as usize).is_multiple_of(2))
            .collect();
        let m = FeasibilityModel::fit(&xs, &labels, &SvmOptions::default());
        let correct = xs
            .iter()
            .zip(&labels)
            .filter(|(x, &l)| (m.probability(x) > 0.5) == l)
            .count();
        let acc = correct as f64 / xs.len() as f64;
        assert!(acc >= 0.9, "training accuracy {acc}");
    }

    #[test]
    fn disk_probabilities_are_calibrated_in_direction() {
        let xs = sobol_points(200, 2, 9);
        let labels: Vec<bool> = xs
            .iter()
            .map(|x| crate::benchmarks::invalid_disk_valid(x))
            .collect();
        let m = FeasibilityModel::fit(&xs, &labels, &SvmOptions::default());
        assert!(m.probability(&[0.3, 0.3]) < 0.2);
        assert!(m.probability(&[0.9, 0.9]) > 0.8);
    }
}
