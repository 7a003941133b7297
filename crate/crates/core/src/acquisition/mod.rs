//! Expected-improvement style acquisitions over region grids.

mod context;
mod feasibility;
mod state;

pub use context::{AcquisitionContext, RegionSource, ScoredPoint};
pub use feasibility::{FeasibilityModel, SvmOptions};
pub use state::AcquisitionState;

use statrs::function::erf::erfc;

use crate::archive::RegionGrid;
use crate::gp::Posterior;

/// Exploration weight used by the UCB baselines.
pub const DEFAULT_BETA_UCB: f64 = 3.7;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn norm_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub fn ucb(p: Posterior, beta_ucb: f64) -> f64 {
    p.mean + beta_ucb * p.std
}

/// Closed-form expected improvement over `incumbent` (0 for an empty region).
pub fn ei_region(p: Posterior, incumbent: Option<f64>) -> f64 {
    let best = incumbent.unwrap_or(0.0);
    let gap = p.mean - best;
    if p.std <= 0.0 {
        return gap.max(0.0);
    }
    let z = gap / p.std;
    (gap * norm_cdf(z) + p.std * norm_pdf(z)).max(0.0)
}

/// Posterior mass on `[lb, ub]`; with zero spread, the indicator of `[lb, ub)`.
pub fn partition_probability(p: Posterior, lb: f64, ub: f64) -> f64 {
    if p.std <= 0.0 {
        return if p.mean >= lb && p.mean < ub {
            1.0
        } else {
            0.0
        };
    }
    let a = (lb - p.mean) / p.std;
    let b = (ub - p.mean) / p.std;
    // Upper-tail form keeps precision when both bounds are far above the mean.
    let mass = if a > 0.0 {
        norm_cdf(-a) - norm_cdf(-b)
    } else {
        norm_cdf(b) - norm_cdf(a)
    };
    mass.clamp(0.0, 1.0)
}

/// Partition probabilities along one descriptor dimension.
pub fn dimension_probabilities(p: Posterior, grid: &RegionGrid, dim: usize) -> Vec<f64> {
    (0..grid.partitions()[dim])
        .map(|k| {
            let (lb, ub) = grid.partition_bounds(dim, k);
            partition_probability(p, lb, ub)
        })
        .collect()
}

/// Probability that the descriptors land in `region`, assuming independent
/// descriptor posteriors.
pub fn region_probability(descriptors: &[Posterior], grid: &RegionGrid, region: usize) -> f64 {
    grid.unflatten(region)
        .iter()
        .zip(descriptors)
        .enumerate()
        .map(|(i, (&k, &p))| {
            let (lb, ub) = grid.partition_bounds(i, k);
            partition_probability(p, lb, ub)
        })
        .product()
}

/// Acquisition value at one point with the region that carries most of it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcqValue {
    pub value: f64,
    pub dominant_region: Option<usize>,
    /// Fraction of `value` contributed by `dominant_region`.
    pub dominant_share: f64,
}

impl AcqValue {
    pub const ZERO: AcqValue = AcqValue {
        value: 0.0,
        dominant_region: None,
        dominant_share: 0.0,
    };

    pub fn scaled(self, factor: f64) -> Self {
        Self {
            value: self.value * factor,
            ..self
        }
    }
}

/// EI against a single known region (or zero outside the grid).
pub fn ei_known_region(
    objective: Posterior,
    region: Option<usize>,
    elites: &[Option<f64>],
) -> AcqValue {
    match region {
        Some(r) => {
            let v = ei_region(objective, elites[r]);
            AcqValue {
                value: v,
                dominant_region: Some(r),
                dominant_share: if v > 0.0 { 1.0 } else { 0.0 },
            }
        }
        None => AcqValue::ZERO,
    }
}

/// EJIE with cutoff: region probabilities at or below `omega` are dropped,
/// the rest renormalized and used to weight per-region EI.
pub fn ejie_plus(
    objective: Posterior,
    descriptors: &[Posterior],
    grid: &RegionGrid,
    elites: &[Option<f64>],
    omega: f64,
) -> AcqValue {
    let m = grid.dim();
    // A region's probability is a product of factors in [0,1], so it can only
    // exceed omega if every factor does.
    let kept: Vec<Vec<(usize, f64)>> = (0..m)
        .map(|i| {
            dimension_probabilities(descriptors[i], grid, i)
                .into_iter()
                .enumerate()
                .filter(|&(_, p)| p > omega && p > 0.0)
                .collect()
        })
        .collect();
    if kept.iter().any(|k| k.is_empty()) {
        return AcqValue::ZERO;
    }
    let mut idx = vec![0usize; m];
    let mut multi = vec![0usize; m];
    let (mut weight_sum, mut weighted) = (0.0, 0.0);
    let mut best = (None, 0.0);
    loop {
        let mut rho = 1.0;
        for i in 0..m {
            let (k, p) = kept[i][idx[i]];
            multi[i] = k;
            rho *= p;
        }
        if rho > omega {
            let r = grid.flat_index(&multi);
            let contribution = rho * ei_region(objective, elites[r]);
            weight_sum += rho;
            weighted += contribution;
            if contribution > best.1 {
                best = (Some(r), contribution);
            }
        }
        let mut i = m;
        loop {
            if i == 0 {
                let value = if weight_sum > 0.0 {
                    weighted / weight_sum
                } else {
                    0.0
                };
                let share = if weighted > 0.0 {
                    best.1 / weighted
                } else {
                    0.0
                };
                return AcqValue {
                    value,
                    dominant_region: best.0,
                    dominant_share: share,
                };
            }
            i -= 1;
            idx[i] += 1;
            if idx[i] < kept[i].len() {
                break;
            }
            idx[i] = 0;
        }
    }
}

/// EJIE⁺ weighted by the probability of feasibility when a classifier is
/// active.
pub fn ejie_plus_plus(plus: AcqValue, p_valid: Option<f64>) -> AcqValue {
    match p_valid {
        Some(p) => plus.scaled(p.clamp(0.0, 1.0)),
        None => plus,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn post(mean: f64, std: f64) -> Posterior {
        Posterior::new(mean, std)
    }

    #[test]
    fn ucb_examples() {
        assert_eq!(ucb(post(1.0, 0.0), 5.0), 1.0);
        assert_abs_diff_eq!(ucb(post(1.0, 0.5), DEFAULT_BETA_UCB), 2.85, epsilon = 1e-12);
        assert_eq!(ucb(post(-0.3, 2.0), 0.0), -0.3);
    }

    #[test]
    fn ei_matches_monte_carlo_at_incumbent() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let n = 1_000_000;
        let mc: f64 = (0..n)
            .map(|_| rng.sample::<f64, _>(StandardNormal).max(0.0))
            .sum::<f64>()
            / n as f64;
        let ei = ei_region(post(3.0, 1.0), Some(3.0));
        assert_abs_diff_eq!(ei, mc, epsilon = 1e-3);
        assert_abs_diff_eq!(ei, 0.398_942_28, epsilon = 1e-8);
    }

    #[test]
    fn degenerate_ei() {
        assert_eq!(ei_region(post(1.0, 0.0), Some(1.5)), 0.0);
        assert_eq!(ei_region(post(2.0, 0.0), None), 2.0);
    }

    #[test]
    fn partition_examples() {
        assert_eq!(partition_probability(post(0.5, 0.0), 0.4, 0.6), 1.0);
        assert_eq!(partition_probability(post(0.6, 0.0), 0.4, 0.6), 0.0);
        assert_abs_diff_eq!(
            partition_probability(post(0.5, 1e-9), 0.4, 0.6),
            1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            partition_probability(post(0.5, 0.3), 0.0, 0.5),
            0.5 - norm_cdf(-0.5 / 0.3),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            partition_probability(post(0.5, 0.3), 0.0, 0.5),
            partition_probability(post(0.5, 0.3), 0.5, 1.0),
            epsilon = 1e-12
        );
        let erf1 = statrs::function::erf::erf(1.0 / std::f64::consts::SQRT_2);
        assert_abs_diff_eq!(
            partition_probability(post(0.5, 0.1), 0.4, 0.6),
            erf1,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(erf1, 0.6827, epsilon = 1e-4);
    }

    #[test]
    fn tail_mass_is_not_lost() {
        let p = partition_probability(post(0.0, 1.0), 8.0, 9.0);
        assert!(p > 0.0 && p < 1e-14);
    }

    fn grid2(n: usize) -> RegionGrid {
        RegionGrid::uniform(&[(0.0, 1.0), (0.0, 1.0)], n).unwrap()
    }

    #[test]
    fn region_probability_single_dimension() {
        let g = RegionGrid::uniform(&[(0.0, 1.0)], 4).unwrap();
        let d = [post(0.3, 0.2)];
        assert_abs_diff_eq!(
            region_probability(&d, &g, 1),
            partition_probability(d[0], 0.25, 0.5)
        );
    }

    #[test]
    fn concentrated_posteriors_pick_one_region() {
        let g = grid2(3);
        let d = [post(0.5, 1e-6), post(0.9, 1e-6)];
        let target = g.region_index(&[0.5, 0.9]).unwrap();
        for r in 0..g.region_count() {
            let p = region_probability(&d, &g, r);
            if r == target {
                assert!(p > 1.0 - 1e-9);
            } else {
                assert!(p < 1e-9);
            }
        }
    }

    #[test]
    fn region_probabilities_sum_to_in_bounds_mass() {
        let g = RegionGrid::new(&[(0.0, 2.0), (-1.0, 1.0)], &[5, 3]).unwrap();
        let d = [post(1.7, 0.6), post(-0.2, 0.9)];
        let total: f64 = (0..g.region_count())
            .map(|r| region_probability(&d, &g, r))
            .sum();
        let inside = (norm_cdf((2.0 - 1.7) / 0.6) - norm_cdf(-1.7 / 0.6))
            * (norm_cdf(1.2 / 0.9) - norm_cdf(-0.8 / 0.9));
        assert_abs_diff_eq!(total, inside, epsilon = 1e-12);
        assert!(total <= 1.0);
    }

    #[test]
    fn ejie_single_sure_region_is_ei() {
        let g = RegionGrid::uniform(&[(0.0, 1.0)], 1).unwrap();
        let o = post(1.0, 0.7);
        let v = ejie_plus(o, &[post(0.5, 1e-12)], &g, &[Some(0.4)], 0.1);
        assert_abs_diff_eq!(v.value, ei_region(o, Some(0.4)), epsilon = 1e-12);
        assert_eq!(v.dominant_region, Some(0));
    }

    #[test]
    fn ejie_cutoff_exhaustion_is_zero() {
        let g = grid2(10);
        let v = ejie_plus(
            post(5.0, 1.0),
            &[post(0.5, 2.0), post(0.5, 2.0)],
            &g,
            &[None; 100],
            0.3,
        );
        assert_eq!(v, AcqValue::ZERO);
    }

    #[test]
    fn ejie_two_region_hand_check() {
        // rho = (0.6, 0.4), EI = (1, 0): pick the descriptor mean so the mass
        // left of the boundary is 0.6, with an elite too high to improve on
        // in the right region.
        let g = RegionGrid::new(&[(-50.0, 50.0)], &[2]).unwrap();
        let s = 1.0;
        let z = statrs::distribution::ContinuousCDF::inverse_cdf(
            &statrs::distribution::Normal::standard(),
            0.6,
        );
        let d = [post(-z * s, s)];
        let rho0 = region_probability(&d, &g, 0);
        assert_abs_diff_eq!(rho0, 0.6, epsilon = 1e-12);
        let v = ejie_plus(post(1.0, 0.0), &d, &g, &[None, Some(10.0)], 0.1);
        assert_abs_diff_eq!(v.value, 0.6, epsilon = 1e-9);
        assert_eq!(v.dominant_region, Some(0));
        assert_abs_diff_eq!(v.dominant_share, 1.0);
    }

    #[test]
    fn ejie_plus_plus_examples() {
        let a = AcqValue {
            value: 0.8,
            dominant_region: Some(2),
            dominant_share: 0.9,
        };
        assert_eq!(ejie_plus_plus(a, None), a);
        assert_eq!(ejie_plus_plus(a, Some(0.0)).value, 0.0);
        assert_abs_diff_eq!(ejie_plus_plus(a, Some(0.5)).value, 0.4);
    }

    /// Unnormalized joint expectation: sum over regions of P(region) * EI.
    fn ejie_sum(o: Posterior, d: &[Posterior], g: &RegionGrid, elites: &[Option<f64>]) -> f64 {
        (0..g.region_count())
            .map(|r| region_probability(d, g, r) * ei_region(o, elites[r]))
            .sum()
    }

    #[test]
    fn joint_expectation_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for case in 0..6 {
            let n = 1 + case % 3;
            let m = 1 + case % 2;
            let g = RegionGrid::new(&vec![(0.0, 1.0); m], &vec![n; m]).unwrap();
            let elites: Vec<Option<f64>> = (0..g.region_count())
                .map(|_| rng.random_bool(0.7).then(|| rng.random_range(-1.0..1.0)))
                .collect();
            let o = post(rng.random_range(-1.0..1.0), rng.random_range(0.1..1.0));
            let d: Vec<Posterior> = (0..m)
                .map(|_| post(rng.random_range(0.0..1.0), rng.random_range(0.05..0.5)))
                .collect();
            let exact = ejie_sum(o, &d, &g, &elites);
            let samples = 100_000;
            let (mut sum, mut sq) = (0.0, 0.0);
            for _ in 0..samples {
                let b: Vec<f64> = d
                    .iter()
                    .map(|p| p.mean + p.std * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let f = o.mean + o.std * rng.sample::<f64, _>(StandardNormal);
                let v = g
                    .region_index(&b)
                    .map_or(0.0, |r| (f - elites[r].unwrap_or(0.0)).max(0.0));
                sum += v;
                sq += v * v;
            }
            let mean = sum / samples as f64;
            let se = ((sq / samples as f64 - mean * mean) / samples as f64).sqrt();
            // 1e-6 covers tail mass the sample cannot resolve.
            assert!(
                (exact - mean).abs() <= 3.0 * se + 1e-6,
                "case {case}: {exact} vs {mean} ± {se}"
            );
        }
    }

    #[test]
    fn omega_zero_ejie_is_normalized_sum() {
        let g = grid2(3);
        let elites: Vec<Option<f64>> = (0..9)
            .map(|r| (r % 2 == 0).then_some(r as f64 * 0.1))
            .collect();
        let o = post(0.5, 0.4);
        let d = [post(0.4, 0.3), post(0.6, 0.2)];
        let total: f64 = (0..9).map(|r| region_probability(&d, &g, r)).sum();
        let v = ejie_plus(o, &d, &g, &elites, 0.0);
        assert_abs_diff_eq!(
            v.value,
            ejie_sum(o, &d, &g, &elites) / total,
            epsilon = 1e-12
        );
    }

    proptest! {
        #[test]
        fn ejie_is_convex_combination(
            mu in -2.0f64..2.0, s in 0.0f64..1.5,
            b0 in -0.2f64..1.2, b1 in -0.2f64..1.2,
            s0 in 0.0f64..0.5, s1 in 0.0f64..0.5,
            omega in 0.0f64..0.5,
            elites in proptest::collection::vec(proptest::option::of(-1.0f64..1.0), 9),
        ) {
            let g = grid2(3);
            let o = post(mu, s);
            let d = [post(b0, s0), post(b1, s1)];
            let v = ejie_plus(o, &d, &g, &elites, omega);
            prop_assert!(v.value >= 0.0);
            let kept: Vec<usize> = (0..9).filter(|&r| region_probability(&d, &g, r) > omega).collect();
            if kept.is_empty() {
                prop_assert_eq!(v.value, 0.0);
            } else {
                let eis: Vec<f64> = kept.iter().map(|&r| ei_region(o, elites[r])).collect();
                let lo = eis.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = eis.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(v.value >= lo - 1e-12 && v.value <= hi + 1e-12);
            }
        }

        #[test]
        fn probabilities_are_bounded(mu in -3.0f64..3.0, s in 0.0f64..2.0, n in 1usize..8) {
            let g = RegionGrid::uniform(&[(-1.0, 1.0)], n).unwrap();
            let probs = dimension_probabilities(post(mu, s), &g, 0);
            prop_assert!(probs.iter().all(|p| (0.0..=1.0).contains(p)));
            let total: f64 = probs.iter().sum();
            let inside = if s > 0.0 {
                norm_cdf((1.0 - mu) / s) - norm_cdf((-1.0 - mu) / s)
            } else if (-1.0..1.0).contains(&mu) { 1.0 } else { 0.0 };
            prop_assert!((total - inside).abs() < 1e-9);
        }

        #[test]
        fn zero_ei_everywhere_gives_zero(b in 0.0f64..1.0, s in 0.01f64..0.5) {
            let g = grid2(2);
            let v = ejie_plus(post(-5.0, 0.0), &[post(b, s), post(b, s)], &g, &[Some(1.0); 4], 0.0);
            prop_assert_eq!(v.value, 0.0);
        }
    }
}
