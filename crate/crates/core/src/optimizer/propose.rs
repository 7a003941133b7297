use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pattern::{pattern_search_batch, PatternSearchConfig};
use crate::acquisition::{AcqValue, AcquisitionContext, ScoredPoint};
use crate::sobol::sobol_points;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub presamples: usize,
    pub restarts: usize,
    pub search: PatternSearchConfig,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            presamples: 1024,
            restarts: 10,
            search: PatternSearchConfig::default(),
        }
    }
}

/// Scored Sobol presample used for restart selection and fallbacks.
#[derive(Debug, Clone)]
pub struct Presample {
    pub points: Vec<Vec<f64>>,
    pub scores: Vec<ScoredPoint>,
}

impl Presample {
    pub fn new(ctx: &AcquisitionContext<'_>, count: usize, dim: usize, seed: u32) -> Self {
        let points = sobol_points(count.max(1), dim, seed);
        let scores = ctx.score(&points);
        Self { points, scores }
    }

    /// Index with the highest restart-selection score; ties go to the larger
    /// posterior spread, then the lower index.
    pub fn best_cheap(&self) -> usize {
        let mut best = 0;
        for (i, s) in self.scores.iter().enumerate().skip(1) {
            let b = &self.scores[best];
            if s.cheap > b.cheap || (s.cheap == b.cheap && s.objective.std > b.objective.std) {
                best = i;
            }
        }
        best
    }

    pub fn best_full(&self) -> usize {
        let mut best = 0;
        for (i, s) in self.scores.iter().enumerate().skip(1) {
            if s.acq.value > self.scores[best].acq.value {
                best = i;
            }
        }
        best
    }
}

/// Picks `count` starting points: the best presample of each predicted
/// region (up to half the slots, more if random fills run out), then random
/// presamples from regions not yet represented, then any random presamples.
pub fn select_restarts(presample: &Presample, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = presample.points.len();
    if count == 0 || n == 0 {
        return Vec::new();
    }
    let mut best_per_region: std::collections::BTreeMap<usize, usize> = Default::default();
    for (i, s) in presample.scores.iter().enumerate() {
        if let Some(r) = s.predicted_region {
            let e = best_per_region.entry(r).or_insert(i);
            if s.cheap > presample.scores[*e].cheap {
                *e = i;
            }
        }
    }
    let mut bests: Vec<(usize, usize)> = best_per_region.into_iter().map(|(r, i)| (i, r)).collect();
    bests.sort_by(|a, b| {
        presample.scores[b.0]
            .cheap
            .total_cmp(&presample.scores[a.0].cheap)
            .then(a.0.cmp(&b.0))
    });
    if bests.is_empty() {
        bests.push((presample.best_cheap(), usize::MAX));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let region_slots = count.div_ceil(2).min(bests.len());
    let mut chosen: Vec<usize> = bests[..region_slots].iter().map(|b| b.0).collect();
    let mut used_regions: Vec<usize> = bests[..region_slots].iter().map(|b| b.1).collect();

    // Random fills favour unrepresented regions so restarts stay spread out.
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    for &i in &order {
        if chosen.len() >= count {
            break;
        }
        let r = presample.scores[i].predicted_region;
        if let Some(r) = r {
            if !used_regions.contains(&r) && !chosen.contains(&i) {
                chosen.push(i);
                used_regions.push(r);
            }
        }
    }
    for &i in &order {
        if chosen.len() >= count {
            break;
        }
        if !chosen.contains(&i) {
            chosen.push(i);
        }
    }
    chosen
        .into_iter()
        .map(|i| presample.points[i].clone())
        .collect()
}

#[derive(Debug, Clone)]
pub struct Proposal {
    pub x: Vec<f64>,
    pub acq: AcqValue,
    pub restarts: Vec<Vec<f64>>,
    /// Restart searches ended with zero acquisition everywhere.
    pub no_improvement: bool,
}

/// Presample, choose restarts, run pattern search from each and return the
/// best candidate (ties to the lowest restart index; the presample's best
/// point competes last).
pub fn propose_next(
    ctx: &AcquisitionContext<'_>,
    presample: &Presample,
    config: &OptimizerConfig,
    seed: u64,
) -> Proposal {
    let restarts = select_restarts(presample, config.restarts, seed);
    let results = pattern_search_batch(
        |pts: &[Vec<f64>]| ctx.evaluate(pts).into_iter().map(|a| a.value).collect(),
        &restarts,
        &config.search,
    );
    let pb = presample.best_full();
    let mut candidates: Vec<(&[f64], f64)> =
        results.iter().map(|r| (r.x.as_slice(), r.value)).collect();
    candidates.push((&presample.points[pb], presample.scores[pb].acq.value));
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate().skip(1) {
        if c.1 > candidates[best].1 {
            best = i;
        }
    }
    let best_x = candidates[best].0.to_vec();
    let acq = ctx.evaluate(std::slice::from_ref(&best_x))[0];
    Proposal {
        no_improvement: !(acq.value > 0.0),
        x: best_x,
        acq,
        restarts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::RegionSource;
    use crate::archive::RegionGrid;
    use crate::gp::{GpModel, KernelParams};

    fn quadratic_model() -> GpModel {
        let xs = sobol_points(30, 2, 3);
        let ys = xs
            .iter()
            .map(|x| -((x[0] - 0.6).powi(2) + (x[1] - 0.3).powi(2)))
            .collect();
        GpModel::with_params(xs, ys, KernelParams::isotropic(2, 0.4, 1.0).unwrap()).unwrap()
    }

    fn whitebox_region(g: &RegionGrid) -> impl Fn(&[f64]) -> Option<usize> + Sync + '_ {
        move |x: &[f64]| g.region_index(x)
    }

    #[test]
    fn single_region_finds_positive_value() {
        let gp = quadratic_model();
        let grid = RegionGrid::uniform(&[(0.0, 1.0), (0.0, 1.0)], 1).unwrap();
        let f = whitebox_region(&grid);
        let elites = [Some(-0.01)];
        let ctx = AcquisitionContext {
            objective: &gp,
            regions: RegionSource::WhiteBox(&f),
            grid: &grid,
            elites: &elites,
            omega: 0.0,
            feasibility: None,
        };
        let cfg = OptimizerConfig {
            restarts: 3,
            ..Default::default()
        };
        let pre = Presample::new(&ctx, 256, 2, 1);
        let p = propose_next(&ctx, &pre, &cfg, 0);
        assert!(!p.no_improvement);
        assert!(p.acq.value > 0.0);
        let starts = ctx.evaluate(&p.restarts);
        assert!(starts.iter().all(|s| s.value <= p.acq.value));
        let pre_max = pre.scores.iter().map(|s| s.acq.value).fold(0.0, f64::max);
        assert!(p.acq.value >= pre_max);
        assert!(p.x.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn unbeatable_elites_signal_no_improvement() {
        let gp = quadratic_model();
        let grid = RegionGrid::uniform(&[(0.0, 1.0), (0.0, 1.0)], 2).unwrap();
        let f = whitebox_region(&grid);
        let elites = [Some(1e6); 4];
        let ctx = AcquisitionContext {
            objective: &gp,
            regions: RegionSource::WhiteBox(&f),
            grid: &grid,
            elites: &elites,
            omega: 0.0,
            feasibility: None,
        };
        let pre = Presample::new(&ctx, 64, 2, 1);
        let p = propose_next(&ctx, &pre, &OptimizerConfig::default(), 0);
        assert!(p.no_improvement);
    }

    fn synthetic_presample(regions: &[Option<usize>], cheap: &[f64]) -> Presample {
        let scores = regions
            .iter()
            .zip(cheap)
            .map(|(&r, &c)| ScoredPoint {
                acq: AcqValue::ZERO,
                cheap: c,
                predicted_region: r,
                objective: crate::gp::Posterior::new(0.0, 1.0),
            })
            .collect();
        Presample {
            points: (0..regions.len())
                .map(|i| vec![i as f64 / regions.len() as f64])
                .collect(),
            scores,
        }
    }

    #[test]
    fn one_region_gives_best_plus_random_fills() {
        let pre = synthetic_presample(
            &[Some(0); 20],
            &(0..20).map(|i| (i % 7) as f64).collect::<Vec<_>>(),
        );
        let r = select_restarts(&pre, 5, 1);
        assert_eq!(r.len(), 5);
        assert_eq!(r[0], pre.points[6]);
        let mut uniq = r.clone();
        uniq.dedup();
        assert_eq!(uniq.len(), 5);
    }

    #[test]
    fn count_one_is_best_presample() {
        let pre = synthetic_presample(&[Some(0), Some(1), Some(2)], &[0.5, 2.0, 1.0]);
        assert_eq!(select_restarts(&pre, 1, 3), vec![pre.points[1].clone()]);
    }

    #[test]
    fn enough_regions_give_distinct_regions() {
        let grid = RegionGrid::uniform(&[(0.0, 1.0), (0.0, 1.0)], 4).unwrap();
        let pts = sobol_points(256, 2, 8);
        let regions: Vec<Option<usize>> = pts.iter().map(|p| grid.region_index(p)).collect();
        let cheap: Vec<f64> = pts.iter().map(|p| p[0] * p[1]).collect();
        let mut pre = synthetic_presample(&regions, &cheap);
        pre.points = pts;
        for count in [2, 5, 10, 16] {
            let r = select_restarts(&pre, count, count as u64);
            let mut ids: Vec<usize> = r.iter().map(|p| grid.region_index(p).unwrap()).collect();
            ids.sort();
            ids.dedup();
            assert_eq!(ids.len(), count);
        }
    }
}
