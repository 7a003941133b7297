//! Prediction maps: per-region elites proposed from surrogates alone, and
//! upscaling of a finished run to a finer grid.

use crate::acquisition::region_probability;
use crate::archive::{Observation, RegionGrid};
use crate::baselines::{illuminate, UnitMap};
use crate::benchmarks::Problem;
use crate::bop::{DescriptorMode, ModelSnapshot};
use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::optimizer::{pattern_search_batch, PatternSearchConfig};
use crate::sobol::sobol_points;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PmOptions {
    /// Sobol points seeding the surrogate MAP-Elites.
    pub initial: usize,
    pub generations: usize,
    pub children: usize,
    pub sigma: f64,
    pub polish: PatternSearchConfig,
    /// Black-box proposals with region probability below this are flagged.
    pub low_confidence: f64,
    pub seed: u64,
}

impl Default for PmOptions {
    fn default() -> Self {
        Self {
            initial: 500,
            generations: 200,
            children: 50,
            sigma: 0.1,
            polish: PatternSearchConfig {
                initial_step: 0.02,
                contraction: 0.5,
                max_generations: 40,
                max_evals_per_generation: 1500,
                min_step: 1e-3,
            },
            low_confidence: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    /// Native coordinates.
    pub x: Vec<f64>,
    pub unit: Vec<f64>,
    /// Posterior mean objective.
    pub predicted_value: f64,
    /// Membership probability of the proposal's own region (1 for white-box).
    pub region_probability: f64,
    /// Predicted (black-box) or true (white-box) descriptors.
    pub descriptors: Vec<f64>,
    pub low_confidence: bool,
    /// Filled in by [`predicted_qd_score`].
    pub evaluated_true_value: Option<f64>,
}

impl Proposal {
    /// Posterior mean times region probability.
    pub fn score(&self) -> f64 {
        self.predicted_value * self.region_probability
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionMap {
    pub grid: RegionGrid,
    pub proposals: Vec<Option<Proposal>>,
}

impl PredictionMap {
    pub fn filled(&self) -> usize {
        self.proposals.iter().flatten().count()
    }

    /// Sum of proposal scores.
    pub fn predicted_score(&self) -> f64 {
        self.proposals.iter().flatten().map(Proposal::score).sum()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        let (xd, bd) = self
            .proposals
            .iter()
            .flatten()
            .next()
            .map_or((0, 0), |p| (p.x.len(), p.descriptors.len()));
        let mut header = vec![
            "region_flat_index".to_string(),
            "region_multi_index".to_string(),
        ];
        header.extend((0..xd).map(|i| format!("x{i}")));
        header.push("y".into());
        header.extend((0..bd).map(|i| format!("b{i}")));
        header.push("iteration_found".into());
        header.extend(
            [
                "predicted_value",
                "region_probability",
                "evaluated_true_value",
            ]
            .map(String::from),
        );
        w.write_record(&header)?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        for (r, p) in self.proposals.iter().enumerate() {
            let Some(p) = p else { continue };
            let multi: Vec<String> = self
                .grid
                .unflatten(r)
                .iter()
                .map(|k| k.to_string())
                .collect();
            let mut row = vec![r.to_string(), multi.join(":")];
            row.extend(p.x.iter().map(|v| v.to_string()));
            row.push(opt(p.evaluated_true_value));
            row.extend(p.descriptors.iter().map(|v| v.to_string()));
            row.push(String::new());
            row.push(p.predicted_value.to_string());
            row.push(p.region_probability.to_string());
            row.push(opt(p.evaluated_true_value));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

struct Assessed {
    value: f64,
    prob: f64,
    descriptors: Vec<f64>,
    region: Option<usize>,
}

impl Assessed {
    fn score(&self) -> f64 {
        self.value * self.prob
    }
}

enum Scorer<'a> {
    White {
        objective: &'a GpModel,
        problem: &'a dyn Problem,
        grid: &'a RegionGrid,
    },
    Black {
        objective: &'a GpModel,
        descriptors: &'a [&'a GpModel],
        grid: &'a RegionGrid,
    },
}

impl Scorer<'_> {
    fn grid(&self) -> &RegionGrid {
        match self {
            Scorer::White { grid, .. } | Scorer::Black { grid, .. } => grid,
        }
    }

    /// Scores each point against `region` if given, else its own region.
    fn assess(&self, xs: &[Vec<f64>], region: Option<usize>) -> Vec<Assessed> {
        match self {
            Scorer::White {
                objective,
                problem,
                grid,
            } => {
                let mu = objective.predict_mean_batch(xs);
                xs.iter()
                    .zip(mu)
                    .map(|(u, value)| {
                        let b = problem.descriptors(&problem.from_unit(u));
                        let own = grid.region_index(&b);
                        let prob = match region {
                            Some(r) => f64::from(own == Some(r)),
                            None => 1.0,
                        };
                        Assessed {
                            value,
                            prob,
                            descriptors: b,
                            region: own,
                        }
                    })
                    .collect()
            }
            Scorer::Black {
                objective,
                descriptors,
                grid,
            } => {
                let mu = objective.predict_mean_batch(xs);
                let per_dim: Vec<_> = descriptors.iter().map(|g| g.predict_batch(xs)).collect();
                mu.into_iter()
                    .enumerate()
                    .map(|(j, value)| {
                        let post: Vec<_> = per_dim.iter().map(|d| d[j]).collect();
                        let means: Vec<f64> = post.iter().map(|p| p.mean).collect();
                        let own = grid.region_index(&means);
                        let prob = region
                            .or(own)
                            .map_or(0.0, |r| region_probability(&post, grid, r));
                        Assessed {
                            value,
                            prob,
                            descriptors: means,
                            region: own,
                        }
                    })
                    .collect()
            }
        }
    }
}

fn proposal(
    problem: &dyn Problem,
    unit: Vec<f64>,
    a: Assessed,
    low_confidence: f64,
    black: bool,
) -> Proposal {
    Proposal {
        x: problem.from_unit(&unit),
        unit,
        predicted_value: a.value,
        region_probability: a.prob,
        descriptors: a.descriptors,
        low_confidence: black && a.prob < low_confidence,
        evaluated_true_value: None,
    }
}

fn build(
    problem: &dyn Problem,
    scorer: &Scorer,
    opts: &PmOptions,
    extra_seeds: &[Vec<f64>],
) -> PredictionMap {
    let grid = scorer.grid().clone();
    let dim = problem.input_dim();
    let mut map = UnitMap::new(grid.region_count());
    let mut seeds = sobol_points(opts.initial, dim, opts.seed as u32);
    seeds.extend_from_slice(extra_seeds);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut fitness = |xs: &[Vec<f64>]| -> Vec<(f64, Option<usize>)> {
        scorer
            .assess(xs, None)
            .into_iter()
            .map(|a| (a.score(), a.region))
            .collect()
    };
    illuminate(
        &mut map,
        &mut fitness,
        &seeds,
        opts.generations,
        opts.children,
        opts.sigma,
        &mut rng,
    );

    let filled = map.filled();
    let starts: Vec<Vec<f64>> = filled
        .iter()
        .map(|&r| map.cells[r].as_ref().expect("filled").0.clone())
        .collect();

    let black = matches!(scorer, Scorer::Black { .. });
    let mut proposals = vec![None; grid.region_count()];
    for (&r, start) in filled.iter().zip(starts) {
        let best = polish_region(scorer, r, start, &opts.polish);
        let a = scorer
            .assess(std::slice::from_ref(&best), Some(r))
            .pop()
            .expect("one point");
        proposals[r] = Some(proposal(problem, best, a, opts.low_confidence, black));
    }
    PredictionMap { grid, proposals }
}

/// Pattern search on the score with moves restricted to `region`.
fn polish_region(
    scorer: &Scorer,
    region: usize,
    start: Vec<f64>,
    cfg: &PatternSearchConfig,
) -> Vec<f64> {
    let mut out = pattern_search_batch(
        |pts: &[Vec<f64>]| {
            scorer
                .assess(pts, None)
                .into_iter()
                .map(|a| {
                    if a.region == Some(region) {
                        a.score()
                    } else {
                        f64::NEG_INFINITY
                    }
                })
                .collect()
        },
        std::slice::from_ref(&start),
        cfg,
    );
    out.pop().map_or(start, |r| r.x)
}

/// Per region, the posterior-mean maximizer among points whose true
/// descriptors fall in that region.
pub fn build_pm_whitebox(
    objective: &GpModel,
    grid: &RegionGrid,
    problem: &dyn Problem,
    opts: &PmOptions,
) -> PredictionMap {
    let scorer = Scorer::White {
        objective,
        problem,
        grid,
    };
    build(problem, &scorer, opts, objective.inputs())
}

/// Per region, the maximizer of posterior mean times region probability
/// among points whose posterior-mean descriptors fall in that region.
/// `problem` is only used for its input bounds.
pub fn build_pm_blackbox(
    objective: &GpModel,
    descriptors: &[&GpModel],
    grid: &RegionGrid,
    problem: &dyn Problem,
    opts: &PmOptions,
) -> PredictionMap {
    let scorer = Scorer::Black {
        objective,
        descriptors,
        grid,
    };
    build(problem, &scorer, opts, objective.inputs())
}

/// Builds a prediction map on `fine` from a finished run's models, then lets
/// the best past observation in each fine cell replace the proposal when it
/// scores higher.
pub fn upscale(
    problem: &dyn Problem,
    models: &ModelSnapshot,
    history: &[Observation],
    mode: DescriptorMode,
    fine: &RegionGrid,
    opts: &PmOptions,
) -> Result<PredictionMap> {
    let objective = models
        .objective
        .clone()
        .map(GpModel::from_snapshot)
        .transpose()?
        .ok_or_else(|| Error::Config("run artifact has no objective model".into()))?;
    let descriptors = models
        .descriptors
        .iter()
        .cloned()
        .map(GpModel::from_snapshot)
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&GpModel> = descriptors.iter().collect();
    if mode == DescriptorMode::BlackBox && refs.len() != fine.dim() {
        return Err(Error::Dimension {
            expected: fine.dim(),
            got: refs.len(),
        });
    }
    let scorer = match mode {
        DescriptorMode::WhiteBox => Scorer::White {
            objective: &objective,
            problem,
            grid: fine,
        },
        DescriptorMode::BlackBox => Scorer::Black {
            objective: &objective,
            descriptors: &refs,
            grid: fine,
        },
    };
    let mut pm = build(problem, &scorer, opts, objective.inputs());

    let black = mode == DescriptorMode::BlackBox;
    for o in history.iter().filter(|o| o.valid) {
        let Some(r) = fine.region_index(&o.b) else {
            continue;
        };
        let u = problem.to_unit(&o.x);
        let a = scorer
            .assess(std::slice::from_ref(&u), Some(r))
            .pop()
            .expect("one point");
        if pm.proposals[r]
            .as_ref()
            .is_none_or(|p| a.score() > p.score())
        {
            pm.proposals[r] = Some(proposal(problem, u, a, opts.low_confidence, black));
        }
    }
    Ok(pm)
}

/// Evaluates every proposal on the true problem and returns the sum of true
/// values of proposals that are valid and land in their own region; others
/// count as zero. Each proposal's `evaluated_true_value` is set.
pub fn predicted_qd_score(problem: &dyn Problem, pm: &mut PredictionMap) -> f64 {
    let mut total = 0.0;
    for (r, p) in pm.proposals.iter_mut().enumerate() {
        let Some(p) = p else { continue };
        let obs = problem.evaluate(&p.x);
        let value = if obs.valid && pm.grid.region_index(&obs.b) == Some(r) {
            obs.y
        } else {
            0.0
        };
        p.evaluated_true_value = Some(value);
        total += value;
    }
    total
}
