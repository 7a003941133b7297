//! Comparison algorithms: MAP-Elites, Sobol sampling, SAIL and SPHEN.

mod illuminate;

pub use illuminate::{illuminate, Fitness, UnitMap};

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{ucb, DEFAULT_BETA_UCB};
use crate::archive::{Archive, Observation, RegionGrid};
use crate::benchmarks::Problem;
use crate::bop::{DescriptorMode, ModelSnapshot, RefitSchedule, Surrogate, TraceRow};
use crate::gp::{FitOptions, GpModel};
use crate::sobol::{sobol_point, sobol_points};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MapElitesConfig {
    pub mutation_sigma: f64,
    pub children_per_generation: usize,
}

impl Default for MapElitesConfig {
    fn default() -> Self {
        Self {
            mutation_sigma: 0.1,
            children_per_generation: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SailConfig {
    pub beta_ucb: f64,
    /// Generations of the acquisition-map search per evaluation.
    pub inner_generations: usize,
    pub inner: MapElitesConfig,
    /// Initial Sobol design; defaults to `10 d`.
    pub initial_design: Option<usize>,
    pub fit: FitOptions,
    pub refit: RefitSchedule,
}

impl Default for SailConfig {
    fn default() -> Self {
        Self {
            beta_ucb: DEFAULT_BETA_UCB,
            inner_generations: 10,
            inner: MapElitesConfig::default(),
            initial_design: None,
            fit: FitOptions::default(),
            refit: RefitSchedule::default(),
        }
    }
}

/// Archive, per-evaluation trace and any surrogates of a baseline run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineResult {
    pub archive: Archive,
    pub trace: Vec<TraceRow>,
    pub models: Option<ModelSnapshot>,
}

struct Recorder<'a> {
    problem: &'a dyn Problem,
    archive: Archive,
    unit_inputs: Vec<Vec<f64>>,
    trace: Vec<TraceRow>,
    started: Instant,
}

impl<'a> Recorder<'a> {
    fn new(problem: &'a dyn Problem, grid: RegionGrid) -> Self {
        Self {
            problem,
            archive: Archive::new(grid),
            unit_inputs: Vec::new(),
            trace: Vec::new(),
            started: Instant::now(),
        }
    }

    fn evaluate(&mut self, u: Vec<f64>, acquisition: f64) -> Observation {
        let obs = self.problem.evaluate(&self.problem.from_unit(&u));
        let region = if obs.valid {
            self.archive.grid().region_index(&obs.b)
        } else {
            None
        };
        self.archive.offer(obs.clone());
        self.unit_inputs.push(u);
        self.trace.push(TraceRow {
            iteration: self.trace.len() + 1,
            x: obs.x.clone(),
            y: obs.y,
            b: obs.b.clone(),
            valid: obs.valid,
            region,
            qd_score: self.archive.qd_score(),
            acquisition,
            omega: 0.0,
            alpha: 0,
            beta: 0,
            wall_ms: self.started.elapsed().as_secs_f64() * 1e3,
        });
        obs
    }

    fn finish(self, models: Option<ModelSnapshot>) -> BaselineResult {
        BaselineResult {
            archive: self.archive,
            trace: self.trace,
            models,
        }
    }
}

fn seed32(seed: u64) -> u32 {
    (seed ^ (seed >> 32)) as u32
}

/// MAP-Elites on the true problem. The first `children_per_generation`
/// uniform random points count as generation zero; the last generation is
/// truncated so exactly `budget` evaluations are spent.
pub fn map_elites_run(
    problem: &dyn Problem,
    grid: &RegionGrid,
    budget: usize,
    config: &MapElitesConfig,
    seed: u64,
) -> Result<BaselineResult> {
    let batch = config.children_per_generation;
    if batch == 0 || budget < batch {
        return Err(Error::Config(format!(
            "MAP-Elites needs a budget of at least one generation ({batch})"
        )));
    }
    if !(config.mutation_sigma >= 0.0) {
        return Err(Error::Config("mutation sigma must be non-negative".into()));
    }
    let d = problem.input_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rec = Recorder::new(problem, grid.clone());
    let mut map = UnitMap::new(grid.region_count());
    for _ in 0..batch {
        let u: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        let obs = rec.evaluate(u.clone(), 0.0);
        if obs.valid {
            map.insert(u, obs.y, grid.region_index(&obs.b));
        }
    }
    while rec.trace.len() < budget {
        let n = batch.min(budget - rec.trace.len());
        let mut kids = map.offspring(n, config.mutation_sigma, &mut rng);
        // A map with no valid entries restarts from uniform samples.
        while kids.len() < n {
            kids.push((0..d).map(|_| rng.random::<f64>()).collect());
        }
        for u in kids {
            let obs = rec.evaluate(u.clone(), 0.0);
            if obs.valid {
                map.insert(u, obs.y, grid.region_index(&obs.b));
            }
        }
    }
    Ok(rec.finish(None))
}

/// Evaluates the first `budget` points of a scrambled Sobol sequence.
pub fn sobol_run(
    problem: &dyn Problem,
    grid: &RegionGrid,
    budget: usize,
    seed: u64,
) -> Result<BaselineResult> {
    let mut rec = Recorder::new(problem, grid.clone());
    for u in sobol_points(budget, problem.input_dim(), seed32(seed)) {
        rec.evaluate(u, 0.0);
    }
    Ok(rec.finish(None))
}

/// SAIL (white-box descriptors) or SPHEN (black-box): evaluate a random
/// member of a UCB acquisition map built by surrogate MAP-Elites.
pub fn sail_like_run(
    problem: &dyn Problem,
    grid: &RegionGrid,
    budget: usize,
    config: &SailConfig,
    mode: DescriptorMode,
    seed: u64,
) -> Result<BaselineResult> {
    if !(config.beta_ucb >= 0.0) {
        return Err(Error::Config("UCB weight must be non-negative".into()));
    }
    let d = problem.input_dim();
    let n0 = config.initial_design.unwrap_or(10 * d).min(budget);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rec = Recorder::new(problem, grid.clone());
    let mut objective = Surrogate::new();
    let mut descriptors: Vec<Surrogate> = match mode {
        DescriptorMode::WhiteBox => Vec::new(),
        DescriptorMode::BlackBox => (0..problem.descriptor_dim())
            .map(|_| Surrogate::new())
            .collect(),
    };
    let mut sobol_cursor = 0;
    for _ in 0..n0 {
        rec.evaluate(sobol_point(sobol_cursor, d, seed32(seed)), 0.0);
        sobol_cursor += 1;
    }
    loop {
        let step = rec.trace.len();
        let (xs, ys, bs) = valid_data(&rec, descriptors.len());
        let mut fit = config.fit.clone();
        fit.seed = seed ^ step as u64;
        objective.update(&xs, &ys, &fit, &config.refit, step)?;
        for (i, s) in descriptors.iter_mut().enumerate() {
            s.update(&xs, &bs[i], &fit, &config.refit, step)?;
        }
        if step >= budget {
            break;
        }
        let ready = objective.model.is_some() && descriptors.iter().all(|s| s.model.is_some());
        if !ready {
            rec.evaluate(sobol_point(sobol_cursor, d, seed32(seed)), 0.0);
            sobol_cursor += 1;
            continue;
        }
        let gp = objective.model.as_ref().expect("ready");
        let dgps: Vec<&GpModel> = descriptors
            .iter()
            .filter_map(|s| s.model.as_ref())
            .collect();
        let mut fitness = |pts: &[Vec<f64>]| -> Vec<(f64, Option<usize>)> {
            let post = gp.predict_batch(pts);
            let regions: Vec<Option<usize>> = match mode {
                DescriptorMode::WhiteBox => pts
                    .iter()
                    .map(|u| grid.region_index(&problem.descriptors(&problem.from_unit(u))))
                    .collect(),
                DescriptorMode::BlackBox => {
                    let means: Vec<Vec<f64>> =
                        dgps.iter().map(|g| g.predict_mean_batch(pts)).collect();
                    (0..pts.len())
                        .map(|j| {
                            let b: Vec<f64> = means.iter().map(|m| m[j]).collect();
                            grid.region_index(&b)
                        })
                        .collect()
                }
            };
            post.iter()
                .zip(regions)
                .map(|(&p, r)| (ucb(p, config.beta_ucb), r))
                .collect()
        };
        let seeds: Vec<Vec<f64>> = rec
            .archive
            .elites()
            .iter()
            .flatten()
            .map(|e| problem.to_unit(&e.obs.x))
            .collect();
        let mut map = UnitMap::new(grid.region_count());
        illuminate(
            &mut map,
            &mut fitness,
            &seeds,
            config.inner_generations,
            config.inner.children_per_generation,
            config.inner.mutation_sigma,
            &mut rng,
        );
        match map.random_filled(&mut rng) {
            Some(r) => {
                let (u, f) = map.cells[r].clone().expect("filled");
                rec.evaluate(u, f);
            }
            None => {
                rec.evaluate(sobol_point(sobol_cursor, d, seed32(seed)), 0.0);
                sobol_cursor += 1;
            }
        }
    }
    let models = ModelSnapshot {
        objective: objective.model.as_ref().map(|m| m.snapshot()),
        descriptors: descriptors
            .iter()
            .filter_map(|s| s.model.as_ref().map(|m| m.snapshot()))
            .collect(),
        feasibility: crate::acquisition::FeasibilityModel::inactive(),
    };
    Ok(rec.finish(Some(models)))
}

type ValidData = (Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>);

fn valid_data(rec: &Recorder<'_>, descriptor_dims: usize) -> ValidData {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut bs = vec![Vec::new(); descriptor_dims];
    for (o, u) in rec.archive.history().iter().zip(&rec.unit_inputs) {
        if o.valid {
            xs.push(u.clone());
            ys.push(o.y);
            for (i, col) in bs.iter_mut().enumerate() {
                col.push(o.b[i]);
            }
        }
    }
    (xs, ys, bs)
}

pub fn sail_run(
    problem: &dyn Problem,
    grid: &RegionGrid,
    budget: usize,
    config: &SailConfig,
    seed: u64,
) -> Result<BaselineResult> {
    sail_like_run(
        problem,
        grid,
        budget,
        config,
        DescriptorMode::WhiteBox,
        seed,
    )
}

pub fn sphen_run(
    problem: &dyn Problem,
    grid: &RegionGrid,
    budget: usize,
    config: &SailConfig,
    seed: u64,
) -> Result<BaselineResult> {
    sail_like_run(
        problem,
        grid,
        budget,
        config,
        DescriptorMode::BlackBox,
        seed,
    )
}
