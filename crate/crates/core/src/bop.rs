//! The sequential BOP-Elites loop.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::acquisition::{
    AcqValue, AcquisitionContext, AcquisitionState, FeasibilityModel, RegionSource, SvmOptions,
};
use crate::archive::{Archive, Observation, RegionGrid};
use crate::benchmarks::Problem;
use crate::gp::{FitOptions, GpModel, GpSnapshot};
use crate::optimizer::{propose_next, OptimizerConfig, Presample};
use crate::sobol::sobol_point;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DescriptorMode {
    #[default]
    WhiteBox,
    BlackBox,
}

/// When hyperparameters are re-optimized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefitSchedule {
    /// Refit after every evaluation while the model has at most this many
    /// points.
    pub every_step_until: usize,
    /// Afterwards refit on every `every`-th evaluation.
    pub every: usize,
}

impl Default for RefitSchedule {
    fn default() -> Self {
        Self {
            every_step_until: 300,
            every: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub problem: String,
    /// Partitions per descriptor dimension; one value is broadcast.
    pub resolution: Vec<usize>,
    pub budget: usize,
    /// Initial Sobol design; defaults to `10 d`.
    pub initial_design: Option<usize>,
    pub mode: DescriptorMode,
    pub seed: u64,
    /// Weight the acquisition by the probability of feasibility once an
    /// invalid point has been seen.
    pub feasibility: bool,
    /// Spend the start of the budget on a coarse grid with this many
    /// partitions per dimension.
    pub upscale_start: Option<usize>,
    pub optimizer: OptimizerConfig,
    pub fit: FitOptions,
    pub refit: RefitSchedule,
    pub svm: SvmOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: "mishra".into(),
            resolution: vec![10],
            budget: 1000,
            initial_design: None,
            mode: DescriptorMode::WhiteBox,
            seed: 0,
            feasibility: true,
            upscale_start: None,
            optimizer: OptimizerConfig::default(),
            fit: FitOptions::default(),
            refit: RefitSchedule::default(),
            svm: SvmOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn grid_for(&self, problem: &dyn Problem) -> Result<RegionGrid> {
        grid_for(problem, &self.resolution)
    }

    pub fn initial_design_size(&self, input_dim: usize) -> usize {
        self.initial_design.unwrap_or(10 * input_dim)
    }

    pub fn validate(&self, input_dim: usize) -> Result<()> {
        let n0 = self.initial_design_size(input_dim);
        if n0 < 2 {
            return Err(Error::Config(
                "initial design needs at least 2 points".into(),
            ));
        }
        if self.budget < n0 {
            return Err(Error::Config(format!(
                "budget {} is smaller than the initial design {n0}",
                self.budget
            )));
        }
        self.optimizer.search.validate()
    }
}

/// Grid over the problem's descriptor bounds.
pub fn grid_for(problem: &dyn Problem, resolution: &[usize]) -> Result<RegionGrid> {
    let bounds = problem.descriptor_bounds();
    let parts = match resolution {
        [n] => vec![*n; bounds.len()],
        r => r.to_vec(),
    };
    RegionGrid::new(&bounds, &parts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub x: Vec<f64>,
    pub y: f64,
    pub b: Vec<f64>,
    pub valid: bool,
    pub region: Option<usize>,
    pub qd_score: f64,
    pub acquisition: f64,
    pub omega: f64,
    pub alpha: u64,
    pub beta: u64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSnapshot {
    pub objective: Option<GpSnapshot>,
    pub descriptors: Vec<GpSnapshot>,
    pub feasibility: FeasibilityModel,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub config: RunConfig,
    pub archive: Archive,
    pub trace: Vec<TraceRow>,
    pub models: ModelSnapshot,
    pub state: AcquisitionState,
}

pub(crate) struct Surrogate {
    pub(crate) model: Option<GpModel>,
    cold_fit_size: usize,
}

impl Surrogate {
    pub(crate) fn new() -> Self {
        Self {
            model: None,
            cold_fit_size: 0,
        }
    }

    /// Conditions on the new data and re-optimizes hyperparameters on the
    /// schedule: cold whenever the data has doubled since the last cold fit,
    /// warm on scheduled steps, otherwise hyperparameters stay fixed.
    pub(crate) fn update(
        &mut self,
        inputs: &[Vec<f64>],
        targets: &[f64],
        fit: &FitOptions,
        schedule: &RefitSchedule,
        step: usize,
    ) -> Result<()> {
        let n = inputs.len();
        if n < 2 {
            self.model = None;
            return Ok(());
        }
        let model = match self.model.take() {
            None => None,
            Some(mut m) => {
                for (x, &y) in inputs.iter().zip(targets).skip(m.len()) {
                    m.add_observation(x.clone(), y)?;
                }
                Some(m)
            }
        };
        let model = match model {
            Some(m) if n < 2 * self.cold_fit_size => {
                let scheduled =
                    n <= schedule.every_step_until || step.is_multiple_of(schedule.every.max(1));
                if scheduled {
                    m.refit(fit, true)?
                } else {
                    m
                }
            }
            Some(m) => {
                self.cold_fit_size = n;
                m.refit(fit, false)?
            }
            None => {
                self.cold_fit_size = n;
                GpModel::fit(inputs.to_vec(), targets.to_vec(), fit)?
            }
        };
        self.model = Some(model);
        Ok(())
    }
}

/// A BOP-Elites run in progress.
pub struct BopElites<'a> {
    problem: &'a dyn Problem,
    config: RunConfig,
    grid: RegionGrid,
    archive: Archive,
    unit_inputs: Vec<Vec<f64>>,
    objective: Surrogate,
    descriptors: Vec<Surrogate>,
    feasibility: FeasibilityModel,
    state: AcquisitionState,
    trace: Vec<TraceRow>,
    evaluations: usize,
    sobol_cursor: usize,
    started: Instant,
    target_grid: Option<RegionGrid>,
    coarse_evaluations: usize,
}

/// Seed of the acquisition search made after `evaluations` evaluations.
pub fn step_seed(seed: u64, evaluations: usize) -> u64 {
    mix(seed, 1_000_003 + evaluations as u64)
}

fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl<'a> BopElites<'a> {
    /// Evaluates the initial Sobol design and fits the first models.
    pub fn initialize(problem: &'a dyn Problem, config: RunConfig) -> Result<Self> {
        let d = problem.input_dim();
        config.validate(d)?;
        let target = config.grid_for(problem)?;
        let (grid, target_grid, coarse_evaluations) = match config.upscale_start {
            Some(n) => {
                let coarse = grid_for(problem, &[n])?;
                let spend = (2 * coarse.region_count()).min(config.budget / 4);
                (coarse, Some(target), spend)
            }
            None => (target, None, 0),
        };
        let descriptors = match config.mode {
            DescriptorMode::WhiteBox => Vec::new(),
            DescriptorMode::BlackBox => (0..problem.descriptor_dim())
                .map(|_| Surrogate::new())
                .collect(),
        };
        let mut run = Self {
            problem,
            state: AcquisitionState::new(grid.region_count(), d),
            archive: Archive::new(grid.clone()),
            grid,
            unit_inputs: Vec::new(),
            objective: Surrogate::new(),
            descriptors,
            feasibility: FeasibilityModel::inactive(),
            trace: Vec::new(),
            evaluations: 0,
            sobol_cursor: 0,
            started: Instant::now(),
            target_grid,
            coarse_evaluations,
            config,
        };
        let n0 = run.config.initial_design_size(d);
        for _ in 0..n0 {
            let u = run.next_sobol();
            run.evaluate(u, AcqValue::ZERO);
        }
        run.refresh_models()?;
        Ok(run)
    }

    fn seed32(&self) -> u32 {
        mix(self.config.seed, 0) as u32
    }

    fn next_sobol(&mut self) -> Vec<f64> {
        let u = sobol_point(self.sobol_cursor, self.problem.input_dim(), self.seed32());
        self.sobol_cursor += 1;
        u
    }

    fn evaluate(&mut self, u: Vec<f64>, acq: AcqValue) -> Observation {
        let x = self.problem.from_unit(&u);
        let obs = self.problem.evaluate(&x);
        self.evaluations += 1;
        let region = if obs.valid {
            self.grid.region_index(&obs.b)
        } else {
            None
        };
        self.archive.offer(obs.clone());
        self.unit_inputs.push(u);
        self.trace.push(TraceRow {
            iteration: self.evaluations,
            x: obs.x.clone(),
            y: obs.y,
            b: obs.b.clone(),
            valid: obs.valid,
            region,
            qd_score: self.archive.qd_score(),
            acquisition: acq.value,
            omega: self.state.omega,
            alpha: self.state.alpha_count,
            beta: self.state.beta_count,
            wall_ms: self.started.elapsed().as_secs_f64() * 1e3,
        });
        obs
    }

    fn refresh_models(&mut self) -> Result<()> {
        let history = self.archive.history();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut bs: Vec<Vec<f64>> = vec![Vec::new(); self.descriptors.len()];
        let mut valid = Vec::with_capacity(history.len());
        for (o, u) in history.iter().zip(&self.unit_inputs) {
            valid.push(o.valid);
            if o.valid {
                xs.push(u.clone());
                ys.push(o.y);
                for (i, col) in bs.iter_mut().enumerate() {
                    col.push(o.b[i]);
                }
            }
        }
        let step = self.evaluations;
        let mut fit = self.config.fit.clone();
        fit.seed = mix(self.config.seed, step as u64);
        self.objective
            .update(&xs, &ys, &fit, &self.config.refit, step)?;
        for (i, s) in self.descriptors.iter_mut().enumerate() {
            fit.seed = mix(self.config.seed ^ (i as u64 + 1), step as u64);
            s.update(&xs, &bs[i], &fit, &self.config.refit, step)?;
        }
        if self.config.feasibility && valid.iter().any(|v| !v) {
            self.feasibility = FeasibilityModel::fit(&self.unit_inputs, &valid, &self.config.svm);
        }
        Ok(())
    }

    pub fn done(&self) -> bool {
        self.evaluations >= self.config.budget
    }

    fn models_ready(&self) -> bool {
        self.objective.model.is_some() && self.descriptors.iter().all(|s| s.model.is_some())
    }

    fn maybe_switch_grid(&mut self) {
        if self.target_grid.is_some() && self.evaluations >= self.coarse_evaluations {
            let grid = self.target_grid.take().expect("checked above");
            self.archive = self.archive.regrid(grid.clone());
            self.state.region_count = grid.region_count();
            self.state.update_omega();
            self.grid = grid;
        }
    }

    /// One propose, evaluate, update cycle.
    pub fn step(&mut self) -> Result<Observation> {
        self.maybe_switch_grid();
        let obs = if !self.models_ready() {
            let u = self.next_sobol();
            self.evaluate(u, AcqValue::ZERO)
        } else {
            let (u, acq) = self.propose();
            let obs = self.evaluate(u, acq);
            if self.config.mode == DescriptorMode::BlackBox && acq.dominant_share > 0.5 {
                let landed = obs.valid.then(|| self.grid.region_index(&obs.b)).flatten();
                if landed != acq.dominant_region {
                    self.state.record_misattribution();
                }
            }
            obs
        };
        self.state.record_evaluation();
        self.refresh_models()?;
        self.maybe_switch_grid();
        Ok(obs)
    }

    fn propose(&mut self) -> (Vec<f64>, AcqValue) {
        let elites: Vec<Option<f64>> = self
            .archive
            .elites()
            .iter()
            .map(|e| e.as_ref().map(|e| e.obs.y))
            .collect();
        let problem = self.problem;
        let grid = &self.grid;
        let truth = move |u: &[f64]| grid.region_index(&problem.descriptors(&problem.from_unit(u)));
        let descriptor_models: Vec<&GpModel> = self
            .descriptors
            .iter()
            .map(|s| s.model.as_ref().expect("models ready"))
            .collect();
        let regions = match self.config.mode {
            DescriptorMode::WhiteBox => RegionSource::WhiteBox(&truth),
            DescriptorMode::BlackBox => RegionSource::BlackBox(&descriptor_models),
        };
        let feas = self.feasibility.is_active().then_some(&self.feasibility);
        let objective = self.objective.model.as_ref().expect("models ready");
        let step_seed = step_seed(self.config.seed, self.evaluations);
        let mut ctx = AcquisitionContext {
            objective,
            regions,
            grid,
            elites: &elites,
            omega: self.state.omega,
            feasibility: feas,
        };
        let presample = Presample::new(
            &ctx,
            self.config.optimizer.presamples,
            problem.input_dim(),
            step_seed as u32,
        );
        let first = propose_next(&ctx, &presample, &self.config.optimizer, step_seed);
        if !first.no_improvement {
            return (first.x, first.acq);
        }
        self.state.record_no_value();
        if self.config.mode == DescriptorMode::BlackBox {
            ctx.omega = self.state.omega;
            let retry_presample = Presample::new(
                &ctx,
                self.config.optimizer.presamples,
                problem.input_dim(),
                step_seed as u32,
            );
            let second = propose_next(
                &ctx,
                &retry_presample,
                &self.config.optimizer,
                step_seed ^ 1,
            );
            if !second.no_improvement {
                return (second.x, second.acq);
            }
        }
        self.state.record_no_value();
        let i = presample.best_cheap();
        (presample.points[i].clone(), presample.scores[i].acq)
    }

    pub fn archive(&self) -> &Archive {
        &self.archive
    }

    pub fn state(&self) -> &AcquisitionState {
        &self.state
    }

    pub fn trace(&self) -> &[TraceRow] {
        &self.trace
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn objective_model(&self) -> Option<&GpModel> {
        self.objective.model.as_ref()
    }

    pub fn descriptor_models(&self) -> Vec<&GpModel> {
        self.descriptors
            .iter()
            .filter_map(|s| s.model.as_ref())
            .collect()
    }

    pub fn feasibility(&self) -> &FeasibilityModel {
        &self.feasibility
    }

    pub fn finish(self) -> RunResult {
        RunResult {
            models: ModelSnapshot {
                objective: self.objective.model.as_ref().map(|m| m.snapshot()),
                descriptors: self
                    .descriptors
                    .iter()
                    .filter_map(|s| s.model.as_ref().map(|m| m.snapshot()))
                    .collect(),
                feasibility: self.feasibility,
            },
            config: self.config,
            archive: self.archive,
            trace: self.trace,
            state: self.state,
        }
    }
}

/// Initializes and steps until the budget is spent.
pub fn run(problem: &dyn Problem, config: RunConfig) -> Result<RunResult> {
    let mut r = BopElites::initialize(problem, config)?;
    while !r.done() {
        r.step()?;
        if r.evaluations() % 50 == 0 {
            log::debug!(
                "{} eval {}: qd {:.3} omega {:.4}",
                r.problem.name(),
                r.evaluations(),
                r.archive().qd_score(),
                r.state().omega
            );
        }
    }
    Ok(r.finish())
}
