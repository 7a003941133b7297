//! Experiment runner: seeded replications over (algorithm, problem, grid,
//! budget) cells, per-run artifacts, summary tables and convergence data.

mod overrides;
mod stats;

pub use overrides::apply_override;
pub use stats::{convergence, mean_se, welch_t_test, WelchTest};

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::archive::Archive;
use crate::baselines::{
    map_elites_run, sail_run, sobol_run, sphen_run, MapElitesConfig, SailConfig,
};
use crate::benchmarks::problem_from_id;
use crate::bop::{self, grid_for, DescriptorMode, ModelSnapshot, RunConfig, TraceRow};
use crate::gp::GpModel;
use crate::prediction::{build_pm_blackbox, build_pm_whitebox, upscale, PmOptions, PredictionMap};
use crate::{Error, Result};

/// Environment variable naming the root under which relative output
/// directories are resolved.
pub const OUTPUT_ENV: &str = "BOP_ELITES_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    BopElites,
    MapElites,
    Sobol,
    Sail,
    Sphen,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::BopElites,
        Algorithm::MapElites,
        Algorithm::Sobol,
        Algorithm::Sail,
        Algorithm::Sphen,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::BopElites => "bop_elites",
            Algorithm::MapElites => "map_elites",
            Algorithm::Sobol => "sobol",
            Algorithm::Sail => "sail",
            Algorithm::Sphen => "sphen",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::UnknownAlgorithm(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    None,
    /// Divide each run's score by the best score any algorithm reached on
    /// the same column and seed.
    PerSeedBest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub algorithm: Algorithm,
    /// Problem id; `{seed}` is replaced by the replication seed.
    pub problem: String,
    pub resolution: Vec<usize>,
    pub budget: usize,
    /// Descriptor handling for BOP-Elites; ignored by the other algorithms.
    #[serde(default)]
    pub mode: DescriptorMode,
    /// Row name in the summary; defaults to the algorithm (plus mode for
    /// black-box BOP-Elites).
    #[serde(default)]
    pub label: Option<String>,
    /// Overrides the template's feasibility weighting for BOP-Elites.
    #[serde(default)]
    pub feasibility: Option<bool>,
}

impl CellSpec {
    pub fn label(&self) -> String {
        self.label
            .clone()
            .unwrap_or_else(|| match (self.algorithm, self.mode) {
                (Algorithm::BopElites, DescriptorMode::BlackBox) => "bop_elites_bb".into(),
                (a, _) => a.to_string(),
            })
    }

    /// Cells sharing a column are compared against each other.
    pub fn column(&self) -> String {
        let res: Vec<String> = self.resolution.iter().map(|r| r.to_string()).collect();
        format!("{}@{}", self.problem, res.join("x"))
    }

    pub fn problem_id(&self, seed: u64) -> String {
        self.problem.replace("{seed}", &seed.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub name: String,
    /// Relative paths are resolved under `$BOP_ELITES_OUT` when set.
    pub output_dir: PathBuf,
    /// Shared by every cell so that comparisons are paired.
    pub seeds: Vec<u64>,
    pub normalization: Normalization,
    /// Confidence level of the t-test between the two best rows per column.
    pub confidence: f64,
    pub workers: usize,
    pub cells: Vec<CellSpec>,
    /// Template for BOP-Elites runs; problem, resolution, budget, mode and
    /// seed come from the cell.
    pub bop: RunConfig,
    pub map_elites: MapElitesConfig,
    pub sail: SailConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            output_dir: PathBuf::from("results"),
            seeds: (0..5).collect(),
            normalization: Normalization::None,
            confidence: 0.99,
            workers: 1,
            cells: Vec::new(),
            bop: RunConfig::default(),
            map_elites: MapElitesConfig::default(),
            sail: SailConfig::default(),
        }
    }
}

impl ExperimentSpec {
    /// Parses TOML text after applying `path=value` overrides.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Toml(e.to_string()))?;
        let mut value = toml::Value::Table(table);
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let spec: ExperimentSpec = value
            .try_into()
            .map_err(|e: toml::de::Error| Error::Toml(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>, overrides: &[String]) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("no replication seeds".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::Config("confidence must lie in (0, 1)".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for c in &self.cells {
            if c.resolution.is_empty() || c.resolution.contains(&0) {
                return Err(Error::Config(format!("cell {}: bad resolution", c.label())));
            }
            problem_from_id(&c.problem_id(self.seeds[0]))?;
            if !seen.insert((c.column(), c.label())) {
                return Err(Error::Config(format!(
                    "duplicate row {} in column {}",
                    c.label(),
                    c.column()
                )));
            }
        }
        Ok(())
    }

    pub fn output_root(&self) -> PathBuf {
        resolve_output(&self.output_dir).join(&self.name)
    }

    /// Every (cell, seed) pair in execution order.
    pub fn jobs(&self) -> Vec<(usize, u64)> {
        (0..self.cells.len())
            .flat_map(|c| self.seeds.iter().map(move |&s| (c, s)))
            .collect()
    }
}

pub fn resolve_output(dir: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_ENV) {
        Some(root) if dir.is_relative() => PathBuf::from(root).join(dir),
        _ => dir.to_path_buf(),
    }
}

/// Everything persisted about one finished run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunArtifact {
    pub algorithm: Algorithm,
    pub label: String,
    pub column: String,
    /// Resolved problem id.
    pub problem: String,
    pub resolution: Vec<usize>,
    pub budget: usize,
    pub mode: DescriptorMode,
    pub seed: u64,
    pub qd_score: f64,
    pub filled: usize,
    pub wall_seconds: f64,
    /// Final probability cutoff of a BOP-Elites run.
    pub omega_final: Option<f64>,
    pub archive: Archive,
    pub trace: Vec<TraceRow>,
    pub models: Option<ModelSnapshot>,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn csv_bytes<F>(f: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<()>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    f(&mut w)?;
    w.into_inner()
        .map_err(|e| Error::Csv(e.into_error().into()))
}

impl RunArtifact {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&text)?)
    }

    /// Writes `artifact.json`, `trace.csv` and `archive.csv` into `dir`,
    /// each through a temporary file and rename.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_atomic(&dir.join("artifact.json"), &serde_json::to_vec(self)?)?;
        let trace = csv_bytes(|w| {
            w.write_record([
                "iteration",
                "valid",
                "region",
                "y",
                "qd_score",
                "acquisition",
                "omega",
                "alpha",
                "beta",
            ])?;
            for r in &self.trace {
                w.write_record([
                    r.iteration.to_string(),
                    r.valid.to_string(),
                    r.region.map_or(String::new(), |v| v.to_string()),
                    r.y.to_string(),
                    r.qd_score.to_string(),
                    r.acquisition.to_string(),
                    r.omega.to_string(),
                    r.alpha.to_string(),
                    r.beta.to_string(),
                ])?;
            }
            Ok(())
        })?;
        write_atomic(&dir.join("trace.csv"), &trace)?;
        let tmp = dir.join("archive.csv.tmp");
        self.archive.write_csv(&tmp)?;
        fs::rename(&tmp, dir.join("archive.csv")).map_err(|e| Error::io(dir, e))
    }

    /// QD score after each evaluation.
    pub fn qd_trace(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.qd_score).collect()
    }
}

/// Runs one cell for one seed.
pub fn execute(spec: &ExperimentSpec, cell: &CellSpec, seed: u64) -> Result<RunArtifact> {
    let id = cell.problem_id(seed);
    let problem = problem_from_id(&id)?;
    let problem = problem.as_ref();
    let grid = grid_for(problem, &cell.resolution)?;
    let started = Instant::now();
    let (archive, trace, models, omega_final) = match cell.algorithm {
        Algorithm::BopElites => {
            let config = RunConfig {
                problem: id.clone(),
                resolution: cell.resolution.clone(),
                budget: cell.budget,
                mode: cell.mode,
                seed,
                feasibility: cell.feasibility.unwrap_or(spec.bop.feasibility),
                ..spec.bop.clone()
            };
            let r = bop::run(problem, config)?;
            (r.archive, r.trace, Some(r.models), Some(r.state.omega))
        }
        algorithm => {
            let r = match algorithm {
                Algorithm::MapElites => {
                    map_elites_run(problem, &grid, cell.budget, &spec.map_elites, seed)?
                }
                Algorithm::Sobol => sobol_run(problem, &grid, cell.budget, seed)?,
                Algorithm::Sail => sail_run(problem, &grid, cell.budget, &spec.sail, seed)?,
                Algorithm::Sphen => sphen_run(problem, &grid, cell.budget, &spec.sail, seed)?,
                Algorithm::BopElites => unreachable!(),
            };
            (r.archive, r.trace, r.models, None)
        }
    };
    Ok(RunArtifact {
        algorithm: cell.algorithm,
        label: cell.label(),
        column: cell.column(),
        problem: id,
        resolution: cell.resolution.clone(),
        budget: cell.budget,
        mode: cell.mode,
        seed,
        qd_score: archive.qd_score(),
        filled: archive.filled(),
        wall_seconds: started.elapsed().as_secs_f64(),
        omega_final,
        archive,
        trace,
        models,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub column: String,
    pub label: String,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub column: String,
    pub algorithm: String,
    pub budget: usize,
    pub runs: usize,
    pub failed: usize,
    pub mean: f64,
    pub se: f64,
    pub normalized_mean: Option<f64>,
    pub normalized_se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRow {
    pub column: String,
    pub best: String,
    pub runner_up: String,
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub summary: Vec<SummaryRow>,
    pub tests: Vec<TestRow>,
    pub failures: Vec<RunFailure>,
}

impl Report {
    pub fn row(&self, column: &str, algorithm: &str) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|r| r.column == column && r.algorithm == algorithm)
    }
}

/// Per-seed scores divided by the best score on the same column and seed.
pub fn normalized_scores(artifacts: &[RunArtifact]) -> Vec<f64> {
    let mut best: BTreeMap<(&str, u64), f64> = BTreeMap::new();
    for a in artifacts {
        let e = best.entry((&a.column, a.seed)).or_insert(f64::NEG_INFINITY);
        *e = e.max(a.qd_score);
    }
    artifacts
        .iter()
        .map(|a| a.qd_score / best[&(a.column.as_str(), a.seed)])
        .collect()
}

/// Groups artifacts into rows by (column, label) in order of first
/// appearance and tests the two best rows of every column.
pub fn summarize(
    artifacts: &[RunArtifact],
    failures: &[RunFailure],
    normalization: Normalization,
    confidence: f64,
) -> Report {
    let normalized = normalized_scores(artifacts);
    let mut order: Vec<(String, String)> = Vec::new();
    let key_of = |c: &str, l: &str| (c.to_string(), l.to_string());
    for k in artifacts
        .iter()
        .map(|a| key_of(&a.column, &a.label))
        .chain(failures.iter().map(|f| key_of(&f.column, &f.label)))
    {
        if !order.contains(&k) {
            order.push(k);
        }
    }
    let mut summary = Vec::new();
    let mut samples: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for (column, label) in &order {
        let members: Vec<usize> = (0..artifacts.len())
            .filter(|&i| &artifacts[i].column == column && &artifacts[i].label == label)
            .collect();
        let scores: Vec<f64> = members.iter().map(|&i| artifacts[i].qd_score).collect();
        let norm: Vec<f64> = members.iter().map(|&i| normalized[i]).collect();
        let (mean, se) = mean_se(&scores);
        let (nm, nse) = mean_se(&norm);
        let normalized = normalization == Normalization::PerSeedBest && !members.is_empty();
        summary.push(SummaryRow {
            column: column.clone(),
            algorithm: label.clone(),
            budget: members.first().map_or(0, |&i| artifacts[i].budget),
            runs: members.len(),
            failed: failures
                .iter()
                .filter(|f| &f.column == column && &f.label == label)
                .count(),
            mean,
            se,
            normalized_mean: normalized.then_some(nm),
            normalized_se: normalized.then_some(nse),
        });
        samples.insert((column.clone(), label.clone()), scores);
    }

    let mut tests = Vec::new();
    let mut columns: Vec<&String> = Vec::new();
    for (c, _) in &order {
        if !columns.contains(&c) {
            columns.push(c);
        }
    }
    for column in columns {
        let mut rows: Vec<&SummaryRow> = summary
            .iter()
            .filter(|r| &r.column == column && r.runs > 0)
            .collect();
        rows.sort_by(|a, b| b.mean.total_cmp(&a.mean));
        if let [first, second, ..] = rows[..] {
            let a = &samples[&(column.clone(), first.algorithm.clone())];
            let b = &samples[&(column.clone(), second.algorithm.clone())];
            if let Some(w) = welch_t_test(a, b) {
                tests.push(TestRow {
                    column: column.clone(),
                    best: first.algorithm.clone(),
                    runner_up: second.algorithm.clone(),
                    t: w.t,
                    df: w.df,
                    p_value: w.p_value,
                    significant: w.significant(confidence),
                });
            }
        }
    }
    Report {
        summary,
        tests,
        failures: failures.to_vec(),
    }
}

fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn run_dir(root: &Path, column: &str, label: &str, seed: u64) -> PathBuf {
    root.join(file_safe(column))
        .join(file_safe(label))
        .join(format!("seed_{seed}"))
}

/// Writes `summary.csv`, `ttest.csv`, `failures.csv` and one
/// `convergence_<column>.csv` per column into `dir`.
pub fn write_report(dir: &Path, report: &Report, artifacts: &[RunArtifact]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    let summary = csv_bytes(|w| {
        w.write_record([
            "column",
            "algorithm",
            "budget",
            "runs",
            "failed",
            "mean",
            "se",
            "normalized_mean",
            "normalized_se",
        ])?;
        for r in &report.summary {
            w.write_record([
                r.column.clone(),
                r.algorithm.clone(),
                r.budget.to_string(),
                r.runs.to_string(),
                r.failed.to_string(),
                r.mean.to_string(),
                r.se.to_string(),
                opt(r.normalized_mean),
                opt(r.normalized_se),
            ])?;
        }
        Ok(())
    })?;
    write_atomic(&dir.join("summary.csv"), &summary)?;
    let tests = csv_bytes(|w| {
        w.write_record([
            "column",
            "best",
            "runner_up",
            "t",
            "df",
            "p_value",
            "significant",
        ])?;
        for t in &report.tests {
            w.write_record([
                t.column.clone(),
                t.best.clone(),
                t.runner_up.clone(),
                t.t.to_string(),
                t.df.to_string(),
                t.p_value.to_string(),
                t.significant.to_string(),
            ])?;
        }
        Ok(())
    })?;
    write_atomic(&dir.join("ttest.csv"), &tests)?;
    let failures = csv_bytes(|w| {
        w.write_record(["column", "algorithm", "seed", "message"])?;
        for f in &report.failures {
            w.write_record([
                f.column.clone(),
                f.label.clone(),
                f.seed.to_string(),
                f.message.clone(),
            ])?;
        }
        Ok(())
    })?;
    write_atomic(&dir.join("failures.csv"), &failures)?;

    let mut columns: Vec<&str> = Vec::new();
    for r in &report.summary {
        if !columns.contains(&r.column.as_str()) {
            columns.push(&r.column);
        }
    }
    for column in columns {
        let labels: Vec<&str> = report
            .summary
            .iter()
            .filter(|r| r.column == column && r.runs > 0)
            .map(|r| r.algorithm.as_str())
            .collect();
        let curves: Vec<Vec<(f64, f64)>> = labels
            .iter()
            .map(|l| {
                let traces: Vec<Vec<f64>> = artifacts
                    .iter()
                    .filter(|a| a.column == column && a.label == *l)
                    .map(RunArtifact::qd_trace)
                    .collect();
                convergence(&traces)
            })
            .collect();
        let len = curves.iter().map(Vec::len).max().unwrap_or(0);
        let bytes = csv_bytes(|w| {
            let mut header = vec!["evaluation".to_string()];
            for l in &labels {
                header.push(format!("{l}_mean"));
                header.push(format!("{l}_se"));
            }
            w.write_record(&header)?;
            for i in 0..len {
                let mut row = vec![(i + 1).to_string()];
                for c in &curves {
                    let (m, s) = c
                        .get(i)
                        .or(c.last())
                        .copied()
                        .unwrap_or((f64::NAN, f64::NAN));
                    row.push(m.to_string());
                    row.push(s.to_string());
                }
                w.write_record(&row)?;
            }
            Ok(())
        })?;
        write_atomic(
            &dir.join(format!("convergence_{}.csv", file_safe(column))),
            &bytes,
        )?;
    }
    Ok(())
}

/// Runs every cell and seed, saves artifacts and report files under the
/// spec's output root, and returns the report. Failed runs are logged,
/// listed in the report and left out of the statistics.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<(Report, Vec<RunArtifact>)> {
    spec.validate()?;
    let root = spec.output_root();
    fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
    write_atomic(
        &root.join("experiment.toml"),
        toml::to_string(spec)
            .map_err(|e| Error::Toml(e.to_string()))?
            .as_bytes(),
    )?;
    let jobs = spec.jobs();
    let work =
        |&(c, seed): &(usize, u64)| -> (usize, u64, std::result::Result<RunArtifact, String>) {
            let cell = &spec.cells[c];
            log::info!("start {} {} seed {seed}", cell.column(), cell.label());
            let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
                execute(spec, cell, seed)
            }))
            .map_err(|p| {
                p.downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panic".into())
            })
            .and_then(|r| r.map_err(|e| e.to_string()))
            .and_then(|a| {
                a.save(&run_dir(&root, &a.column, &a.label, seed))
                    .map(|_| a)
                    .map_err(|e| e.to_string())
            });
            match &outcome {
                Ok(a) => log::info!(
                    "done {} {} seed {seed}: qd {:.4}",
                    a.column,
                    a.label,
                    a.qd_score
                ),
                Err(e) => log::warn!("failed {} {} seed {seed}: {e}", cell.column(), cell.label()),
            }
            (c, seed, outcome)
        };
    let outcomes: Vec<_> = if spec.workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.workers)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        pool.install(|| jobs.par_iter().map(work).collect())
    } else {
        jobs.iter().map(work).collect()
    };
    let mut artifacts = Vec::new();
    let mut failures = Vec::new();
    for (c, seed, outcome) in outcomes {
        match outcome {
            Ok(a) => artifacts.push(a),
            Err(message) => failures.push(RunFailure {
                column: spec.cells[c].column(),
                label: spec.cells[c].label(),
                seed,
                message,
            }),
        }
    }
    let report = summarize(&artifacts, &failures, spec.normalization, spec.confidence);
    write_report(&root, &report, &artifacts)?;
    Ok((report, artifacts))
}

/// Every `artifact.json` below `dir`, in path order.
pub fn load_artifacts(dir: &Path) -> Result<Vec<RunArtifact>> {
    let mut paths = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).map_err(|e| Error::io(&d, e))? {
            let p = entry.map_err(|e| Error::io(&d, e))?.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n == "artifact.json") {
                paths.push(p);
            }
        }
    }
    paths.sort();
    paths.iter().map(RunArtifact::load).collect()
}

/// A prediction map together with where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmArtifact {
    pub problem: String,
    pub mode: DescriptorMode,
    pub seed: u64,
    pub predicted_qd_score: Option<f64>,
    pub pm: PredictionMap,
}

impl PmArtifact {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &serde_json::to_vec(self)?)
    }
}

/// Builds a prediction map from a run's models: on the run's own grid, or
/// upscaled to `resolution` (seeded with the run's history) when given.
/// Black-box cells below the run's final cutoff are flagged low-confidence.
pub fn pm_from_artifact(
    artifact: &RunArtifact,
    resolution: Option<&[usize]>,
    opts: &PmOptions,
) -> Result<PmArtifact> {
    let problem = problem_from_id(&artifact.problem)?;
    let problem = problem.as_ref();
    let models = artifact
        .models
        .as_ref()
        .ok_or_else(|| Error::Config("run artifact has no surrogate models".into()))?;
    let opts = PmOptions {
        low_confidence: artifact.omega_final.unwrap_or(opts.low_confidence),
        ..opts.clone()
    };
    let mode = if models.descriptors.is_empty() {
        DescriptorMode::WhiteBox
    } else {
        DescriptorMode::BlackBox
    };
    let pm =
        match resolution {
            Some(res) => upscale(
                problem,
                models,
                artifact.archive.history(),
                mode,
                &grid_for(problem, res)?,
                &opts,
            )?,
            None => {
                let grid = artifact.archive.grid();
                let objective =
                    GpModel::from_snapshot(models.objective.clone().ok_or_else(|| {
                        Error::Config("run artifact has no objective model".into())
                    })?)?;
                match mode {
                    DescriptorMode::WhiteBox => build_pm_whitebox(&objective, grid, problem, &opts),
                    DescriptorMode::BlackBox => {
                        let d = models
                            .descriptors
                            .iter()
                            .cloned()
                            .map(GpModel::from_snapshot)
                            .collect::<Result<Vec<_>>>()?;
                        let refs: Vec<&GpModel> = d.iter().collect();
                        build_pm_blackbox(&objective, &refs, grid, problem, &opts)
                    }
                }
            }
        };
    Ok(PmArtifact {
        problem: artifact.problem.clone(),
        mode,
        seed: artifact.seed,
        predicted_qd_score: None,
        pm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::archive::RegionGrid;
    use approx::assert_abs_diff_eq;

    fn fake(column: &str, label: &str, seed: u64, qd: f64) -> RunArtifact {
        RunArtifact {
            algorithm: Algorithm::Sobol,
            label: label.into(),
            column: column.into(),
            problem: "mishra".into(),
            resolution: vec![2],
            budget: 10,
            mode: DescriptorMode::WhiteBox,
            seed,
            qd_score: qd,
            filled: 0,
            wall_seconds: 0.0,
            omega_final: None,
            archive: Archive::new(RegionGrid::uniform(&[(0.0, 1.0)], 2).unwrap()),
            trace: Vec::new(),
            models: None,
        }
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.as_str().parse::<Algorithm>().unwrap(), a);
        }
        assert!("cma_me".parse::<Algorithm>().is_err());
    }

    #[test]
    fn per_seed_normalization() {
        let arts = vec![
            fake("c", "a", 0, 2.0),
            fake("c", "b", 0, 4.0),
            fake("c", "a", 1, 3.0),
            fake("c", "b", 1, 1.0),
        ];
        assert_eq!(normalized_scores(&arts), vec![0.5, 1.0, 1.0, 1.0 / 3.0]);
        let r = summarize(&arts, &[], Normalization::PerSeedBest, 0.99);
        assert_eq!(r.summary.len(), 2);
        assert_abs_diff_eq!(r.row("c", "a").unwrap().normalized_mean.unwrap(), 0.75);
        for row in &r.summary {
            let m = row.normalized_mean.unwrap();
            assert!(m > 0.0 && m <= 1.0);
        }
    }

    #[test]
    fn failures_are_counted_not_aggregated() {
        let arts = vec![fake("c", "a", 0, 2.0), fake("c", "a", 2, 4.0)];
        let fail = RunFailure {
            column: "c".into(),
            label: "a".into(),
            seed: 1,
            message: "boom".into(),
        };
        let r = summarize(&arts, &[fail], Normalization::None, 0.99);
        let row = r.row("c", "a").unwrap();
        assert_eq!((row.runs, row.failed), (2, 1));
        assert_abs_diff_eq!(row.mean, 3.0);
        assert!(row.normalized_mean.is_none());
    }

    #[test]
    fn top_two_rows_are_tested() {
        let mut arts = Vec::new();
        for s in 0..5 {
            arts.push(fake("c", "low", s, 1.0 + 0.01 * s as f64));
            arts.push(fake("c", "mid", s, 5.0 + 0.01 * s as f64));
            arts.push(fake("c", "high", s, 9.0 + 0.01 * s as f64));
        }
        let r = summarize(&arts, &[], Normalization::None, 0.99);
        assert_eq!(r.tests.len(), 1);
        let t = &r.tests[0];
        assert_eq!((t.best.as_str(), t.runner_up.as_str()), ("high", "mid"));
        assert!(t.significant);
    }

    #[test]
    fn spec_parses_with_overrides() {
        let text = r#"
name = "demo"
seeds = [1, 2]
[[cells]]
algorithm = "map_elites"
problem = "mishra"
resolution = [5]
budget = 100
[[cells]]
algorithm = "bop_elites"
problem = "synthetic_gp:{seed}"
resolution = [10]
budget = 200
mode = "black_box"
"#;
        let spec = ExperimentSpec::from_toml(
            text,
            &[
                "cells.1.budget=300".into(),
                "bop.optimizer.restarts=3".into(),
            ],
        )
        .unwrap();
        assert_eq!(spec.cells[1].budget, 300);
        assert_eq!(spec.bop.optimizer.restarts, 3);
        assert_eq!(spec.cells[1].label(), "bop_elites_bb");
        assert_eq!(spec.cells[1].problem_id(2), "synthetic_gp:2");
        assert_eq!(spec.jobs().len(), 4);
        assert!(ExperimentSpec::from_toml(text, &["cells.0.algorithm=\"cma\"".into()]).is_err());
        assert!(ExperimentSpec::from_toml(text, &["seeds=[]".into()]).is_err());
    }

    #[test]
    fn duplicate_rows_are_rejected() {
        let text = r#"
[[cells]]
algorithm = "sobol"
problem = "mishra"
resolution = [5]
budget = 10
[[cells]]
algorithm = "sobol"
problem = "mishra"
resolution = [5]
budget = 20
"#;
        assert!(ExperimentSpec::from_toml(text, &[]).is_err());
    }
}
