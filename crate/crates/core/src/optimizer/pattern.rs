//! Coordinate-poll direct search on the unit box.
//!
//! Each generation polls `x ± step·e_i` for every axis, moves to the best
//! strictly improving poll and otherwise contracts the step. Polls are
//! clamped to `[0, 1]^d`. The batch variant runs several independent
//! searches in lockstep so a single surrogate call can serve all of them;
//! its results are identical to running each search on its own.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PatternSearchConfig {
    pub initial_step: f64,
    pub contraction: f64,
    pub max_generations: usize,
    pub max_evals_per_generation: usize,
    pub min_step: f64,
}

impl Default for PatternSearchConfig {
    fn default() -> Self {
        Self {
            initial_step: 0.1,
            contraction: 0.5,
            max_generations: 100,
            max_evals_per_generation: 1500,
            min_step: 1e-5,
        }
    }
}

impl PatternSearchConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let ok = self.initial_step > 0.0
            && self.contraction > 0.0
            && self.contraction < 1.0
            && self.min_step > 0.0
            && self.max_generations > 0
            && self.max_generations <= 100
            && self.max_evals_per_generation > 0
            && self.max_evals_per_generation <= 1500;
        if ok {
            Ok(())
        } else {
            Err(crate::Error::Config(format!(
                "pattern search config out of range: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub generations: usize,
    pub evaluations: usize,
    /// Incumbent value after every generation; non-decreasing.
    pub history: Vec<f64>,
}

struct SearchState {
    x: Vec<f64>,
    value: f64,
    step: f64,
    generations: usize,
    evaluations: usize,
    history: Vec<f64>,
    done: bool,
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

fn polls(x: &[f64], step: f64, cap: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * x.len());
    for i in 0..x.len() {
        for sign in [1.0, -1.0] {
            let moved = (x[i] + sign * step).clamp(0.0, 1.0);
            if moved != x[i] {
                let mut p = x.to_vec();
                p[i] = moved;
                out.push(p);
            }
        }
    }
    out.truncate(cap);
    out
}

/// Maximizes `f` from `start`; never returns a value below `f(start)`.
pub fn pattern_search<F>(mut f: F, start: &[f64], config: &PatternSearchConfig) -> SearchResult
where
    F: FnMut(&[f64]) -> f64,
{
    let mut out = pattern_search_batch(
        |pts: &[Vec<f64>]| pts.iter().map(|p| f(p)).collect(),
        std::slice::from_ref(&start.to_vec()),
        config,
    );
    out.pop().expect("one start yields one result")
}

/// Runs one search per start in lockstep, calling `f` once per generation
/// with every pending poll point.
pub fn pattern_search_batch<F>(
    mut f: F,
    starts: &[Vec<f64>],
    config: &PatternSearchConfig,
) -> Vec<SearchResult>
where
    F: FnMut(&[Vec<f64>]) -> Vec<f64>,
{
    if starts.is_empty() {
        return Vec::new();
    }
    let clamped: Vec<Vec<f64>> = starts
        .iter()
        .map(|s| s.iter().map(|v| v.clamp(0.0, 1.0)).collect())
        .collect();
    let initial = f(&clamped);
    let mut states: Vec<SearchState> = clamped
        .into_iter()
        .zip(initial)
        .map(|(x, v)| SearchState {
            x,
            value: sanitize(v),
            step: config.initial_step,
            generations: 0,
            evaluations: 1,
            history: Vec::new(),
            done: false,
        })
        .collect();

    loop {
        let mut batch = Vec::new();
        let mut owners = Vec::new();
        for (k, s) in states.iter_mut().enumerate() {
            if s.done {
                continue;
            }
            let p = polls(&s.x, s.step, config.max_evals_per_generation);
            if p.is_empty() {
                // Degenerate box: nothing to poll, shrink instead.
                s.step *= config.contraction;
                s.generations += 1;
                s.history.push(s.value);
                if s.step < config.min_step || s.generations >= config.max_generations {
                    s.done = true;
                }
                continue;
            }
            owners.push((k, batch.len(), p.len()));
            batch.extend(p);
        }
        if owners.is_empty() {
            if states.iter().all(|s| s.done) {
                break;
            }
            continue;
        }
        let values = f(&batch);
        for &(k, offset, len) in &owners {
            let s = &mut states[k];
            s.evaluations += len;
            let mut best: Option<(usize, f64)> = None;
            for (j, &v) in values[offset..offset + len].iter().enumerate() {
                let v = sanitize(v);
                if best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((j, v));
                }
            }
            match best {
                Some((j, v)) if v > s.value => {
                    s.x = batch[offset + j].clone();
                    s.value = v;
                }
                _ => s.step *= config.contraction,
            }
            s.generations += 1;
            s.history.push(s.value);
            if s.step < config.min_step || s.generations >= config.max_generations {
                s.done = true;
            }
        }
    }

    states
        .into_iter()
        .map(|s| SearchResult {
            x: s.x,
            value: s.value,
            generations: s.generations,
            evaluations: s.evaluations,
            history: s.history,
        })
        .collect()
}
