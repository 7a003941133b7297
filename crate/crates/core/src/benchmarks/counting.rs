use std::sync::atomic::{AtomicUsize, Ordering};

use super::Problem;
use crate::archive::Observation;

/// Wraps a problem and counts calls into it.
pub struct Counted<'a> {
    inner: &'a dyn Problem,
    evaluations: AtomicUsize,
    objective_calls: AtomicUsize,
    descriptor_calls: AtomicUsize,
}

impl<'a> Counted<'a> {
    pub fn new(inner: &'a dyn Problem) -> Self {
        Self {
            inner,
            evaluations: AtomicUsize::new(0),
            objective_calls: AtomicUsize::new(0),
            descriptor_calls: AtomicUsize::new(0),
        }
    }

    /// Full evaluations through `evaluate`.
    pub fn evaluations(&self) -> usize {
        self.evaluations.load(Ordering::Relaxed)
    }

    /// Objective calls, including those made by `evaluate`.
    pub fn objective_calls(&self) -> usize {
        self.objective_calls.load(Ordering::Relaxed)
    }

    /// Direct descriptor calls, excluding those made by `evaluate`.
    pub fn descriptor_calls(&self) -> usize {
        self.descriptor_calls.load(Ordering::Relaxed)
    }
}

impl Problem for Counted<'_> {
    fn name(&self) -> String {
        self.inner.name()
    }

    fn input_bounds(&self) -> Vec<(f64, f64)> {
        self.inner.input_bounds()
    }

    fn descriptor_bounds(&self) -> Vec<(f64, f64)> {
        self.inner.descriptor_bounds()
    }

    fn objective(&self, x: &[f64]) -> f64 {
        self.objective_calls.fetch_add(1, Ordering::Relaxed);
        self.inner.objective(x)
    }

    fn descriptors(&self, x: &[f64]) -> Vec<f64> {
        self.descriptor_calls.fetch_add(1, Ordering::Relaxed);
        self.inner.descriptors(x)
    }

    fn is_valid(&self, x: &[f64]) -> bool {
        self.inner.is_valid(x)
    }

    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    fn descriptor_dim(&self) -> usize {
        self.inner.descriptor_dim()
    }

    fn evaluate(&self, x: &[f64]) -> Observation {
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        self.objective_calls.fetch_add(1, Ordering::Relaxed);
        self.inner.evaluate(x)
    }
}
