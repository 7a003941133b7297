use serde::{Deserialize, Serialize};

/// Cutoff schedule for region probabilities. `t` counts evaluations and
/// starts at `10 d`, which makes the initial cutoff `1 / |R|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionState {
    pub omega: f64,
    /// Mis-specification count.
    pub alpha_count: u64,
    /// Over-specificity count.
    pub beta_count: u64,
    pub t: u64,
    pub init_budget: u64,
    pub region_count: usize,
}

impl AcquisitionState {
    pub fn new(region_count: usize, input_dim: usize) -> Self {
        let init_budget = 10 * input_dim as u64;
        let mut s = Self {
            omega: 0.0,
            alpha_count: 0,
            beta_count: 0,
            t: init_budget,
            init_budget,
            region_count,
        };
        s.update_omega();
        s
    }

    pub fn gamma(&self) -> f64 {
        let denom =
            (self.alpha_count as f64 - 2.0 * self.beta_count as f64 + self.t as f64).max(1.0);
        (self.init_budget as f64 / denom).sqrt()
    }

    pub fn update_omega(&mut self) -> f64 {
        let r = self.region_count.max(1) as f64;
        self.omega = (0.5 * (2.0 / r).powf(self.gamma())).min(0.5);
        self.omega
    }

    pub fn record_evaluation(&mut self) {
        self.t += 1;
        self.update_omega();
    }

    pub fn record_misattribution(&mut self) {
        self.alpha_count += 1;
        self.update_omega();
    }

    pub fn record_no_value(&mut self) {
        self.beta_count += 1;
        self.update_omega();
    }
}
