//! Quality-diversity Bayesian optimisation with BOP-Elites.

pub mod acquisition;
pub mod archive;
pub mod baselines;
pub mod benchmarks;
pub mod bop;
pub mod error;
pub mod gp;
pub mod harness;
pub mod optimizer;
pub mod prediction;
pub mod sobol;

pub use error::{Error, Result};
