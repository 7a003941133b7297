pub mod pattern;
mod propose;

pub use pattern::{pattern_search, pattern_search_batch, PatternSearchConfig, SearchResult};
pub use propose::{propose_next, select_restarts, OptimizerConfig, Presample, Proposal};
