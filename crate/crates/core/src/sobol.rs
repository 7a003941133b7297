//! Scrambled Sobol point sets on the unit hypercube.
//!
//! Thin wrapper over `sobol_burley`. That crate caps a single sequence at
//! 2^16 points, so longer sets hop to a fresh Owen scramble every 2^16
//! points; each block is still a full stratified Sobol set.

const BLOCK: usize = 1 << 16;
const MAX_DIMS_PER_SEED: usize = 256;

/// Point `index` of a `dim`-dimensional scrambled Sobol sequence.
pub fn sobol_point(index: usize, dim: usize, seed: u32) -> Vec<f64> {
    let block = (index / BLOCK) as u32;
    let i = (index % BLOCK) as u32;
    (0..dim)
        .map(|d| {
            let pad = (d / MAX_DIMS_PER_SEED) as u32;
            let s = seed
                .wrapping_mul(0x9E37_79B9)
                .wrapping_add(block.wrapping_mul(0x85EB_CA6B))
                .wrapping_add(pad.wrapping_mul(0xC2B2_AE35));
            sobol_burley::sample(i, (d % MAX_DIMS_PER_SEED) as u32, s) as f64
        })
        .collect()
}

/// The first `count` points of a scrambled Sobol sequence.
pub fn sobol_points(count: usize, dim: usize, seed: u32) -> Vec<Vec<f64>> {
    (0..count).map(|i| sobol_point(i, dim, seed)).collect()
}
