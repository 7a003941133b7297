use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// MAP-Elites map over unit-cube inputs with an arbitrary fitness.
#[derive(Debug, Clone)]
pub struct UnitMap {
    pub cells: Vec<Option<(Vec<f64>, f64)>>,
}

impl UnitMap {
    pub fn new(region_count: usize) -> Self {
        Self {
            cells: vec![None; region_count],
        }
    }

    /// Keeps `x` if its cell is empty or it strictly improves the cell.
    pub fn insert(&mut self, x: Vec<f64>, fitness: f64, region: Option<usize>) -> bool {
        let Some(r) = region else { return false };
        if !fitness.is_finite() {
            return false;
        }
        match &self.cells[r] {
            Some((_, f)) if fitness <= *f => false,
            _ => {
                self.cells[r] = Some((x, fitness));
                true
            }
        }
    }

    pub fn filled(&self) -> Vec<usize> {
        (0..self.cells.len())
            .filter(|&r| self.cells[r].is_some())
            .collect()
    }

    /// Uniformly chosen filled cell.
    pub fn random_filled(&self, rng: &mut ChaCha8Rng) -> Option<usize> {
        let filled = self.filled();
        (!filled.is_empty()).then(|| filled[rng.random_range(0..filled.len())])
    }

    /// Children from uniformly chosen parents with Gaussian mutation, clamped
    /// to the unit cube.
    pub fn offspring(&self, count: usize, sigma: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let filled = self.filled();
        if filled.is_empty() {
            return Vec::new();
        }
        let noise = Normal::new(0.0, sigma.max(0.0)).expect("finite sigma");
        (0..count)
            .map(|_| {
                let parent = filled[rng.random_range(0..filled.len())];
                let (x, _) = self.cells[parent].as_ref().expect("filled");
                x.iter()
                    .map(|&v| (v + noise.sample(rng)).clamp(0.0, 1.0))
                    .collect()
            })
            .collect()
    }
}

/// Batch fitness: returns `(fitness, region)` per point.
pub trait Fitness {
    fn assess(&mut self, xs: &[Vec<f64>]) -> Vec<(f64, Option<usize>)>;
}

impl<F: FnMut(&[Vec<f64>]) -> Vec<(f64, Option<usize>)>> Fitness for F {
    fn assess(&mut self, xs: &[Vec<f64>]) -> Vec<(f64, Option<usize>)> {
        self(xs)
    }
}

/// Surrogate MAP-Elites: seeds the map with `seeds`, then runs
/// `generations` generations of `children` offspring each.
pub fn illuminate(
    map: &mut UnitMap,
    fitness: &mut dyn Fitness,
    seeds: &[Vec<f64>],
    generations: usize,
    children: usize,
    sigma: f64,
    rng: &mut ChaCha8Rng,
) {
    if !seeds.is_empty() {
        for (x, (f, r)) in seeds.iter().zip(fitness.assess(seeds)) {
            map.insert(x.clone(), f, r);
        }
    }
    for _ in 0..generations {
        let kids = map.offspring(children, sigma, rng);
        if kids.is_empty() {
            break;
        }
        let scores = fitness.assess(&kids);
        for (x, (f, r)) in kids.into_iter().zip(scores) {
            map.insert(x, f, r);
        }
    }
}
