use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Uniform partitioning of a box in descriptor space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionGrid {
    lower: Vec<f64>,
    upper: Vec<f64>,
    partitions: Vec<usize>,
}

impl RegionGrid {
    pub fn new(bounds: &[(f64, f64)], partitions: &[usize]) -> Result<Self> {
        if bounds.is_empty() || bounds.len() != partitions.len() {
            return Err(Error::Config(format!(
                "grid needs one partition count per descriptor ({} bounds, {} counts)",
                bounds.len(),
                partitions.len()
            )));
        }
        for &(lo, hi) in bounds {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Config(format!("bad descriptor bounds [{lo}, {hi}]")));
            }
        }
        if partitions.contains(&0) {
            return Err(Error::Config("partition counts must be positive".into()));
        }
        Ok(Self {
            lower: bounds.iter().map(|b| b.0).collect(),
            upper: bounds.iter().map(|b| b.1).collect(),
            partitions: partitions.to_vec(),
        })
    }

    /// Same bounds, `n` partitions in every dimension.
    pub fn uniform(bounds: &[(f64, f64)], n: usize) -> Result<Self> {
        Self::new(bounds, &vec![n; bounds.len()])
    }

    pub fn dim(&self) -> usize {
        self.partitions.len()
    }

    pub fn partitions(&self) -> &[usize] {
        &self.partitions
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.lower
            .iter()
            .copied()
            .zip(self.upper.iter().copied())
            .collect()
    }

    pub fn region_count(&self) -> usize {
        self.partitions.iter().product()
    }

    pub fn cell_width(&self, dim: usize) -> f64 {
        (self.upper[dim] - self.lower[dim]) / self.partitions[dim] as f64
    }

    /// Partition of one descriptor value along `dim`. Interior boundaries
    /// belong to the upper partition and the global upper bound to the last.
    pub fn partition_index(&self, dim: usize, value: f64) -> Option<usize> {
        let (lo, hi, n) = (self.lower[dim], self.upper[dim], self.partitions[dim]);
        if !(value >= lo && value <= hi) {
            return None;
        }
        let mut k = ((value - lo) / (hi - lo) * n as f64).floor() as usize;
        k = k.min(n - 1);
        // Guard against rounding in the division putting a value one cell off.
        while k > 0 && value < self.partition_bounds(dim, k).0 {
            k -= 1;
        }
        while k + 1 < n && value >= self.partition_bounds(dim, k + 1).0 {
            k += 1;
        }
        Some(k)
    }

    /// `[lb, ub]` of partition `k` along `dim`.
    pub fn partition_bounds(&self, dim: usize, k: usize) -> (f64, f64) {
        let (lo, hi, n) = (
            self.lower[dim],
            self.upper[dim],
            self.partitions[dim] as f64,
        );
        let lb = lo + (hi - lo) * k as f64 / n;
        let ub = if k + 1 == self.partitions[dim] {
            hi
        } else {
            lo + (hi - lo) * (k + 1) as f64 / n
        };
        (lb, ub)
    }

    pub fn multi_index(&self, b: &[f64]) -> Option<Vec<usize>> {
        if b.len() != self.dim() {
            return None;
        }
        b.iter()
            .enumerate()
            .map(|(i, &v)| self.partition_index(i, v))
            .collect()
    }

    /// Flat region id, or `None` when `b` is out of bounds.
    pub fn region_index(&self, b: &[f64]) -> Option<usize> {
        self.multi_index(b).map(|m| self.flat_index(&m))
    }

    /// Row-major flattening with the first descriptor varying slowest.
    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.partitions)
            .fold(0, |acc, (&k, &n)| acc * n + k)
    }

    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for i in (0..self.dim()).rev() {
            out[i] = flat % self.partitions[i];
            flat /= self.partitions[i];
        }
        out
    }

    pub fn cell_bounds(&self, flat: usize) -> Vec<(f64, f64)> {
        self.unflatten(flat)
            .iter()
            .enumerate()
            .map(|(i, &k)| self.partition_bounds(i, k))
            .collect()
    }

    pub fn cell_center(&self, flat: usize) -> Vec<f64> {
        self.cell_bounds(flat)
            .iter()
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }
}

/// One true-function evaluation. `x` is in the problem's native coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub x: Vec<f64>,
    pub y: f64,
    pub b: Vec<f64>,
    pub valid: bool,
}

impl Observation {
    pub fn valid(x: Vec<f64>, y: f64, b: Vec<f64>) -> Self {
        Self {
            x,
            y,
            b,
            valid: true,
        }
    }

    pub fn invalid(x: Vec<f64>) -> Self {
        Self {
            x,
            y: f64::NAN,
            b: Vec::new(),
            valid: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Elite {
    pub obs: Observation,
    /// Position of the observation in the archive history.
    pub iteration: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Archive {
    grid: RegionGrid,
    elites: Vec<Option<Elite>>,
    history: Vec<Observation>,
    qd_score: f64,
}

impl Archive {
    pub fn new(grid: RegionGrid) -> Self {
        let n = grid.region_count();
        Self {
            grid,
            elites: vec![None; n],
            history: Vec::new(),
            qd_score: 0.0,
        }
    }

    pub fn grid(&self) -> &RegionGrid {
        &self.grid
    }

    pub fn history(&self) -> &[Observation] {
        &self.history
    }

    pub fn elites(&self) -> &[Option<Elite>] {
        &self.elites
    }

    pub fn elite(&self, region: usize) -> Option<&Elite> {
        self.elites[region].as_ref()
    }

    /// Incumbent value of a region; empty regions count as zero.
    pub fn elite_value(&self, region: usize) -> f64 {
        self.elites[region].as_ref().map_or(0.0, |e| e.obs.y)
    }

    pub fn elite_values(&self) -> Vec<f64> {
        (0..self.elites.len())
            .map(|r| self.elite_value(r))
            .collect()
    }

    pub fn filled(&self) -> usize {
        self.elites.iter().filter(|e| e.is_some()).count()
    }

    pub fn qd_score(&self) -> f64 {
        self.qd_score
    }

    /// Records the observation and archives it when it beats its region's
    /// elite. Invalid or out-of-bounds observations are only recorded.
    pub fn offer(&mut self, obs: Observation) -> bool {
        let iteration = self.history.len();
        self.history.push(obs.clone());
        if !obs.valid || !obs.y.is_finite() {
            return false;
        }
        let Some(region) = self.grid.region_index(&obs.b) else {
            return false;
        };
        let old = self.elites[region].as_ref().map(|e| e.obs.y);
        if old.is_some_and(|v| obs.y <= v) {
            return false;
        }
        self.qd_score += obs.y - old.unwrap_or(0.0);
        self.elites[region] = Some(Elite { obs, iteration });
        true
    }

    /// Moves all history into a fresh archive over `grid`, in original order.
    pub fn regrid(&self, grid: RegionGrid) -> Archive {
        let mut a = Archive::new(grid);
        for o in &self.history {
            a.offer(o.clone());
        }
        a
    }

    pub fn write_csv(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        let (xd, bd) = self
            .elites
            .iter()
            .flatten()
            .next()
            .map_or((0, 0), |e| (e.obs.x.len(), e.obs.b.len()));
        let mut header = vec![
            "region_flat_index".to_string(),
            "region_multi_index".to_string(),
        ];
        header.extend((0..xd).map(|i| format!("x{i}")));
        header.push("y".into());
        header.extend((0..bd).map(|i| format!("b{i}")));
        header.push("iteration_found".into());
        w.write_record(&header)?;
        for (r, e) in self.elites.iter().enumerate() {
            let Some(e) = e else { continue };
            let multi = self
                .grid
                .unflatten(r)
                .iter()
                .map(|k| k.to_string())
                .collect::<Vec<_>>()
                .join(":");
            let mut row = vec![r.to_string(), multi];
            row.extend(e.obs.x.iter().map(|v| v.to_string()));
            row.push(e.obs.y.to_string());
            row.extend(e.obs.b.iter().map(|v| v.to_string()));
            row.push(e.iteration.to_string());
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}
