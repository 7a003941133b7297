use super::{ei_known_region, ei_region, ejie_plus, ejie_plus_plus, AcqValue, FeasibilityModel};
use crate::archive::RegionGrid;
use crate::gp::{GpModel, Posterior};

/// How candidate points are assigned to regions.
#[derive(Clone, Copy)]
pub enum RegionSource<'a> {
    /// True region of a unit-cube point, from cheap descriptor functions.
    WhiteBox(&'a (dyn Fn(&[f64]) -> Option<usize> + Sync)),
    /// One surrogate per descriptor dimension.
    BlackBox(&'a [&'a GpModel]),
}

/// Everything needed to score candidate points in the unit cube.
#[derive(Clone, Copy)]
pub struct AcquisitionContext<'a> {
    pub objective: &'a GpModel,
    pub regions: RegionSource<'a>,
    pub grid: &'a RegionGrid,
    /// Incumbent per region, `None` when empty.
    pub elites: &'a [Option<f64>],
    pub omega: f64,
    pub feasibility: Option<&'a FeasibilityModel>,
}

/// Full and restart-selection scores of one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredPoint {
    pub acq: AcqValue,
    /// EI against the elite of the point's predicted region.
    pub cheap: f64,
    pub predicted_region: Option<usize>,
    pub objective: Posterior,
}

impl AcquisitionContext<'_> {
    fn p_valid(&self, x: &[f64]) -> Option<f64> {
        self.feasibility.and_then(|f| f.p_valid(x))
    }

    fn descriptor_posteriors(&self, xs: &[Vec<f64>]) -> Option<Vec<Vec<Posterior>>> {
        match self.regions {
            RegionSource::WhiteBox(_) => None,
            RegionSource::BlackBox(models) => {
                let per_dim: Vec<Vec<Posterior>> =
                    models.iter().map(|g| g.predict_batch(xs)).collect();
                Some(
                    (0..xs.len())
                        .map(|j| per_dim.iter().map(|d| d[j]).collect())
                        .collect(),
                )
            }
        }
    }

    /// EJIE⁺⁺ (black-box) or EI of the true region (white-box) at each point.
    pub fn evaluate(&self, xs: &[Vec<f64>]) -> Vec<AcqValue> {
        self.score(xs).into_iter().map(|s| s.acq).collect()
    }

    pub fn score(&self, xs: &[Vec<f64>]) -> Vec<ScoredPoint> {
        let objective = self.objective.predict_batch(xs);
        let descriptors = self.descriptor_posteriors(xs);
        xs.iter()
            .enumerate()
            .map(|(j, x)| {
                let o = objective[j];
                let (acq, region) = match (&self.regions, &descriptors) {
                    (RegionSource::WhiteBox(f), _) => {
                        let r = f(x);
                        (ei_known_region(o, r, self.elites), r)
                    }
                    (RegionSource::BlackBox(_), Some(d)) => {
                        let means: Vec<f64> = d[j].iter().map(|p| p.mean).collect();
                        (
                            ejie_plus(o, &d[j], self.grid, self.elites, self.omega),
                            self.grid.region_index(&means),
                        )
                    }
                    (RegionSource::BlackBox(_), None) => {
                        unreachable!("black-box posteriors computed above")
                    }
                };
                let pv = self.p_valid(x);
                let cheap =
                    region.map_or(0.0, |r| ei_region(o, self.elites[r])) * pv.unwrap_or(1.0);
                ScoredPoint {
                    acq: ejie_plus_plus(acq, pv),
                    cheap,
                    predicted_region: region,
                    objective: o,
                }
            })
            .collect()
    }
}
