//! Test problems and the registry that builds them from string ids.

mod analytic;
mod counting;
mod synthetic;

use std::sync::Arc;

pub use analytic::{
    invalid_disk_valid, mishra, robot_arm, rosenbrock6, InvalidDisk, Mishra, RobotArm, Rosenbrock6,
    MISHRA_SHIFT,
};
pub use counting::Counted;
pub use synthetic::{SyntheticGp, SyntheticGpSpec, SYNTHETIC_ANCHORS, SYNTHETIC_DIM};

use crate::archive::Observation;
use crate::{Error, Result};

/// A quality-diversity problem over a box domain. Inputs are given in native
/// coordinates; `to_unit`/`from_unit` map to and from `[0,1]^d`.
pub trait Problem: Send + Sync {
    fn name(&self) -> String;
    fn input_bounds(&self) -> Vec<(f64, f64)>;
    fn descriptor_bounds(&self) -> Vec<(f64, f64)>;
    fn objective(&self, x: &[f64]) -> f64;
    fn descriptors(&self, x: &[f64]) -> Vec<f64>;

    fn is_valid(&self, _x: &[f64]) -> bool {
        true
    }

    fn input_dim(&self) -> usize {
        self.input_bounds().len()
    }

    fn descriptor_dim(&self) -> usize {
        self.descriptor_bounds().len()
    }

    /// One full evaluation. Non-finite outputs are recorded as invalid.
    fn evaluate(&self, x: &[f64]) -> Observation {
        if !self.is_valid(x) {
            return Observation::invalid(x.to_vec());
        }
        let y = self.objective(x);
        let b = self.descriptors(x);
        if y.is_finite() && b.iter().all(|v| v.is_finite()) {
            Observation::valid(x.to_vec(), y, b)
        } else {
            Observation::invalid(x.to_vec())
        }
    }

    fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.input_bounds())
            .map(|(&v, (lo, hi))| ((v - lo) / (hi - lo)).clamp(0.0, 1.0))
            .collect()
    }

    fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.input_bounds())
            .map(|(&v, (lo, hi))| lo + v.clamp(0.0, 1.0) * (hi - lo))
            .collect()
    }
}

/// Builds a problem from an id: `mishra`, `robot_arm`, `rosenbrock6`,
/// `invalid_disk`, or `synthetic_gp:<seed>:<descriptors>`.
pub fn problem_from_id(id: &str) -> Result<Arc<dyn Problem>> {
    let mut parts = id.split(':');
    let head = parts.next().unwrap_or_default();
    let rest: Vec<&str> = parts.collect();
    let problem: Arc<dyn Problem> = match (head, rest.as_slice()) {
        ("mishra", []) => Arc::new(Mishra),
        ("robot_arm", []) => Arc::new(RobotArm::default()),
        ("rosenbrock6", []) => Arc::new(Rosenbrock6),
        ("invalid_disk", []) => Arc::new(InvalidDisk),
        ("synthetic_gp", args) if args.len() <= 2 => {
            let num = |s: Option<&&str>, default: u64| -> Result<u64> {
                s.map_or(Ok(default), |v| {
                    v.parse().map_err(|_| Error::UnknownProblem(id.to_string()))
                })
            };
            let seed = num(args.first(), 0)?;
            let k = num(args.get(1), 1)? as usize;
            if k == 0 {
                return Err(Error::UnknownProblem(id.to_string()));
            }
            Arc::new(SyntheticGp::new(SyntheticGpSpec::new(seed, k)))
        }
        _ => return Err(Error::UnknownProblem(id.to_string())),
    };
    Ok(problem)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_knows_every_problem() {
        for (id, d, m) in [
            ("mishra", 2, 2),
            ("robot_arm", 4, 2),
            ("rosenbrock6", 6, 2),
            ("invalid_disk", 2, 2),
            ("synthetic_gp:3:2", 10, 2),
            ("synthetic_gp", 10, 1),
        ] {
            let p = problem_from_id(id).unwrap();
            assert_eq!(p.input_dim(), d, "{id}");
            assert_eq!(p.descriptor_dim(), m, "{id}");
        }
        assert!(problem_from_id("branin").is_err());
        assert!(problem_from_id("synthetic_gp:x").is_err());
        assert!(problem_from_id("mishra:1").is_err());
    }

    #[test]
    fn unit_mapping_round_trips() {
        let p = Mishra;
        let x = vec![-3.0, -2.0];
        let u = p.to_unit(&x);
        assert!((u[0] - 0.7).abs() < 1e-12);
        let back = p.from_unit(&u);
        assert!((back[0] + 3.0).abs() < 1e-12 && (back[1] + 2.0).abs() < 1e-12);
    }
}
