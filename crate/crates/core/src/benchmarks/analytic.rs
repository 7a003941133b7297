use std::f64::consts::PI;

use super::Problem;

/// Constant added to the Mishra objective in the registered problems so that
/// elite values are positive and empty regions (scored as zero) are worse
/// than any filled one.
pub const MISHRA_SHIFT: f64 = 107.2;

/// Mishra's bird function and its descriptors `(-x1, -x2)`.
pub fn mishra(x1: f64, x2: f64) -> (f64, [f64; 2]) {
    let y = x2.sin() * (1.0 - x1.cos()).powi(2).exp()
        + x1.cos() * (1.0 - x2.sin()).powi(2).exp()
        + (x1 - x2).powi(2);
    (y, [-x1, -x2])
}

/// Planar arm with `x.len()` joints; returns `(y, [B1, B2])`.
pub fn robot_arm(x: &[f64]) -> (f64, [f64; 2]) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let (mut angle, mut s, mut c) = (0.0, 0.0, 0.0);
    for &xi in x {
        angle += 2.0 * PI * xi - PI;
        s += angle.sin();
        c += angle.cos();
    }
    (1.0 - var.sqrt(), [s / (2.0 * n) + 0.5, c / (2.0 * n) + 0.5])
}

/// Six-dimensional Rosenbrock variant with `b = ((x1+x2)/2, (x3-1)^2)`.
pub fn rosenbrock6(x: &[f64]) -> (f64, [f64; 2]) {
    let y = (0..3)
        .map(|p| {
            let (a, b) = (x[2 * p], x[2 * p + 1]);
            100.0 * ((2.0 * a - 2.0 * b * b).powi(2) + (1.0 - 2.0 * b * b))
        })
        .sum();
    (y, [0.5 * (x[0] + x[1]), (x[2] - 1.0).powi(2)])
}

pub fn invalid_disk_valid(u: &[f64]) -> bool {
    (u[0] - 0.3).powi(2) + (u[1] - 0.3).powi(2) > 0.2 * 0.2
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Mishra;

impl Problem for Mishra {
    fn name(&self) -> String {
        "mishra".into()
    }

    fn input_bounds(&self) -> Vec<(f64, f64)> {
        vec![(-10.0, 0.0), (-6.5, 0.0)]
    }

    fn descriptor_bounds(&self) -> Vec<(f64, f64)> {
        vec![(0.0, 10.0), (0.0, 6.5)]
    }

    fn objective(&self, x: &[f64]) -> f64 {
        mishra(x[0], x[1]).0 + MISHRA_SHIFT
    }

    fn descriptors(&self, x: &[f64]) -> Vec<f64> {
        mishra(x[0], x[1]).1.to_vec()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RobotArm {
    pub joints: usize,
}

impl Default for RobotArm {
    fn default() -> Self {
        Self { joints: 4 }
    }
}

impl Problem for RobotArm {
    fn name(&self) -> String {
        "robot_arm".into()
    }

    fn input_bounds(&self) -> Vec<(f64, f64)> {
        vec![(0.0, 1.0); self.joints]
    }

    fn descriptor_bounds(&self) -> Vec<(f64, f64)> {
        vec![(0.0, 1.0), (0.0, 1.0)]
    }

    fn objective(&self, x: &[f64]) -> f64 {
        robot_arm(x).0
    }

    fn descriptors(&self, x: &[f64]) -> Vec<f64> {
        robot_arm(x).1.to_vec()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Rosenbrock6;

impl Problem for Rosenbrock6 {
    fn name(&self) -> String {
        "rosenbrock6".into()
    }

    fn input_bounds(&self) -> Vec<(f64, f64)> {
        vec![(0.0, 1.0); 6]
    }

    fn descriptor_bounds(&self) -> Vec<(f64, f64)> {
        vec![(0.0, 1.0), (0.0, 1.0)]
    }

    fn objective(&self, x: &[f64]) -> f64 {
        rosenbrock6(x).0
    }

    fn descriptors(&self, x: &[f64]) -> Vec<f64> {
        rosenbrock6(x).1.to_vec()
    }
}

/// Mishra's bird on the unit square with descriptors equal to the inputs and
/// an infeasible disk of radius 0.2 around (0.3, 0.3).
#[derive(Debug, Clone, Copy, Default)]
pub struct InvalidDisk;

impl Problem for InvalidDisk {
    fn name(&self) -> String {
        "invalid_disk".into()
    }

    fn input_bounds(&self) -> Vec<(f64, f64)> {
        vec![(0.0, 1.0), (0.0, 1.0)]
    }

    fn descriptor_bounds(&self) -> Vec<(f64, f64)> {
        vec![(0.0, 1.0), (0.0, 1.0)]
    }

    fn objective(&self, x: &[f64]) -> f64 {
        mishra(-10.0 + 10.0 * x[0], -6.5 + 6.5 * x[1]).0 + MISHRA_SHIFT
    }

    fn descriptors(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    fn is_valid(&self, x: &[f64]) -> bool {
        invalid_disk_valid(x)
    }
}
