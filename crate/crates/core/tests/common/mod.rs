#![allow(dead_code)]

use lattice_ym::group::{AlgebraElement, GroupSpec};
use lattice_ym::linalg::Mat;
use num_complex::Complex64;

/// Sample mean and its standard error for i.i.d. draws.
pub fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

pub fn within(value: (f64, f64), target: f64, k: f64) -> bool {
    (value.0 - target).abs() <= k * value.1
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-3)
}

pub fn real(rows: &[&[f64]]) -> Mat {
    Mat::from_real_rows(rows)
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn alg(spec: &GroupSpec, coords: &[f64]) -> AlgebraElement {
    AlgebraElement::from_coordinates(spec, coords)
}

pub fn max_entry_diff(a: &Mat, b: &Mat) -> f64 {
    a.entries().iter().zip(b.entries()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
