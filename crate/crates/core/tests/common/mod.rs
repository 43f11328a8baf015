#![allow(dead_code)]

use kdx_core::KernelSpec;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const H: f64 = 1e-5;
pub const REL: f64 = 1e-5;
pub const ABS: f64 = 1e-8;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(rng: &mut impl Rng, d: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn uniform_matrix(rng: &mut impl Rng, n: usize, d: usize, lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |_| rng.random_range(lo..hi))
}

/// Central difference of a scalar function along every coordinate.
pub fn fd_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|j| {
            p[j] = x[j] + h;
            let up = f(&p);
            p[j] = x[j] - h;
            let down = f(&p);
            p[j] = x[j];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `out[a][b] = ∂g_a/∂x_b` by central differences.
pub fn fd_jacobian(g: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], h: f64) -> Vec<Vec<f64>> {
    let mut p = x.to_vec();
    let mut cols = Vec::with_capacity(x.len());
    for b in 0..x.len() {
        p[b] = x[b] + h;
        let up = g(&p);
        p[b] = x[b] - h;
        let down = g(&p);
        p[b] = x[b];
        cols.push(up.iter().zip(&down).map(|(u, d)| (u - d) / (2.0 * h)).collect::<Vec<_>>());
    }
    let m = cols.first().map_or(0, Vec::len);
    (0..m).map(|a| cols.iter().map(|c| c[a]).collect()).collect()
}

/// Relative error with an absolute floor for values near zero.
pub fn close(analytic: f64, numeric: f64, rel: f64, abs: f64) -> bool {
    let diff = (analytic - numeric).abs();
    diff <= abs || diff <= rel * analytic.abs().max(numeric.abs())
}

pub fn assert_close(analytic: f64, numeric: f64, what: &str) {
    assert!(
        close(analytic, numeric, REL, ABS),
        "{what}: analytic {analytic:e} vs finite difference {numeric:e}"
    );
}

/// One kernel per family with parameters drawn for dimension `d`. Sinc is
/// scalar-only and Poly uses degree `degree`.
pub fn random_kernel(rng: &mut impl Rng, family: &str, d: usize, degree: u32) -> KernelSpec {
    match family {
        "linear" => KernelSpec::Linear,
        "poly" => KernelSpec::poly(rng.random_range(0.2..1.5), rng.random_range(0.0..2.0), degree),
        "rbf" => KernelSpec::rbf(rng.random_range(0.1..2.0)),
        "tanh" => KernelSpec::tanh(rng.random_range(0.1..1.0), rng.random_range(-1.0..1.0)),
        "ard" => KernelSpec::ard(uniform_vec(rng, d, 0.5, 2.0), rng.random_range(0.5..2.0)),
        "sinc" => KernelSpec::sinc(rng.random_range(0.5..3.0)),
        other => panic!("unknown family {other}"),
    }
}

/// Families with the dimension each is exercised in.
pub fn family_dims(rng: &mut impl Rng, family: &str) -> usize {
    if family == "sinc" {
        1
    } else {
        rng.random_range(1..=5)
    }
}

pub const FAMILIES: [(&str, u32); 7] = [
    ("linear", 1),
    ("poly", 2),
    ("poly", 3),
    ("rbf", 1),
    ("tanh", 1),
    ("ard", 1),
    ("sinc", 1),
];
