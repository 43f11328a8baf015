//! Kernel functions, Gram matrices and analytic input derivatives.
//!
//! Every kernel is differentiated with respect to its *first* argument:
//! [`KernelSpec::grad_x`] returns `∂k(x, y)/∂xʲ` and [`KernelSpec::hessian_x`]
//! the matrix of `∂²k(x, y)/∂xʲ∂xᵏ`. Because a kernel machine is linear in
//! its dual coefficients, `f(x) = Σᵢ αᵢ k(x, xᵢ)`, these are all that is
//! needed to differentiate GP means, SVM decisions, KDE estimates and HSIC.
//!
//! | family | k(x, y) | ∂k/∂xʲ |
//! |--------|---------|--------|
//! | linear | xᵀy | yʲ |
//! | poly   | (γ xᵀy + c₀)ᵖ | γ p yʲ (γ xᵀy + c₀)ᵖ⁻¹ |
//! | rbf    | exp(−γ‖x − y‖²) | −2γ (xʲ − yʲ) k |
//! | tanh   | tanh(γ xᵀy + c₀) | γ yʲ sech²(γ xᵀy + c₀) |
//! | ard    | ν² exp(−½ Σ_d ((x_d − y_d)/λ_d)²) | −((xʲ − yʲ)/λⱼ²) k |
//! | sinc   | sin(W(t₁ − t₂)) / (W(t₁ − t₂)) | W sinc′(W(t₁ − t₂)) |

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, ensure_finite, Error, Result};
use crate::numerics::SymMatrix;

/// Gram matrices at or above this size are built with one rayon task per row.
const PARALLEL_GRAM_MIN: usize = 128;

/// Below this |z| the sinc function and its derivatives use a Taylor series.
const SINC_SERIES_CUTOFF: f64 = 0.1;

/// A kernel family together with its hyperparameters.
///
/// Serializes as a flat JSON object tagged by `family`:
///
/// ```
/// use kdx_core::KernelSpec;
/// let k: KernelSpec = serde_json::from_str(r#"{"family":"rbf","gamma":0.5}"#).unwrap();
/// assert_eq!(k, KernelSpec::Rbf { gamma: 0.5 });
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum KernelSpec {
    Linear,
    Poly { gamma: f64, coef0: f64, degree: u32 },
    Rbf { gamma: f64 },
    Tanh { gamma: f64, coef0: f64 },
    /// Automatic relevance determination; `signal_var` is ν².
    Ard { lengthscales: Vec<f64>, signal_var: f64 },
    /// Band-limited kernel on scalars with bandwidth `W`.
    Sinc { bandwidth: f64 },
}

impl KernelSpec {
    pub fn rbf(gamma: f64) -> Self {
        KernelSpec::Rbf { gamma }
    }

    pub fn poly(gamma: f64, coef0: f64, degree: u32) -> Self {
        KernelSpec::Poly { gamma, coef0, degree }
    }

    pub fn tanh(gamma: f64, coef0: f64) -> Self {
        KernelSpec::Tanh { gamma, coef0 }
    }

    pub fn ard(lengthscales: Vec<f64>, signal_var: f64) -> Self {
        KernelSpec::Ard { lengthscales, signal_var }
    }

    pub fn sinc(bandwidth: f64) -> Self {
        KernelSpec::Sinc { bandwidth }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            KernelSpec::Linear => "linear",
            KernelSpec::Poly { .. } => "poly",
            KernelSpec::Rbf { .. } => "rbf",
            KernelSpec::Tanh { .. } => "tanh",
            KernelSpec::Ard { .. } => "ard",
            KernelSpec::Sinc { .. } => "sinc",
        }
    }

    /// Whether every Gram matrix of this kernel is positive semidefinite.
    /// The sigmoid kernel is not, and a polynomial kernel only for `c₀ ≥ 0`.
    pub fn is_psd(&self) -> bool {
        match self {
            KernelSpec::Tanh { .. } => false,
            KernelSpec::Poly { coef0, .. } => *coef0 >= 0.0,
            _ => true,
        }
    }

    /// Checks the hyperparameters.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Poly { gamma, coef0, degree } => {
                positive("gamma", *gamma)?;
                ensure_finite([coef0])?;
                if *degree == 0 {
                    return Err(Error::InvalidParameter("degree must be >= 1".into()));
                }
                Ok(())
            }
            KernelSpec::Rbf { gamma } => positive("gamma", *gamma),
            KernelSpec::Tanh { gamma, coef0 } => {
                positive("gamma", *gamma)?;
                ensure_finite([coef0])
            }
            KernelSpec::Ard { lengthscales, signal_var } => {
                positive("signal_var", *signal_var)?;
                if lengthscales.is_empty() {
                    return Err(Error::InvalidParameter("lengthscales must not be empty".into()));
                }
                lengthscales.iter().try_for_each(|l| positive("lengthscale", *l))
            }
            KernelSpec::Sinc { bandwidth } => positive("bandwidth", *bandwidth),
        }
    }

    /// Validates the spec against an input dimension `d`.
    pub fn check_dim(&self, d: usize) -> Result<()> {
        self.validate()?;
        match self {
            KernelSpec::Ard { lengthscales, .. } => ensure_dim(lengthscales.len(), d),
            KernelSpec::Sinc { .. } => ensure_dim(1, d),
            _ if d == 0 => Err(Error::EmptyInput),
            _ => Ok(()),
        }
    }

    fn check_pair(&self, x: &[f64], y: &[f64]) -> Result<()> {
        ensure_dim(x.len(), y.len())?;
        self.check_dim(x.len())?;
        ensure_finite(x.iter().chain(y))
    }

    /// `k(x, y)`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_pair(x, y)?;
        Ok(self.value(x, y))
    }

    /// Gradient of `k(x, y)` with respect to `x`.
    pub fn grad_x(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.check_pair(x, y)?;
        let mut out = vec![0.0; x.len()];
        self.gradient_into(x, y, &mut out);
        Ok(out)
    }

    /// Hessian of `k(x, y)` with respect to `x`.
    pub fn hessian_x(&self, x: &[f64], y: &[f64]) -> Result<SymMatrix> {
        self.check_pair(x, y)?;
        let d = x.len();
        let mut out = vec![0.0; d * d];
        self.hessian_into(x, y, &mut out);
        SymMatrix::new(d, out)
    }

    pub(crate) fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            KernelSpec::Linear => dot(x, y),
            KernelSpec::Poly { gamma, coef0, degree } => {
                (gamma * dot(x, y) + coef0).powi(*degree as i32)
            }
            KernelSpec::Rbf { gamma } => (-gamma * sq_dist(x, y)).exp(),
            KernelSpec::Tanh { gamma, coef0 } => (gamma * dot(x, y) + coef0).tanh(),
            KernelSpec::Ard { lengthscales, signal_var } => {
                signal_var * (-0.5 * scaled_sq_dist(x, y, lengthscales)).exp()
            }
            KernelSpec::Sinc { bandwidth } => sinc(bandwidth * (x[0] - y[0])),
        }
    }

    /// `∂k(x, y)/∂xʲ` for a single `j`.
    pub(crate) fn partial(&self, x: &[f64], y: &[f64], j: usize) -> f64 {
        match self {
            KernelSpec::Linear => y[j],
            KernelSpec::Poly { gamma, coef0, degree } => {
                let p = *degree as i32;
                gamma * f64::from(*degree) * y[j] * (gamma * dot(x, y) + coef0).powi(p - 1)
            }
            KernelSpec::Rbf { gamma } => -2.0 * gamma * (x[j] - y[j]) * self.value(x, y),
            KernelSpec::Tanh { gamma, coef0 } => gamma * y[j] * sech2(gamma * dot(x, y) + coef0),
            KernelSpec::Ard { lengthscales, .. } => {
                let l2 = lengthscales[j] * lengthscales[j];
                -((x[j] - y[j]) / l2) * self.value(x, y)
            }
            KernelSpec::Sinc { bandwidth } => bandwidth * sinc_d1(bandwidth * (x[0] - y[0])),
        }
    }

    pub(crate) fn gradient_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        match self {
            KernelSpec::Linear => out.copy_from_slice(y),
            KernelSpec::Poly { gamma, coef0, degree } => {
                let p = *degree as i32;
                let scale = gamma * f64::from(*degree) * (gamma * dot(x, y) + coef0).powi(p - 1);
                out.iter_mut().zip(y).for_each(|(o, yj)| *o = scale * yj);
            }
            KernelSpec::Rbf { gamma } => {
                let k = self.value(x, y);
                for ((o, xj), yj) in out.iter_mut().zip(x).zip(y) {
                    *o = -2.0 * gamma * (xj - yj) * k;
                }
            }
            KernelSpec::Tanh { gamma, coef0 } => {
                let scale = gamma * sech2(gamma * dot(x, y) + coef0);
                out.iter_mut().zip(y).for_each(|(o, yj)| *o = scale * yj);
            }
            KernelSpec::Ard { lengthscales, .. } => {
                let k = self.value(x, y);
                for j in 0..x.len() {
                    out[j] = -((x[j] - y[j]) / (lengthscales[j] * lengthscales[j])) * k;
                }
            }
            KernelSpec::Sinc { .. } => out[0] = self.partial(x, y, 0),
        }
    }

    /// Row-major `d x d` Hessian with respect to `x`.
    pub(crate) fn hessian_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let d = x.len();
        match self {
            KernelSpec::Linear => out.fill(0.0),
            KernelSpec::Poly { gamma, coef0, degree } => {
                if *degree < 2 {
                    out.fill(0.0);
                    return;
                }
                let p = f64::from(*degree);
                let u = gamma * dot(x, y) + coef0;
                let scale = p * (p - 1.0) * gamma * gamma * u.powi(*degree as i32 - 2);
                for j in 0..d {
                    for k in 0..d {
                        out[j * d + k] = scale * y[j] * y[k];
                    }
                }
            }
            KernelSpec::Rbf { gamma } => {
                let kv = self.value(x, y);
                for j in 0..d {
                    for k in 0..d {
                        let mut h = 4.0 * gamma * gamma * (x[j] - y[j]) * (x[k] - y[k]);
                        if j == k {
                            h -= 2.0 * gamma;
                        }
                        out[j * d + k] = h * kv;
                    }
                }
            }
            KernelSpec::Tanh { gamma, coef0 } => {
                let u = gamma * dot(x, y) + coef0;
                let scale = -2.0 * gamma * gamma * sech2(u) * u.tanh();
                for j in 0..d {
                    for k in 0..d {
                        out[j * d + k] = scale * y[j] * y[k];
                    }
                }
            }
            KernelSpec::Ard { lengthscales, .. } => {
                let kv = self.value(x, y);
                let r: Vec<f64> = (0..d)
                    .map(|j| (x[j] - y[j]) / (lengthscales[j] * lengthscales[j]))
                    .collect();
                for j in 0..d {
                    for k in 0..d {
                        let mut h = r[j] * r[k];
                        if j == k {
                            h -= 1.0 / (lengthscales[j] * lengthscales[j]);
                        }
                        out[j * d + k] = h * kv;
                    }
                }
            }
            KernelSpec::Sinc { bandwidth } => {
                out[0] = bandwidth * bandwidth * sinc_d2(bandwidth * (x[0] - y[0]));
            }
        }
    }

    /// `∂²k(x, y)/∂(xʲ)²` for a single `j`.
    pub(crate) fn second_partial(&self, x: &[f64], y: &[f64], j: usize) -> f64 {
        match self {
            KernelSpec::Linear => 0.0,
            KernelSpec::Poly { gamma, coef0, degree } => {
                if *degree < 2 {
                    return 0.0;
                }
                let p = f64::from(*degree);
                let u = gamma * dot(x, y) + coef0;
                p * (p - 1.0) * (gamma * y[j]).powi(2) * u.powi(*degree as i32 - 2)
            }
            KernelSpec::Rbf { gamma } => {
                let dj = x[j] - y[j];
                2.0 * gamma * (2.0 * gamma * dj * dj - 1.0) * self.value(x, y)
            }
            KernelSpec::Tanh { gamma, coef0 } => {
                let u = gamma * dot(x, y) + coef0;
                -2.0 * (gamma * y[j]).powi(2) * sech2(u) * u.tanh()
            }
            KernelSpec::Ard { lengthscales, .. } => {
                let l2 = lengthscales[j] * lengthscales[j];
                let r = (x[j] - y[j]) / l2;
                (r * r - 1.0 / l2) * self.value(x, y)
            }
            KernelSpec::Sinc { bandwidth } => {
                bandwidth * bandwidth * sinc_d2(bandwidth * (x[0] - y[0]))
            }
        }
    }
}

/// A Gram matrix `Kᵢⱼ = k(xᵢ, xⱼ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix(SymMatrix);

impl GramMatrix {
    pub fn into_inner(self) -> SymMatrix {
        self.0
    }
}

impl std::ops::Deref for GramMatrix {
    type Target = SymMatrix;
    fn deref(&self) -> &SymMatrix {
        &self.0
    }
}

/// Row slices of a sample matrix in standard (row-major) layout.
pub(crate) fn row_slices<'a>(x: &ArrayView2<'a, f64>) -> Vec<&'a [f64]> {
    let flat: &'a [f64] = x.to_slice().expect("sample matrix is in standard layout");
    match x.ncols() {
        0 => vec![&[]; x.nrows()],
        d => flat.chunks(d).collect(),
    }
}

/// Validates a sample matrix for use with `spec` and returns it in
/// standard layout.
pub(crate) fn checked_samples(spec: &KernelSpec, x: &Array2<f64>) -> Result<Array2<f64>> {
    if x.nrows() == 0 {
        return Err(Error::EmptyInput);
    }
    spec.check_dim(x.ncols())?;
    ensure_finite(x.iter())?;
    Ok(x.as_standard_layout().into_owned())
}

/// Gram matrix of `spec` over the rows of `x`. Only the upper triangle is
/// evaluated; the lower one is its mirror.
pub fn gram(spec: &KernelSpec, x: &Array2<f64>) -> Result<GramMatrix> {
    let x = checked_samples(spec, x)?;
    let view = x.view();
    Ok(GramMatrix(gram_unchecked(spec, &row_slices(&view))))
}

pub(crate) fn gram_unchecked(spec: &KernelSpec, rows: &[&[f64]]) -> SymMatrix {
    let n = rows.len();
    let row = |i: usize| -> Vec<f64> { (i..n).map(|j| spec.value(rows[i], rows[j])).collect() };
    let upper: Vec<Vec<f64>> = if n >= PARALLEL_GRAM_MIN {
        (0..n).into_par_iter().map(row).collect()
    } else {
        (0..n).map(row).collect()
    };
    SymMatrix::from_upper_rows(n, upper)
}

/// `k_* = [k(x_*, x₁), …, k(x_*, xₙ)]`.
pub fn kernel_vector(spec: &KernelSpec, x_star: &[f64], x: &Array2<f64>) -> Result<Vec<f64>> {
    let x = checked_samples(spec, x)?;
    ensure_dim(x.ncols(), x_star.len())?;
    ensure_finite(x_star)?;
    let view = x.view();
    Ok(row_slices(&view).into_iter().map(|xi| spec.value(x_star, xi)).collect())
}

/// `∂ⱼk(x_*) = [∂k(x_*, x₁)/∂xʲ, …, ∂k(x_*, xₙ)/∂xʲ]`.
pub fn gram_grad_col(
    spec: &KernelSpec,
    x_star: &[f64],
    x: &Array2<f64>,
    j: usize,
) -> Result<Vec<f64>> {
    let x = checked_samples(spec, x)?;
    ensure_dim(x.ncols(), x_star.len())?;
    ensure_finite(x_star)?;
    if j >= x_star.len() {
        return Err(Error::InvalidParameter(format!(
            "feature index {j} out of range for dimension {}",
            x_star.len()
        )));
    }
    let view = x.view();
    Ok(row_slices(&view).into_iter().map(|xi| spec.partial(x_star, xi, j)).collect())
}

/// The `m`-th partial derivative `∂ᵐk(x, y)/∂(xʲ)ᵐ` of the RBF kernel.
///
/// Writing `k = exp(g)` with `g = −γ‖x − y‖²`, the only non-zero derivatives
/// of `g` along `xʲ` are `g′ = −2γ(xʲ − yʲ)` and `g″ = −2γ`. Faà di Bruno's
/// formula then collapses to the recurrence
/// `Dₘ = g′ Dₘ₋₁ + (m − 1) g″ Dₘ₋₂` with `D₀ = k` and `D₋₁ = 0`.
///
/// ```
/// use kdx_core::kernels::nth_partial_rbf;
/// let d2 = nth_partial_rbf(0.5, &[0.0], &[0.0], 0, 2).unwrap();
/// assert!((d2 + 1.0).abs() < 1e-15);
/// ```
pub fn nth_partial_rbf(gamma: f64, x: &[f64], y: &[f64], j: usize, m: usize) -> Result<f64> {
    if m < 1 {
        return Err(Error::InvalidOrder(m));
    }
    let spec = KernelSpec::rbf(gamma);
    spec.check_pair(x, y)?;
    if j >= x.len() {
        return Err(Error::InvalidParameter(format!(
            "feature index {j} out of range for dimension {}",
            x.len()
        )));
    }
    let g1 = -2.0 * gamma * (x[j] - y[j]);
    let g2 = -2.0 * gamma;
    let mut prev = 0.0;
    let mut cur = spec.value(x, y);
    for order in 1..=m {
        let next = g1 * cur + (order as f64 - 1.0) * g2 * prev;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Explicit feature map of the degree-2 polynomial kernel `(1 + xᵀy)²` on
/// `ℝ²`: `(1, x₁², x₂², √2 x₁, √2 x₂, √2 x₁x₂)`.
pub fn poly2_feature_map(x: &[f64]) -> Result<[f64; 6]> {
    ensure_dim(2, x.len())?;
    ensure_finite(x)?;
    let s = std::f64::consts::SQRT_2;
    Ok([1.0, x[0] * x[0], x[1] * x[1], s * x[0], s * x[1], s * x[0] * x[1]])
}

/// RBF `γ` from the median heuristic, `γ = 1 / (2·median²)` over distinct
/// pairwise distances. Falls back to `γ = 1` when the median distance is 0.
pub fn median_heuristic_gamma(x: &Array2<f64>) -> Result<f64> {
    if x.nrows() == 0 {
        return Err(Error::EmptyInput);
    }
    ensure_finite(x.iter())?;
    let x = x.as_standard_layout();
    let view = x.view();
    let rows = row_slices(&view);
    let mut dists = Vec::with_capacity(rows.len() * rows.len().saturating_sub(1) / 2);
    for i in 0..rows.len() {
        for j in (i + 1)..rows.len() {
            dists.push(sq_dist(rows[i], rows[j]).sqrt());
        }
    }
    if dists.is_empty() {
        return Ok(1.0);
    }
    dists.sort_by(f64::total_cmp);
    let m = dists.len();
    let median = if m % 2 == 1 {
        dists[m / 2]
    } else {
        0.5 * (dists[m / 2 - 1] + dists[m / 2])
    };
    if median > 0.0 {
        Ok(1.0 / (2.0 * median * median))
    } else {
        Ok(1.0)
    }
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub(crate) fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn scaled_sq_dist(x: &[f64], y: &[f64], lengthscales: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .zip(lengthscales)
        .map(|((a, b), l)| ((a - b) / l).powi(2))
        .sum()
}

fn sech2(u: f64) -> f64 {
    let c = u.cosh();
    if c.is_finite() {
        1.0 / (c * c)
    } else {
        0.0
    }
}

fn sinc(z: f64) -> f64 {
    if z == 0.0 {
        1.0
    } else if z.abs() < SINC_SERIES_CUTOFF {
        let z2 = z * z;
        1.0 - z2 / 6.0 + z2 * z2 / 120.0 - z2 * z2 * z2 / 5040.0 + z2.powi(4) / 362_880.0
    } else {
        z.sin() / z
    }
}

fn sinc_d1(z: f64) -> f64 {
    if z.abs() < SINC_SERIES_CUTOFF {
        let z2 = z * z;
        z * (-1.0 / 3.0 + z2 / 30.0 - z2 * z2 / 840.0 + z2 * z2 * z2 / 45_360.0)
    } else {
        (z * z.cos() - z.sin()) / (z * z)
    }
}

fn sinc_d2(z: f64) -> f64 {
    if z.abs() < SINC_SERIES_CUTOFF {
        let z2 = z * z;
        -1.0 / 3.0 + z2 / 10.0 - z2 * z2 / 168.0 + z2 * z2 * z2 / 6480.0
    } else {
        ((2.0 - z * z) * z.sin() - 2.0 * z * z.cos()) / (z * z * z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    const RBF_AT_ONE: f64 = 0.606_530_659_712_633_4; // exp(-0.5)

    #[test]
    fn eval_examples() {
        assert_eq!(KernelSpec::rbf(0.5).eval(&[3.0, -1.0], &[3.0, -1.0]).unwrap(), 1.0);
        let poly = KernelSpec::poly(1.0, 1.0, 2);
        assert!((poly.eval(&[1.0, 1.0], &[1.0, 1.0]).unwrap() - 9.0).abs() < 1e-15);
        let s = KernelSpec::sinc(std::f64::consts::PI).eval(&[1.0], &[0.0]).unwrap();
        assert!(s.abs() < 1e-15);
    }

    #[test]
    fn eval_errors() {
        let rbf = KernelSpec::rbf(0.5);
        assert!(matches!(rbf.eval(&[1.0], &[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
        assert_eq!(rbf.eval(&[f64::NAN], &[1.0]), Err(Error::NonFiniteInput));
        assert!(KernelSpec::sinc(1.0).eval(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(KernelSpec::ard(vec![1.0], 1.0).eval(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(KernelSpec::rbf(-1.0).eval(&[1.0], &[1.0]).is_err());
        assert!(KernelSpec::poly(1.0, 0.0, 0).eval(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn linear_gradient_is_other_argument() {
        let g = KernelSpec::Linear.grad_x(&[7.0, -3.0], &[2.0, 5.0]).unwrap();
        assert_eq!(g, vec![2.0, 5.0]);
    }

    #[test]
    fn rbf_gradient_examples() {
        let rbf = KernelSpec::rbf(0.5);
        assert_eq!(rbf.grad_x(&[0.3, 0.4], &[0.3, 0.4]).unwrap(), vec![0.0, 0.0]);
        let g = rbf.grad_x(&[1.0, 0.0], &[0.0, 0.0]).unwrap();
        assert!((g[0] + RBF_AT_ONE).abs() < 1e-15);
        assert_eq!(g[1], 0.0);
    }

    #[test]
    fn hessian_examples() {
        let h = KernelSpec::Linear.hessian_x(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert!(h.as_slice().iter().all(|v| *v == 0.0));
        let rbf = KernelSpec::rbf(0.5);
        let h = rbf.hessian_x(&[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(h.as_slice(), &[-1.0, 0.0, 0.0, -1.0]);
        let h = rbf.hessian_x(&[1.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(h.get(0, 1), 0.0);
    }

    #[test]
    fn nth_partial_examples() {
        let d1 = nth_partial_rbf(0.5, &[1.0], &[0.0], 0, 1).unwrap();
        assert!((d1 + RBF_AT_ONE).abs() < 1e-15);
        assert_eq!(nth_partial_rbf(0.5, &[0.0], &[0.0], 0, 2).unwrap(), -1.0);
        assert_eq!(nth_partial_rbf(0.5, &[0.0], &[0.0], 0, 0), Err(Error::InvalidOrder(0)));
    }

    #[test]
    fn gram_examples() {
        let g = gram(&KernelSpec::rbf(1.0), &array![[0.4, 0.2]]).unwrap();
        assert_eq!(g.as_slice(), &[1.0]);
        let g = gram(&KernelSpec::rbf(1.0), &array![[0.0], [1.0]]).unwrap();
        let e = (-1.0f64).exp();
        assert_eq!(g.as_slice(), &[1.0, e, e, 1.0]);
        let g = gram(&KernelSpec::Linear, &array![[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(g.as_slice(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn large_gram_is_symmetric() {
        let x = Array2::from_shape_fn((200, 3), |(i, j)| ((i * 7 + j * 3) % 11) as f64 * 0.1);
        let g = gram(&KernelSpec::rbf(0.7), &x).unwrap();
        for i in 0..200 {
            assert_eq!(g.get(i, i), 1.0);
            for j in 0..i {
                assert_eq!(g.get(i, j), g.get(j, i));
            }
        }
    }

    #[test]
    fn gram_grad_col_examples() {
        let x = array![[0.5, 0.5]];
        assert_eq!(gram_grad_col(&KernelSpec::rbf(0.5), &[0.5, 0.5], &x, 0).unwrap(), vec![0.0]);
        let x = array![[2.0, 5.0], [1.0, 1.0]];
        assert_eq!(gram_grad_col(&KernelSpec::Linear, &[9.0, 9.0], &x, 0).unwrap(), vec![2.0, 1.0]);
        let x = array![[0.0, 0.0]];
        let c = gram_grad_col(&KernelSpec::rbf(0.5), &[1.0, 0.0], &x, 0).unwrap();
        assert!((c[0] + RBF_AT_ONE).abs() < 1e-15);
    }

    #[test]
    fn poly2_feature_map_examples() {
        assert_eq!(poly2_feature_map(&[0.0, 0.0]).unwrap(), [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let s = std::f64::consts::SQRT_2;
        let phi = poly2_feature_map(&[1.0, 1.0]).unwrap();
        assert_eq!(phi, [1.0, 1.0, 1.0, s, s, s]);
        assert!((dot(&phi, &phi) - 9.0).abs() < 1e-12);
        let a = poly2_feature_map(&[1.0, 0.0]).unwrap();
        let b = poly2_feature_map(&[0.0, 1.0]).unwrap();
        assert!((dot(&a, &b) - 1.0).abs() < 1e-15);
        assert!(poly2_feature_map(&[1.0]).is_err());
    }

    #[test]
    fn sinc_coincidence_limits() {
        let k = KernelSpec::sinc(2.5);
        assert_eq!(k.eval(&[0.7], &[0.7]).unwrap(), 1.0);
        assert_eq!(k.grad_x(&[0.7], &[0.7]).unwrap(), vec![0.0]);
        let h = k.hessian_x(&[0.7], &[0.7]).unwrap();
        assert!((h.get(0, 0) + 2.5 * 2.5 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn sinc_series_matches_closed_form_at_cutoff() {
        for z in [0.0999_f64, -0.0999, 0.1001] {
            let closed = z.sin() / z;
            assert!((sinc(z) - closed).abs() < 1e-15);
            let d1 = (z * z.cos() - z.sin()) / (z * z);
            assert!((sinc_d1(z) - d1).abs() < 1e-12);
            let d2 = ((2.0 - z * z) * z.sin() - 2.0 * z * z.cos()) / (z * z * z);
            assert!((sinc_d2(z) - d2).abs() < 1e-9);
        }
    }

    #[test]
    fn psd_flags() {
        assert!(KernelSpec::rbf(1.0).is_psd());
        assert!(!KernelSpec::tanh(1.0, 0.0).is_psd());
        assert!(!KernelSpec::poly(1.0, -1.0, 2).is_psd());
    }

    #[test]
    fn median_heuristic() {
        // pairwise distances 1, 2, 3 -> median 2
        let g = median_heuristic_gamma(&array![[0.0], [1.0], [3.0]]).unwrap();
        assert!((g - 1.0 / 8.0).abs() < 1e-15);
        assert_eq!(median_heuristic_gamma(&array![[1.0], [1.0]]).unwrap(), 1.0);
    }

    #[test]
    fn json_round_trip_and_unknown_fields() {
        let specs = [
            KernelSpec::Linear,
            KernelSpec::poly(0.5, 1.0, 3),
            KernelSpec::rbf(0.5),
            KernelSpec::tanh(0.1, -0.2),
            KernelSpec::ard(vec![1.0, 2.0], 1.5),
            KernelSpec::sinc(3.0),
        ];
        for s in specs {
            let json = serde_json::to_string(&s).unwrap();
            assert_eq!(serde_json::from_str::<KernelSpec>(&json).unwrap(), s);
        }
        assert_eq!(serde_json::to_string(&KernelSpec::rbf(0.5)).unwrap(), r#"{"family":"rbf","gamma":0.5}"#);
        assert!(serde_json::from_str::<KernelSpec>(r#"{"family":"rbf","gamma":0.5,"coef0":1}"#).is_err());
        assert!(serde_json::from_str::<KernelSpec>(r#"{"family":"laplace","gamma":0.5}"#).is_err());
    }
}
