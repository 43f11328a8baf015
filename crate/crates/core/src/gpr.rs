//! Gaussian process regression with analytic derivatives of the predictive
//! mean.
//!
//! The predictive mean at `x_*` is `μ(x_*) = k_*ᵀ α` with
//! `α = (K + σₙ² I)⁻¹ y`, so its gradient is `(∂ⱼ k_*)ᵀ α` and its Hessian
//! `(∂ⱼ∂ₖ k_*)ᵀ α`. The predictive variance is
//! `σₙ² + k(x_*, x_*) − k_*ᵀ (K + σₙ² I)⁻¹ k_*`.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::cv::kfold_indices;
use crate::error::{ensure_dim, ensure_finite, Error, Result};
use crate::kernels::{checked_samples, gram_unchecked, row_slices, KernelSpec};
use crate::numerics::{default_jitter, Cholesky, SymMatrix};
use crate::sensitivity::DerivField;

/// A fitted GP regressor.
#[derive(Debug, Clone)]
pub struct GprModel {
    x_train: Array2<f64>,
    kernel: KernelSpec,
    noise_var: f64,
    alpha: Vec<f64>,
    chol: Cholesky,
}

/// Serializable state of a [`GprModel`]. The Cholesky factor is rebuilt on
/// load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GprParts {
    pub kernel: KernelSpec,
    pub x_train: Vec<Vec<f64>>,
    pub noise_var: f64,
    pub alpha: Vec<f64>,
}

/// Squared norms of the fitted function used as regularizers:
/// `‖f‖²_H = αᵀKα`, `‖f‖²₂ = ‖Kα‖²`, `‖∇f‖²₂ = Σᵢ ‖∇f(xᵢ)‖²` and
/// `‖∇²f‖²₂ = Σᵢ (∇²f(xᵢ))²` where `∇²` is the Laplacian. Sums run over
/// the training inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizerNorms {
    pub h_norm: f64,
    pub l2_norm: f64,
    pub grad_norm: f64,
    pub lap_norm: f64,
}

fn check_noise(noise_var: f64) -> Result<()> {
    if noise_var >= 0.0 && noise_var.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("noise_var must be >= 0, got {noise_var}")))
    }
}

fn regularized_gram(kernel: &KernelSpec, x: &Array2<f64>, noise_var: f64) -> SymMatrix {
    let view = x.view();
    let mut k = gram_unchecked(kernel, &row_slices(&view));
    k.add_diagonal(noise_var);
    k
}

fn residual_norm(k: &SymMatrix, alpha: &[f64], y: &[f64]) -> (Vec<f64>, f64) {
    let r: Vec<f64> = y.iter().zip(k.mul_vec(alpha)).map(|(yi, ki)| yi - ki).collect();
    let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    (r, norm)
}

/// Solves `K α = y` through the (possibly jittered) factor, then applies
/// iterative refinement against the unjittered `K` while the residual
/// keeps shrinking.
fn refine(k: &SymMatrix, chol: &Cholesky, y: &[f64]) -> Result<Vec<f64>> {
    let mut alpha = chol.solve(y)?;
    let (mut r, mut norm) = residual_norm(k, &alpha, y);
    for _ in 0..REFINE_STEPS {
        if norm == 0.0 {
            break;
        }
        let delta = chol.solve(&r)?;
        let next: Vec<f64> = alpha.iter().zip(&delta).map(|(a, d)| a + d).collect();
        let (next_r, next_norm) = residual_norm(k, &next, y);
        if next_norm.is_nan() || next_norm >= norm {
            break;
        }
        alpha = next;
        r = next_r;
        norm = next_norm;
    }
    Ok(alpha)
}

const REFINE_STEPS: usize = 5;

impl GprModel {
    /// Fits `α = (K + σₙ² I)⁻¹ y`.
    pub fn fit(x: &Array2<f64>, y: &[f64], kernel: KernelSpec, noise_var: f64) -> Result<Self> {
        let x = checked_samples(&kernel, x)?;
        ensure_dim(x.nrows(), y.len())?;
        ensure_finite(y)?;
        check_noise(noise_var)?;
        let k = regularized_gram(&kernel, &x, noise_var);
        let chol = Cholesky::factor(&k, default_jitter(&k))?;
        let alpha = refine(&k, &chol, y)?;
        Ok(GprModel {
            x_train: x,
            kernel,
            noise_var,
            alpha,
            chol,
        })
    }

    /// Rebuilds a model from stored dual coefficients.
    pub fn from_parts(parts: GprParts) -> Result<Self> {
        let n = parts.x_train.len();
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        let d = parts.x_train[0].len();
        let mut flat = Vec::with_capacity(n * d);
        for row in &parts.x_train {
            ensure_dim(d, row.len())?;
            flat.extend_from_slice(row);
        }
        let x = Array2::from_shape_vec((n, d), flat).expect("row lengths checked");
        let x = checked_samples(&parts.kernel, &x)?;
        ensure_dim(n, parts.alpha.len())?;
        ensure_finite(&parts.alpha)?;
        check_noise(parts.noise_var)?;
        let k = regularized_gram(&parts.kernel, &x, parts.noise_var);
        let chol = Cholesky::factor(&k, default_jitter(&k))?;
        Ok(GprModel {
            x_train: x,
            kernel: parts.kernel,
            noise_var: parts.noise_var,
            alpha: parts.alpha,
            chol,
        })
    }

    pub fn to_parts(&self) -> GprParts {
        GprParts {
            kernel: self.kernel.clone(),
            x_train: self.x_train.rows().into_iter().map(|r| r.to_vec()).collect(),
            noise_var: self.noise_var,
            alpha: self.alpha.clone(),
        }
    }

    pub fn x_train(&self) -> &Array2<f64> {
        &self.x_train
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn dim(&self) -> usize {
        self.x_train.ncols()
    }

    fn check_point(&self, x_star: &[f64]) -> Result<()> {
        ensure_dim(self.dim(), x_star.len())?;
        ensure_finite(x_star)
    }

    fn train_rows(&self) -> Vec<&[f64]> {
        self.x_train
            .rows()
            .into_iter()
            .map(|r| r.to_slice().expect("training inputs are stored row-major"))
            .collect()
    }

    /// Predictive mean `k_*ᵀ α`.
    pub fn predict_mean(&self, x_star: &[f64]) -> Result<f64> {
        self.check_point(x_star)?;
        Ok(self
            .train_rows()
            .into_iter()
            .zip(&self.alpha)
            .map(|(xi, a)| a * self.kernel.value(x_star, xi))
            .sum())
    }

    /// Predictive variance of a noisy observation at `x_star`. Round-off can
    /// make the exact expression slightly negative; such values are
    /// clamped to zero.
    pub fn predict_var(&self, x_star: &[f64]) -> Result<f64> {
        self.check_point(x_star)?;
        let k_star: Vec<f64> = self
            .train_rows()
            .into_iter()
            .map(|xi| self.kernel.value(x_star, xi))
            .collect();
        let v = self.chol.solve_lower(&k_star)?;
        let explained: f64 = v.iter().map(|t| t * t).sum();
        let var = self.noise_var + self.kernel.value(x_star, x_star) - explained;
        Ok(var.max(0.0))
    }

    /// `∇μ(x_*)`.
    pub fn mean_gradient(&self, x_star: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x_star)?;
        let d = self.dim();
        let mut grad = vec![0.0; d];
        let mut buf = vec![0.0; d];
        for (xi, a) in self.train_rows().into_iter().zip(&self.alpha) {
            self.kernel.gradient_into(x_star, xi, &mut buf);
            grad.iter_mut().zip(&buf).for_each(|(g, b)| *g += a * b);
        }
        Ok(grad)
    }

    /// Full Hessian of the predictive mean.
    pub fn mean_hessian(&self, x_star: &[f64]) -> Result<SymMatrix> {
        self.check_point(x_star)?;
        let d = self.dim();
        let mut acc = vec![0.0; d * d];
        let mut buf = vec![0.0; d * d];
        for (xi, a) in self.train_rows().into_iter().zip(&self.alpha) {
            self.kernel.hessian_into(x_star, xi, &mut buf);
            acc.iter_mut().zip(&buf).for_each(|(h, b)| *h += a * b);
        }
        SymMatrix::new(d, acc)
    }

    /// Unmixed second partials `∂²μ/∂(xʲ)²`.
    pub fn mean_hessian_diag(&self, x_star: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x_star)?;
        let rows = self.train_rows();
        Ok((0..self.dim())
            .map(|j| {
                rows.iter()
                    .zip(&self.alpha)
                    .map(|(xi, a)| a * self.kernel.second_partial(x_star, xi, j))
                    .sum()
            })
            .collect())
    }

    /// Laplacian `Σⱼ ∂²μ/∂(xʲ)²`.
    pub fn mean_laplacian(&self, x_star: &[f64]) -> Result<f64> {
        Ok(self.mean_hessian_diag(x_star)?.iter().sum())
    }

    /// Mean gradients at each row of `points`.
    pub fn gradient_field(&self, points: &Array2<f64>) -> Result<DerivField> {
        ensure_dim(self.dim(), points.ncols())?;
        let mut values = Array2::zeros(points.raw_dim());
        for (i, p) in points.axis_iter(Axis(0)).enumerate() {
            let g = self.mean_gradient(&p.to_vec())?;
            values.row_mut(i).assign(&ndarray::ArrayView1::from(&g));
        }
        DerivField::new(values)
    }

    /// Unmixed second partials at each row of `points`.
    pub fn second_derivative_field(&self, points: &Array2<f64>) -> Result<DerivField> {
        ensure_dim(self.dim(), points.ncols())?;
        let mut values = Array2::zeros(points.raw_dim());
        for (i, p) in points.axis_iter(Axis(0)).enumerate() {
            let h = self.mean_hessian_diag(&p.to_vec())?;
            values.row_mut(i).assign(&ndarray::ArrayView1::from(&h));
        }
        DerivField::new(values)
    }

    pub fn regularizer_norms(&self) -> RegularizerNorms {
        let rows = self.train_rows();
        let k = gram_unchecked(&self.kernel, &rows);
        let k_alpha = k.mul_vec(&self.alpha);
        let h_norm: f64 = k_alpha.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let l2_norm: f64 = k_alpha.iter().map(|v| v * v).sum();
        let mut grad_norm = 0.0;
        let mut lap_norm = 0.0;
        for xi in &rows {
            let g = self.mean_gradient(xi).expect("training rows match the model");
            grad_norm += g.iter().map(|v| v * v).sum::<f64>();
            let lap = self.mean_laplacian(xi).expect("training rows match the model");
            lap_norm += lap * lap;
        }
        RegularizerNorms {
            h_norm,
            l2_norm,
            grad_norm,
            lap_norm,
        }
    }
}

impl Serialize for GprModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_parts().serialize(s)
    }
}

impl<'de> Deserialize<'de> for GprModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let parts = GprParts::deserialize(d)?;
        GprModel::from_parts(parts).map_err(serde::de::Error::custom)
    }
}

/// Mean squared error of k-fold cross-validation.
pub fn cross_validate(
    x: &Array2<f64>,
    y: &[f64],
    kernel: &KernelSpec,
    noise_var: f64,
    folds: usize,
    seed: u64,
) -> Result<f64> {
    ensure_dim(x.nrows(), y.len())?;
    let mut sse = 0.0;
    for (train, test) in kfold_indices(x.nrows(), folds, seed)? {
        let xt = x.select(Axis(0), &train);
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let model = GprModel::fit(&xt, &yt, kernel.clone(), noise_var)?;
        for &i in &test {
            let r = model.predict_mean(&x.row(i).to_vec())? - y[i];
            sse += r * r;
        }
    }
    Ok(sse / x.nrows() as f64)
}

/// Result of a hyperparameter grid search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridChoice {
    pub gamma: f64,
    pub noise_var: f64,
    pub cv_mse: f64,
}

/// Picks the RBF `γ` and noise variance with the lowest cross-validated
/// error. Ties keep the first candidate in grid order.
pub fn grid_search_rbf(
    x: &Array2<f64>,
    y: &[f64],
    gammas: &[f64],
    noise_vars: &[f64],
    folds: usize,
    seed: u64,
) -> Result<GridChoice> {
    let mut best: Option<GridChoice> = None;
    for &gamma in gammas {
        for &noise_var in noise_vars {
            let kernel = KernelSpec::rbf(gamma);
            let cv_mse = match cross_validate(x, y, &kernel, noise_var, folds, seed) {
                Ok(v) if v.is_finite() => v,
                Ok(_) | Err(Error::NotPositiveDefinite { .. }) => continue,
                Err(e) => return Err(e),
            };
            if best.is_none_or(|b| cv_mse < b.cv_mse) {
                best = Some(GridChoice {
                    gamma,
                    noise_var,
                    cv_mse,
                });
            }
        }
    }
    best.ok_or_else(|| Error::InvalidParameter("empty or infeasible hyperparameter grid".into()))
}
