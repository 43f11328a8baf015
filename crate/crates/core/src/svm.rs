//! Binary soft-margin support vector classification.
//!
//! The dual problem is solved by sequential minimal optimization (Platt's
//! two-index heuristic over a cached Gram matrix). The decision function is
//! `f(x) = Σᵢ yᵢαᵢ k(x, xᵢ) + b`. Since `sign(f)` is not differentiable, the
//! sensitivity analysis uses the smooth surrogate `g = tanh(f)`, whose
//! gradient factors as `∂g/∂xʲ = (1 − g²) · ∂f/∂xʲ`: a mask that is non-zero
//! only near the decision boundary, times the gradient of the kernel
//! expansion.

use ndarray::{Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cv::kfold_indices;
use crate::error::{ensure_dim, ensure_finite, Error, Result};
use crate::kernels::{checked_samples, gram_unchecked, row_slices, KernelSpec};
use crate::rng::seeded;
use crate::sensitivity::DerivField;

/// Smallest change in a multiplier that counts as progress.
const STEP_EPS: f64 = 1e-10;

/// SMO settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmParams {
    /// Box constraint `C > 0`.
    pub c: f64,
    /// KKT tolerance.
    pub tol: f64,
    /// Cap on attempted pair updates; `None` means `100·n`.
    pub max_updates: Option<usize>,
    /// Seed for the randomized starting points of the fallback scans.
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            tol: 1e-3,
            max_updates: None,
            seed: 0,
        }
    }
}

impl SvmParams {
    pub fn with_c(c: f64) -> Self {
        SvmParams {
            c,
            ..Self::default()
        }
    }
}

/// A trained classifier. Only samples with `αᵢ > 0` are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    sv_x: Array2<f64>,
    sv_coef: Vec<f64>,
    bias: f64,
    kernel: KernelSpec,
    c: f64,
}

/// Serializable state of an [`SvmModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvmParts {
    pub kernel: KernelSpec,
    pub sv_x: Vec<Vec<f64>>,
    /// `yᵢαᵢ` per support vector.
    pub sv_coef: Vec<f64>,
    pub bias: f64,
    pub c: f64,
}

/// Outcome of [`train`]. Hitting the update cap is not an error; it is
/// reported through `converged`.
#[derive(Debug, Clone)]
pub struct SvmFit {
    pub model: SvmModel,
    pub converged: bool,
    pub updates: usize,
    /// Largest KKT violation over the training set at termination.
    pub max_violation: f64,
    /// Dual multipliers for every training sample, in input order.
    pub alpha: Vec<f64>,
}

/// Decomposition of the gradient of `tanh(f(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothGradient {
    pub decision: f64,
    /// `1 − tanh²(f(x))`.
    pub mask_term: f64,
    /// `∇f(x)`.
    pub kernel_grad: Vec<f64>,
    /// `mask_term · kernel_grad`.
    pub full_grad: Vec<f64>,
}

fn check_labels(y: &[f64]) -> Result<()> {
    if let Some(bad) = y.iter().find(|v| **v != 1.0 && **v != -1.0) {
        return Err(Error::InvalidParameter(format!("labels must be -1 or +1, got {bad}")));
    }
    let pos = y.iter().any(|v| *v > 0.0);
    let neg = y.iter().any(|v| *v < 0.0);
    if pos && neg {
        Ok(())
    } else {
        Err(Error::SingleClassInput)
    }
}

struct Smo<'a> {
    k: &'a crate::numerics::SymMatrix,
    y: &'a [f64],
    c: f64,
    tol: f64,
    alpha: Vec<f64>,
    errors: Vec<f64>,
    b: f64,
}

impl Smo<'_> {
    fn is_free(&self, i: usize) -> bool {
        self.alpha[i] > 0.0 && self.alpha[i] < self.c
    }

    fn take_step(&mut self, i1: usize, i2: usize) -> bool {
        if i1 == i2 {
            return false;
        }
        let (a1, a2) = (self.alpha[i1], self.alpha[i2]);
        let (y1, y2) = (self.y[i1], self.y[i2]);
        let (e1, e2) = (self.errors[i1], self.errors[i2]);
        let s = y1 * y2;
        let c = self.c;
        let (lo, hi) = if y1 != y2 {
            ((a2 - a1).max(0.0), (c + a2 - a1).min(c))
        } else {
            ((a1 + a2 - c).max(0.0), (a1 + a2).min(c))
        };
        if hi - lo <= STEP_EPS * c {
            return false;
        }
        let k11 = self.k.get(i1, i1);
        let k12 = self.k.get(i1, i2);
        let k22 = self.k.get(i2, i2);
        let eta = k11 + k22 - 2.0 * k12;
        let mut a2_new = if eta > 0.0 {
            (a2 + y2 * (e1 - e2) / eta).clamp(lo, hi)
        } else {
            // Objective is linear (or convex) along the constraint line:
            // the optimum sits at an end point.
            let f1 = y1 * (e1 - self.b) - a1 * k11 - s * a2 * k12;
            let f2 = y2 * (e2 - self.b) - s * a1 * k12 - a2 * k22;
            let obj = |a2v: f64| {
                let a1v = a1 + s * (a2 - a2v);
                a1v * f1 + a2v * f2 + 0.5 * a1v * a1v * k11 + 0.5 * a2v * a2v * k22 + s * a2v * a1v * k12
            };
            let (ol, oh) = (obj(lo), obj(hi));
            if ol < oh - STEP_EPS {
                lo
            } else if ol > oh + STEP_EPS {
                hi
            } else {
                a2
            }
        };
        if a2_new < STEP_EPS * c {
            a2_new = 0.0;
        } else if a2_new > c * (1.0 - STEP_EPS) {
            a2_new = c;
        }
        if (a2_new - a2).abs() < STEP_EPS * (a2_new + a2 + STEP_EPS) {
            return false;
        }
        let mut a1_new = a1 + s * (a2 - a2_new);
        if a1_new < STEP_EPS * c {
            a1_new = 0.0;
        } else if a1_new > c * (1.0 - STEP_EPS) {
            a1_new = c;
        }

        let d1 = y1 * (a1_new - a1);
        let d2 = y2 * (a2_new - a2);
        let b1 = self.b - e1 - d1 * k11 - d2 * k12;
        let b2 = self.b - e2 - d1 * k12 - d2 * k22;
        let b_new = if a1_new > 0.0 && a1_new < c {
            b1
        } else if a2_new > 0.0 && a2_new < c {
            b2
        } else {
            0.5 * (b1 + b2)
        };
        let db = b_new - self.b;
        let (r1, r2) = (self.k.row(i1), self.k.row(i2));
        for (i, e) in self.errors.iter_mut().enumerate() {
            *e += d1 * r1[i] + d2 * r2[i] + db;
        }
        self.alpha[i1] = a1_new;
        self.alpha[i2] = a2_new;
        self.b = b_new;
        true
    }

    fn violates_kkt(&self, i: usize) -> bool {
        let r = self.errors[i] * self.y[i];
        (r < -self.tol && self.alpha[i] < self.c) || (r > self.tol && self.alpha[i] > 0.0)
    }

    fn examine(&mut self, i2: usize, rng: &mut impl Rng, budget: &mut usize) -> bool {
        if !self.violates_kkt(i2) {
            return false;
        }
        let n = self.alpha.len();
        let e2 = self.errors[i2];
        let free: Vec<usize> = (0..n).filter(|&i| self.is_free(i)).collect();

        if free.len() > 1 {
            let mut best = None;
            let mut gap = -1.0;
            for &i in &free {
                let g = (self.errors[i] - e2).abs();
                if g > gap {
                    gap = g;
                    best = Some(i);
                }
            }
            if let Some(i1) = best {
                if self.try_step(i1, i2, budget) {
                    return true;
                }
            }
        }
        if !free.is_empty() {
            let start = rng.random_range(0..free.len());
            for k in 0..free.len() {
                if *budget == 0 {
                    return false;
                }
                if self.try_step(free[(start + k) % free.len()], i2, budget) {
                    return true;
                }
            }
        }
        let start = rng.random_range(0..n);
        for k in 0..n {
            if *budget == 0 {
                return false;
            }
            if self.try_step((start + k) % n, i2, budget) {
                return true;
            }
        }
        false
    }

    fn try_step(&mut self, i1: usize, i2: usize, budget: &mut usize) -> bool {
        if *budget == 0 || i1 == i2 {
            return false;
        }
        *budget -= 1;
        self.take_step(i1, i2)
    }

    fn max_violation(&self) -> f64 {
        (0..self.alpha.len())
            .map(|i| {
                let r = self.errors[i] * self.y[i];
                let mut v: f64 = 0.0;
                if self.alpha[i] < self.c {
                    v = v.max(-r);
                }
                if self.alpha[i] > 0.0 {
                    v = v.max(r);
                }
                v
            })
            .fold(0.0, f64::max)
    }
}

/// Trains a binary SVM on labels in `{−1, +1}`.
pub fn train(x: &Array2<f64>, y: &[f64], kernel: KernelSpec, params: &SvmParams) -> Result<SvmFit> {
    let x = checked_samples(&kernel, x)?;
    ensure_dim(x.nrows(), y.len())?;
    check_labels(y)?;
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(Error::InvalidParameter(format!("C must be positive, got {}", params.c)));
    }
    if params.tol.is_nan() || params.tol <= 0.0 {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {}", params.tol)));
    }
    let n = x.nrows();
    let view = x.view();
    let rows = row_slices(&view);
    let k = gram_unchecked(&kernel, &rows);

    let mut smo = Smo {
        k: &k,
        y,
        c: params.c,
        tol: params.tol,
        alpha: vec![0.0; n],
        errors: y.iter().map(|v| -v).collect(),
        b: 0.0,
    };
    let cap = params.max_updates.unwrap_or(100 * n);
    let mut budget = cap;
    let mut rng = seeded(params.seed);
    let mut examine_all = true;
    let mut changed = 0usize;
    while (changed > 0 || examine_all) && budget > 0 {
        changed = 0;
        if examine_all {
            for i in 0..n {
                changed += usize::from(smo.examine(i, &mut rng, &mut budget));
            }
        } else {
            for i in 0..n {
                if smo.is_free(i) {
                    changed += usize::from(smo.examine(i, &mut rng, &mut budget));
                }
            }
        }
        if examine_all {
            examine_all = false;
        } else if changed == 0 {
            examine_all = true;
        }
    }
    let max_violation = smo.max_violation();
    let converged = max_violation <= params.tol;

    // Refit the bias on the free support vectors when there are any.
    let free: Vec<usize> = (0..n).filter(|&i| smo.is_free(i)).collect();
    let bias = if free.is_empty() {
        smo.b
    } else {
        free.iter()
            .map(|&i| {
                let f: f64 = (0..n).map(|j| y[j] * smo.alpha[j] * k.get(i, j)).sum();
                y[i] - f
            })
            .sum::<f64>()
            / free.len() as f64
    };

    let sv: Vec<usize> = (0..n).filter(|&i| smo.alpha[i] > 0.0).collect();
    let sv_x = x.select(Axis(0), &sv);
    let sv_coef = sv.iter().map(|&i| y[i] * smo.alpha[i]).collect();
    Ok(SvmFit {
        model: SvmModel {
            sv_x,
            sv_coef,
            bias,
            kernel,
            c: params.c,
        },
        converged,
        updates: cap - budget,
        max_violation,
        alpha: smo.alpha,
    })
}

impl SvmModel {
    pub fn from_parts(parts: SvmParts) -> Result<Self> {
        let m = parts.sv_x.len();
        if m == 0 {
            return Err(Error::EmptyInput);
        }
        let d = parts.sv_x[0].len();
        let mut flat = Vec::with_capacity(m * d);
        for row in &parts.sv_x {
            ensure_dim(d, row.len())?;
            flat.extend_from_slice(row);
        }
        let sv_x = Array2::from_shape_vec((m, d), flat).expect("row lengths checked");
        let sv_x = checked_samples(&parts.kernel, &sv_x)?;
        ensure_dim(m, parts.sv_coef.len())?;
        ensure_finite(parts.sv_coef.iter().chain([&parts.bias, &parts.c]))?;
        Ok(SvmModel {
            sv_x,
            sv_coef: parts.sv_coef,
            bias: parts.bias,
            kernel: parts.kernel,
            c: parts.c,
        })
    }

    pub fn to_parts(&self) -> SvmParts {
        SvmParts {
            kernel: self.kernel.clone(),
            sv_x: self.sv_x.rows().into_iter().map(|r| r.to_vec()).collect(),
            sv_coef: self.sv_coef.clone(),
            bias: self.bias,
            c: self.c,
        }
    }

    pub fn support_vectors(&self) -> &Array2<f64> {
        &self.sv_x
    }

    pub fn sv_coef(&self) -> &[f64] {
        &self.sv_coef
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn dim(&self) -> usize {
        self.sv_x.ncols()
    }

    fn check_point(&self, x_star: &[f64]) -> Result<()> {
        ensure_dim(self.dim(), x_star.len())?;
        ensure_finite(x_star)
    }

    fn sv_rows(&self) -> Vec<&[f64]> {
        let view = self.sv_x.view();
        row_slices(&view)
    }

    /// `f(x) = Σᵢ yᵢαᵢ k(x, xᵢ) + b`.
    pub fn decision(&self, x_star: &[f64]) -> Result<f64> {
        self.check_point(x_star)?;
        let s: f64 = self
            .sv_rows()
            .into_iter()
            .zip(&self.sv_coef)
            .map(|(xi, c)| c * self.kernel.value(x_star, xi))
            .sum();
        Ok(s + self.bias)
    }

    /// Class label; a zero decision maps to `+1`.
    pub fn predict(&self, x_star: &[f64]) -> Result<f64> {
        Ok(if self.decision(x_star)? >= 0.0 { 1.0 } else { -1.0 })
    }

    /// Gradient of `tanh(f(x))` split into mask and kernel terms.
    pub fn smooth_decision_gradient(&self, x_star: &[f64]) -> Result<SmoothGradient> {
        let decision = self.decision(x_star)?;
        let d = self.dim();
        let mut kernel_grad = vec![0.0; d];
        let mut buf = vec![0.0; d];
        for (xi, c) in self.sv_rows().into_iter().zip(&self.sv_coef) {
            self.kernel.gradient_into(x_star, xi, &mut buf);
            kernel_grad.iter_mut().zip(&buf).for_each(|(g, b)| *g += c * b);
        }
        let t = decision.tanh();
        let mask_term = 1.0 - t * t;
        let full_grad = kernel_grad.iter().map(|g| mask_term * g).collect();
        Ok(SmoothGradient {
            decision,
            mask_term,
            kernel_grad,
            full_grad,
        })
    }

    /// `∂ tanh(f(xᵢ)) / ∂xʲ` at each row of `points`.
    pub fn smooth_gradient_field(&self, points: &Array2<f64>) -> Result<DerivField> {
        ensure_dim(self.dim(), points.ncols())?;
        let mut values = Array2::zeros(points.raw_dim());
        for (i, p) in points.axis_iter(Axis(0)).enumerate() {
            let g = self.smooth_decision_gradient(&p.to_vec())?;
            values.row_mut(i).assign(&ndarray::ArrayView1::from(&g.full_grad));
        }
        DerivField::new(values)
    }

    /// Fraction of rows whose predicted label equals `y`.
    pub fn accuracy(&self, x: &Array2<f64>, y: &[f64]) -> Result<f64> {
        ensure_dim(x.nrows(), y.len())?;
        if y.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut hits = 0usize;
        for (row, label) in x.axis_iter(Axis(0)).zip(y) {
            if self.predict(&row.to_vec())? == *label {
                hits += 1;
            }
        }
        Ok(hits as f64 / y.len() as f64)
    }
}

impl Serialize for SvmModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_parts().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SvmModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        SvmModel::from_parts(SvmParts::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// Mean held-out accuracy over `folds` folds.
pub fn cross_validate(
    x: &Array2<f64>,
    y: &[f64],
    kernel: &KernelSpec,
    params: &SvmParams,
    folds: usize,
    seed: u64,
) -> Result<f64> {
    ensure_dim(x.nrows(), y.len())?;
    let mut total = 0.0;
    for (train_idx, test_idx) in kfold_indices(x.nrows(), folds, seed)? {
        let xt = x.select(Axis(0), &train_idx);
        let yt: Vec<f64> = train_idx.iter().map(|&i| y[i]).collect();
        let fit = train(&xt, &yt, kernel.clone(), params)?;
        let xv = x.select(Axis(0), &test_idx);
        let yv: Vec<f64> = test_idx.iter().map(|&i| y[i]).collect();
        total += fit.model.accuracy(&xv, &yv)?;
    }
    Ok(total / folds as f64)
}

/// Cross-validated choice of `(C, γ)` for an RBF SVM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmGridChoice {
    pub c: f64,
    pub gamma: f64,
    pub cv_accuracy: f64,
}

/// Exhaustive grid search; ties keep the first candidate in grid order.
pub fn grid_search_rbf(
    x: &Array2<f64>,
    y: &[f64],
    cs: &[f64],
    gammas: &[f64],
    folds: usize,
    seed: u64,
) -> Result<SvmGridChoice> {
    let mut best: Option<SvmGridChoice> = None;
    for &c in cs {
        for &gamma in gammas {
            let params = SvmParams {
                c,
                seed,
                ..SvmParams::default()
            };
            let acc = cross_validate(x, y, &KernelSpec::rbf(gamma), &params, folds, seed)?;
            if best.is_none_or(|b| acc > b.cv_accuracy) {
                best = Some(SvmGridChoice {
                    c,
                    gamma,
                    cv_accuracy: acc,
                });
            }
        }
    }
    best.ok_or_else(|| Error::InvalidParameter("empty hyperparameter grid".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    const RBF_AT_ONE: f64 = 0.606_530_659_712_633_4;

    #[test]
    fn separable_pair() {
        let x = array![[-1.0], [1.0]];
        let fit = train(&x, &[-1.0, 1.0], KernelSpec::Linear, &SvmParams::with_c(10.0)).unwrap();
        assert!(fit.converged);
        let m = &fit.model;
        assert!(m.decision(&[-1.0]).unwrap() < 0.0);
        assert!(m.decision(&[1.0]).unwrap() > 0.0);
        assert_eq!(m.predict(&[-1.0]).unwrap(), -1.0);
        let dual: f64 = m.sv_coef().iter().sum();
        assert!(dual.abs() < 1e-6);
    }

    #[test]
    fn xor_with_rbf() {
        let x = array![[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]];
        let y = [1.0, 1.0, -1.0, -1.0];
        let fit = train(&x, &y, KernelSpec::rbf(2.0), &SvmParams::with_c(10.0)).unwrap();
        assert_eq!(fit.model.accuracy(&x, &y).unwrap(), 1.0);
    }

    #[test]
    fn contradictory_labels_saturate() {
        let x = array![[0.0], [0.0], [2.0]];
        let y = [1.0, -1.0, 1.0];
        let c = 0.5;
        let fit = train(&x, &y, KernelSpec::rbf(1.0), &SvmParams::with_c(c)).unwrap();
        assert!(fit.alpha.iter().any(|a| (a - c).abs() < 1e-12));
        assert!(fit.model.decision(&[1.0]).unwrap().is_finite());
    }

    #[test]
    fn single_class_rejected() {
        let x = array![[0.0], [1.0]];
        let r = train(&x, &[1.0, 1.0], KernelSpec::Linear, &SvmParams::default());
        assert!(matches!(r, Err(Error::SingleClassInput)));
        let r = train(&x, &[1.0, 0.0], KernelSpec::Linear, &SvmParams::default());
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn far_point_decision_is_bias() {
        let x = array![[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0], [0.2, 0.1]];
        let y = [1.0, 1.0, -1.0, -1.0, 1.0];
        let fit = train(&x, &y, KernelSpec::rbf(2.0), &SvmParams::with_c(5.0)).unwrap();
        let m = fit.model;
        assert!((m.decision(&[1e3, 1e3]).unwrap() - m.bias()).abs() < 1e-12);
    }

    #[test]
    fn smooth_gradient_single_sv() {
        let m = SvmModel::from_parts(SvmParts {
            kernel: KernelSpec::rbf(0.5),
            sv_x: vec![vec![0.0, 0.0]],
            sv_coef: vec![1.0],
            bias: 0.0,
            c: 1.0,
        })
        .unwrap();
        let g = m.smooth_decision_gradient(&[1.0, 0.0]).unwrap();
        assert!((g.decision - RBF_AT_ONE).abs() < 1e-15);
        assert!((g.kernel_grad[0] + RBF_AT_ONE).abs() < 1e-15);
        assert_eq!(g.kernel_grad[1], 0.0);
        let t = RBF_AT_ONE.tanh();
        assert!((g.mask_term - (1.0 - t * t)).abs() < 1e-15);
        assert_eq!(g.full_grad[0], g.mask_term * g.kernel_grad[0]);
    }

    #[test]
    fn mask_saturates_and_opens() {
        let m = SvmModel::from_parts(SvmParts {
            kernel: KernelSpec::Linear,
            sv_x: vec![vec![1.0]],
            sv_coef: vec![1.0],
            bias: 0.0,
            c: 1.0,
        })
        .unwrap();
        let deep = m.smooth_decision_gradient(&[50.0]).unwrap();
        assert!(deep.mask_term < 1e-12 && deep.full_grad[0].abs() < 1e-12);
        let edge = m.smooth_decision_gradient(&[0.0]).unwrap();
        assert_eq!(edge.mask_term, 1.0);
        assert_eq!(edge.full_grad, edge.kernel_grad);
        assert_eq!(m.predict(&[0.0]).unwrap(), 1.0);
    }

    #[test]
    fn json_round_trip() {
        let x = array![[-1.0, 0.2], [1.0, 0.1], [0.5, -0.3]];
        let fit = train(&x, &[-1.0, 1.0, 1.0], KernelSpec::rbf(0.7), &SvmParams::default()).unwrap();
        let json = serde_json::to_string(&fit.model).unwrap();
        let back: SvmModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, fit.model);
    }
}
