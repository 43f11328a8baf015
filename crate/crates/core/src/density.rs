//! Kernel density estimation and density-ridge detection.
//!
//! Every estimate has the form `p̂(x) = Σᵢ wᵢ k(x, xᵢ)`:
//!
//! - Parzen: `wᵢ = 1/n`.
//! - KECA: `w = E_r E_rᵀ 𝟙 / n`, where `E_r` holds `r` eigenvectors of the
//!   Gram matrix. [`DensityMode::Keca`] keeps the largest eigenvalues,
//!   [`DensityMode::EntropyKeca`] keeps the largest information-potential
//!   contributions `λᵢ (eᵢᵀ𝟙)²`. With `r = n` both reduce to Parzen.
//!
//! The kernel is used unnormalized; derivatives and ridge scores do not
//! depend on a global scale.
//!
//! A point lies on a density ridge when the gradient is orthogonal to a set
//! of Hessian eigenvectors. [`ridge_scores`] measures the size of that
//! projection relative to the gradient norm.

use std::f64::consts::PI;

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, ensure_finite, Error, Result};
use crate::kernels::{checked_samples, gram_unchecked, median_heuristic_gamma, row_slices, KernelSpec};
use crate::numerics::{sym_eig, SymMatrix};

/// Added to `‖g‖` in the ridge score denominator.
pub const RIDGE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityMode {
    Parzen,
    Keca { r: usize },
    EntropyKeca { r: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityModel {
    x_train: Array2<f64>,
    kernel: KernelSpec,
    weights: Vec<f64>,
    mode: DensityMode,
}

/// Serializable state of a [`DensityModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityParts {
    pub kernel: KernelSpec,
    pub mode: DensityMode,
    pub x_train: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl DensityModel {
    pub fn fit(x: &Array2<f64>, kernel: KernelSpec, mode: DensityMode) -> Result<Self> {
        let x = checked_samples(&kernel, x)?;
        let n = x.nrows();
        let weights = match mode {
            DensityMode::Parzen => vec![1.0 / n as f64; n],
            DensityMode::Keca { r } | DensityMode::EntropyKeca { r } => {
                if r == 0 || r > n {
                    return Err(Error::InvalidRank { rank: r, max: n });
                }
                let view = x.view();
                let k = gram_unchecked(&kernel, &row_slices(&view));
                keca_weights(&k, r, matches!(mode, DensityMode::EntropyKeca { .. }))?
            }
        };
        Ok(DensityModel {
            x_train: x,
            kernel,
            weights,
            mode,
        })
    }

    /// Fits with an RBF kernel whose `γ` comes from the median heuristic.
    pub fn fit_rbf_median(x: &Array2<f64>, mode: DensityMode) -> Result<Self> {
        let gamma = median_heuristic_gamma(x)?;
        Self::fit(x, KernelSpec::rbf(gamma), mode)
    }

    pub fn from_parts(parts: DensityParts) -> Result<Self> {
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
        let x_train = checked_samples(&parts.kernel, &x)?;
        ensure_dim(n, parts.weights.len())?;
        ensure_finite(&parts.weights)?;
        Ok(DensityModel {
            x_train,
            kernel: parts.kernel,
            weights: parts.weights,
            mode: parts.mode,
        })
    }

    pub fn to_parts(&self) -> DensityParts {
        DensityParts {
            kernel: self.kernel.clone(),
            mode: self.mode,
            x_train: self.x_train.rows().into_iter().map(|r| r.to_vec()).collect(),
            weights: self.weights.clone(),
        }
    }

    pub fn x_train(&self) -> &Array2<f64> {
        &self.x_train
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mode(&self) -> DensityMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.x_train.ncols()
    }

    /// Returns a copy with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut m = self.clone();
        m.weights.iter_mut().for_each(|w| *w *= factor);
        m
    }

    /// Factor turning the RBF kernel into a Gaussian probability density,
    /// `(γ/π)^{d/2}`. `None` for other kernels.
    pub fn normalizing_constant(&self) -> Option<f64> {
        match self.kernel {
            KernelSpec::Rbf { gamma } => Some((gamma / PI).powf(self.dim() as f64 / 2.0)),
            _ => None,
        }
    }

    fn check_point(&self, x_star: &[f64]) -> Result<()> {
        ensure_dim(self.dim(), x_star.len())?;
        ensure_finite(x_star)
    }

    fn rows(&self) -> Vec<&[f64]> {
        let view = self.x_train.view();
        row_slices(&view)
    }

    pub fn density_at(&self, x_star: &[f64]) -> Result<f64> {
        self.check_point(x_star)?;
        Ok(self
            .rows()
            .into_iter()
            .zip(&self.weights)
            .map(|(xi, w)| w * self.kernel.value(x_star, xi))
            .sum())
    }

    pub fn density_gradient(&self, x_star: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x_star)?;
        let d = self.dim();
        let mut grad = vec![0.0; d];
        let mut buf = vec![0.0; d];
        for (xi, w) in self.rows().into_iter().zip(&self.weights) {
            self.kernel.gradient_into(x_star, xi, &mut buf);
            grad.iter_mut().zip(&buf).for_each(|(g, b)| *g += w * b);
        }
        Ok(grad)
    }

    pub fn density_hessian(&self, x_star: &[f64]) -> Result<SymMatrix> {
        self.check_point(x_star)?;
        let d = self.dim();
        let mut acc = vec![0.0; d * d];
        let mut buf = vec![0.0; d * d];
        for (xi, w) in self.rows().into_iter().zip(&self.weights) {
            self.kernel.hessian_into(x_star, xi, &mut buf);
            acc.iter_mut().zip(&buf).for_each(|(a, b)| *a += w * b);
        }
        Ok(SymMatrix::from_upper_fn(d, |i, j| acc[i * d + j]))
    }

    /// Densities at every row of `points`.
    pub fn density_many(&self, points: &Array2<f64>) -> Result<Vec<f64>> {
        ensure_dim(self.dim(), points.ncols())?;
        points
            .axis_iter(Axis(0))
            .into_par_iter()
            .map(|p| self.density_at(&p.to_vec()))
            .collect()
    }
}

fn keca_weights(k: &SymMatrix, r: usize, by_entropy: bool) -> Result<Vec<f64>> {
    let n = k.dim();
    let eig = sym_eig(k)?;
    let sums: Vec<f64> = (0..n).map(|c| eig.vectors.column(c).sum()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    if by_entropy {
        let score: Vec<f64> = (0..n).map(|c| eig.values[c] * sums[c] * sums[c]).collect();
        order.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
    }
    let mut w = vec![0.0; n];
    for &c in &order[..r] {
        let col = eig.vectors.column(c);
        for (wi, e) in w.iter_mut().zip(col.iter()) {
            *wi += e * sums[c];
        }
    }
    w.iter_mut().for_each(|v| *v /= n as f64);
    Ok(w)
}

impl Serialize for DensityModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_parts().serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        DensityModel::from_parts(DensityParts::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// Which Hessian eigenvectors the gradient is projected onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RidgeConvention {
    /// The `r_ridge` eigenvectors with the smallest (most negative)
    /// eigenvalues, i.e. the directions across the ridge.
    #[default]
    Trailing,
    /// The `r_ridge` eigenvectors with the largest eigenvalues.
    Leading,
}

/// How the ridge selection cut-off is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "lowercase")]
pub enum RidgeThreshold {
    /// Empirical quantile `q ∈ [0, 1]` of the scores (linear interpolation).
    Quantile { q: f64 },
    /// Fixed tolerance on the score.
    Absolute { tol: f64 },
}

impl Default for RidgeThreshold {
    fn default() -> Self {
        RidgeThreshold::Quantile { q: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeResult {
    pub scores: Vec<f64>,
    /// Indices of points whose score is at most `threshold`, ascending.
    pub selected: Vec<usize>,
    pub threshold: f64,
    pub rule: RidgeThreshold,
}

/// Ridge score of a single point: `‖E_rᵀ g‖ / (‖g‖ + ε)`.
pub fn ridge_score(
    model: &DensityModel,
    x_star: &[f64],
    r_ridge: usize,
    convention: RidgeConvention,
) -> Result<f64> {
    let d = model.dim();
    if r_ridge == 0 || r_ridge > d {
        return Err(Error::InvalidRank { rank: r_ridge, max: d });
    }
    let g = model.density_gradient(x_star)?;
    let h = model.density_hessian(x_star)?;
    let eig = sym_eig(&h)?;
    let cols: Vec<usize> = match convention {
        RidgeConvention::Trailing => (d - r_ridge..d).collect(),
        RidgeConvention::Leading => (0..r_ridge).collect(),
    };
    let proj: f64 = cols
        .into_iter()
        .map(|c| {
            let p: f64 = eig.vectors.column(c).iter().zip(&g).map(|(e, gi)| e * gi).sum();
            p * p
        })
        .sum::<f64>()
        .sqrt();
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(proj / (norm + RIDGE_EPS))
}

/// Scores every row of `points` and selects the ridge candidates.
pub fn ridge_scores(
    model: &DensityModel,
    points: &Array2<f64>,
    r_ridge: usize,
    convention: RidgeConvention,
    rule: RidgeThreshold,
) -> Result<RidgeResult> {
    let d = model.dim();
    if r_ridge == 0 || r_ridge > d {
        return Err(Error::InvalidRank { rank: r_ridge, max: d });
    }
    ensure_dim(d, points.ncols())?;
    if points.nrows() == 0 {
        return Err(Error::EmptyInput);
    }
    let scores: Vec<f64> = points
        .axis_iter(Axis(0))
        .into_par_iter()
        .map(|p| ridge_score(model, &p.to_vec(), r_ridge, convention))
        .collect::<Result<_>>()?;
    let threshold = match rule {
        RidgeThreshold::Quantile { q } => {
            if !(0.0..=1.0).contains(&q) {
                return Err(Error::InvalidParameter(format!("quantile must lie in [0, 1], got {q}")));
            }
            quantile(&scores, q)
        }
        RidgeThreshold::Absolute { tol } => {
            if tol.is_nan() || tol < 0.0 {
                return Err(Error::InvalidParameter(format!("tolerance must be >= 0, got {tol}")));
            }
            tol
        }
    };
    let selected = (0..scores.len()).filter(|&i| scores[i] <= threshold).collect();
    Ok(RidgeResult {
        scores,
        selected,
        threshold,
        rule,
    })
}

fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}
