//! Summaries of a derivative field `∂f(xᵢ)/∂xʲ` sampled at `n` points.
//!
//! Derivatives are squared before averaging so that slopes of opposite sign
//! do not cancel.

use ndarray::{Array2, Axis};

use crate::error::{ensure_finite, Error, Result};

/// `values[[i, j]] = ∂f(xᵢ)/∂xʲ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivField {
    values: Array2<f64>,
}

impl DerivField {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::EmptyInput);
        }
        ensure_finite(values.iter())?;
        Ok(DerivField { values })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn d(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    /// Feature sensitivity `sʲ = (1/n) Σᵢ (∂f(xᵢ)/∂xʲ)²`.
    pub fn feature_sensitivity(&self) -> Vec<f64> {
        self.values
            .mapv(|v| v * v)
            .mean_axis(Axis(0))
            .expect("field has at least one row")
            .to_vec()
    }

    /// Point sensitivity `qᵢ = (1/d) Σⱼ (∂f(xᵢ)/∂xʲ)²`.
    pub fn point_sensitivity(&self) -> Vec<f64> {
        self.values
            .mapv(|v| v * v)
            .mean_axis(Axis(1))
            .expect("field has at least one column")
            .to_vec()
    }
}

pub fn feature_sensitivity(field: &DerivField) -> Vec<f64> {
    field.feature_sensitivity()
}

pub fn point_sensitivity(field: &DerivField) -> Vec<f64> {
    field.point_sensitivity()
}
