//! Kernel machines with analytic derivatives with respect to their inputs.
//!
//! Most kernel methods produce a function of the form
//! `f(x) = Σᵢ αᵢ k(x, xᵢ)`. Since `f` is linear in the dual weights, its
//! gradient and Hessian only require derivatives of the kernel itself. This
//! crate provides those derivatives for the common kernel families and puts
//! them to work:
//!
//! - [`gpr`]: Gaussian process regression, its mean gradient, Hessian and
//!   the regularizer norms `‖f‖²_H`, `‖f‖²₂`, `‖∇f‖²₂`, `‖∇²f‖²₂`.
//! - [`svm`]: soft-margin SVM trained with SMO, and the gradient of the
//!   tanh-smoothed decision function split into a margin mask and a kernel
//!   term.
//! - [`density`]: Parzen and kernel-entropy density estimates with gradient,
//!   Hessian and density-ridge detection.
//! - [`hsic`]: the Hilbert-Schmidt independence criterion, its gradient with
//!   respect to every sample, a permutation test and gradient-based
//!   (in)dependence maximization.
//! - [`sensitivity`]: reductions of derivative fields into per-feature and
//!   per-sample sensitivities.
//!
//! ```
//! use kdx_core::{gpr::GprModel, KernelSpec};
//! use ndarray::array;
//!
//! let x = array![[0.0], [0.5], [1.0]];
//! let y = [0.0, 1.0, 0.0];
//! let model = GprModel::fit(&x, &y, KernelSpec::rbf(2.0), 0.0).unwrap();
//! let slope = model.mean_gradient(&[0.25]).unwrap();
//! assert!(slope[0] > 0.0);
//! ```

pub mod density;
pub mod error;
pub mod gpr;
pub mod hsic;
pub mod kernels;
pub mod numerics;
pub mod sensitivity;
pub mod svm;
pub mod toydata;

mod cv;
mod rng;

pub use cv::kfold_indices;
pub use error::{Error, Result};
pub use kernels::{GramMatrix, KernelSpec};
pub use numerics::SymMatrix;
pub use sensitivity::DerivField;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/kernels.md")]
    mod kernels {}
    #[doc = include_str!("../../../book/src/sensitivity.md")]
    mod sensitivity {}
    #[doc = include_str!("../../../book/src/gpr.md")]
    mod gpr {}
    #[doc = include_str!("../../../book/src/svm.md")]
    mod svm {}
    #[doc = include_str!("../../../book/src/density.md")]
    mod density {}
    #[doc = include_str!("../../../book/src/hsic.md")]
    mod hsic {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
