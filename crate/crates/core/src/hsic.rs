//! Hilbert-Schmidt independence criterion and its input derivatives.
//!
//! The empirical estimate is `HSIC = Tr(K H L H) / n²` with Gram matrices
//! `K` on `X`, `L` on `Y` and the centering matrix `H = I − 𝟙𝟙ᵀ/n`. With
//! `A = HLH`, the derivative with respect to one coordinate of one sample is
//!
//! ```text
//! ∂HSIC/∂xᵢ^q = (2/n²) Σⱼ Aᵢⱼ ∂k(xᵢ, xⱼ)/∂xᵢ^q
//! ```
//!
//! and symmetrically for `Y`. The per-sample vectors form a field that shows
//! where moving a sample would raise or lower the dependence; [`unfold`]
//! follows it.

use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::kernels::{checked_samples, gram_unchecked, median_heuristic_gamma, row_slices, KernelSpec};
use crate::rng::stream;

/// Smallest accepted number of permutations.
pub const MIN_PERMUTATIONS: usize = 19;

/// Step halvings tried per unfold iteration.
pub const MAX_HALVINGS: usize = 20;


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HsicConfig {
    pub kernel_x: KernelSpec,
    pub kernel_y: KernelSpec,
}

impl HsicConfig {
    pub fn new(kernel_x: KernelSpec, kernel_y: KernelSpec) -> Result<Self> {
        let cfg = HsicConfig { kernel_x, kernel_y };
        cfg.validate()?;
        Ok(cfg)
    }

    /// RBF kernels on both sides with median-heuristic bandwidths.
    pub fn median_heuristic(x: &Array2<f64>, y: &Array2<f64>) -> Result<Self> {
        Self::new(
            KernelSpec::rbf(median_heuristic_gamma(x)?),
            KernelSpec::rbf(median_heuristic_gamma(y)?),
        )
    }

    pub fn swapped(&self) -> Self {
        HsicConfig {
            kernel_x: self.kernel_y.clone(),
            kernel_y: self.kernel_x.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for k in [&self.kernel_x, &self.kernel_y] {
            k.validate()?;
            if !k.is_psd() {
                return Err(Error::InvalidParameter(format!(
                    "HSIC needs positive semi-definite kernels, got {}",
                    k.family_name()
                )));
            }
        }
        Ok(())
    }
}

/// Per-sample derivatives of HSIC.
#[derive(Debug, Clone, PartialEq)]
pub struct HsicField {
    pub grad_x: Array2<f64>,
    pub grad_y: Array2<f64>,
    /// `√(Σ_q (∂/∂xᵢ^q)² + Σ_q (∂/∂yᵢ^q)²)`.
    pub magnitude: Vec<f64>,
}

struct Prepared {
    x: Array2<f64>,
    y: Array2<f64>,
    k: Array2<f64>,
    l: Array2<f64>,
}

fn prepare(x: &Array2<f64>, y: &Array2<f64>, cfg: &HsicConfig) -> Result<Prepared> {
    cfg.validate()?;
    if x.nrows() != y.nrows() {
        return Err(Error::SampleCountMismatch(x.nrows(), y.nrows()));
    }
    if x.nrows() < 2 {
        return Err(Error::InvalidParameter(format!("HSIC needs at least 2 samples, got {}", x.nrows())));
    }
    let x = checked_samples(&cfg.kernel_x, x)?;
    let y = checked_samples(&cfg.kernel_y, y)?;
    let k = gram_unchecked(&cfg.kernel_x, &row_slices(&x.view())).to_array();
    let l = gram_unchecked(&cfg.kernel_y, &row_slices(&y.view())).to_array();
    Ok(Prepared { x, y, k, l })
}

fn centering(n: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, n), |(i, j)| f64::from(u8::from(i == j)) - 1.0 / n as f64)
}

/// `HMH`, with entries at round-off level of `max|M|` flushed to zero so
/// that a constant kernel matrix centers to exactly zero.
fn centered(m: &Array2<f64>) -> Array2<f64> {
    let n = m.nrows();
    let h = centering(n);
    let mut c = h.dot(m).dot(&h);
    let scale = m.iter().fold(0.0, |a: f64, v| a.max(v.abs()));
    let tol = 4.0 * n as f64 * f64::EPSILON * scale;
    c.mapv_inplace(|v| if v.abs() <= tol { 0.0 } else { v });
    c
}

/// Empirical HSIC, `Tr(K H L H) / n²`.
pub fn hsic(x: &Array2<f64>, y: &Array2<f64>, cfg: &HsicConfig) -> Result<f64> {
    let p = prepare(x, y, cfg)?;
    let n = p.k.nrows() as f64;
    let a = centered(&p.l);
    Ok(((&p.k * &a).sum() / (n * n)).max(0.0))
}

fn side_gradient(spec: &KernelSpec, x: &Array2<f64>, a: &Array2<f64>) -> Array2<f64> {
    let n = x.nrows();
    let d = x.ncols();
    let view = x.view();
    let rows = row_slices(&view);
    let scale = 2.0 / (n * n) as f64;
    let mut out = Array2::zeros((n, d));
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut gi)| {
            let mut buf = vec![0.0; d];
            for j in 0..n {
                spec.gradient_into(rows[i], rows[j], &mut buf);
                let w = scale * a[[i, j]];
                gi.iter_mut().zip(&buf).for_each(|(g, b)| *g += w * b);
            }
        });
    out
}

/// Derivatives of HSIC with respect to every coordinate of every sample.
pub fn hsic_grad(x: &Array2<f64>, y: &Array2<f64>, cfg: &HsicConfig) -> Result<HsicField> {
    let p = prepare(x, y, cfg)?;
    let grad_x = side_gradient(&cfg.kernel_x, &p.x, &centered(&p.l));
    let grad_y = side_gradient(&cfg.kernel_y, &p.y, &centered(&p.k));
    let magnitude = grad_x
        .axis_iter(Axis(0))
        .zip(grad_y.axis_iter(Axis(0)))
        .map(|(gx, gy)| (gx.dot(&gx) + gy.dot(&gy)).sqrt())
        .collect();
    Ok(HsicField {
        grad_x,
        grad_y,
        magnitude,
    })
}

/// `∂HSIC/∂X` for an RBF kernel on `X`, through the trace form
/// `−(2/(σ²n²)) diag((K ∘ M^q) HLH)` with `M^q_ij = xᵢ^q − xⱼ^q` and
/// `σ² = 1/(2γ)`.
pub fn hsic_grad_x_rbf(x: &Array2<f64>, y: &Array2<f64>, cfg: &HsicConfig) -> Result<Array2<f64>> {
    let KernelSpec::Rbf { gamma } = cfg.kernel_x else {
        return Err(Error::InvalidParameter(format!(
            "closed form needs an rbf kernel on X, got {}",
            cfg.kernel_x.family_name()
        )));
    };
    let p = prepare(x, y, cfg)?;
    let n = p.x.nrows();
    let sigma2 = 1.0 / (2.0 * gamma);
    let a = centered(&p.l);
    let mut out = Array2::zeros(p.x.raw_dim());
    for q in 0..p.x.ncols() {
        let col = p.x.column(q);
        let km = Array2::from_shape_fn((n, n), |(i, j)| p.k[[i, j]] * (col[i] - col[j]));
        let prod = km.dot(&a);
        let scale = -2.0 / (sigma2 * (n * n) as f64);
        out.column_mut(q).assign(&(prod.diag().to_owned() * scale));
    }
    Ok(out)
}

/// Permutation p-value `(1 + #{HSIC_π ≥ HSIC}) / (n_perm + 1)`, permuting
/// the rows of `Y`. Permutation `p` draws from its own random stream, so the
/// result does not depend on the thread count.
pub fn permutation_pvalue(
    x: &Array2<f64>,
    y: &Array2<f64>,
    cfg: &HsicConfig,
    n_perm: usize,
    seed: u64,
) -> Result<f64> {
    if n_perm < MIN_PERMUTATIONS {
        return Err(Error::InvalidParameter(format!(
            "at least {MIN_PERMUTATIONS} permutations are required, got {n_perm}"
        )));
    }
    let p = prepare(x, y, cfg)?;
    let n = p.x.nrows();
    let kc = centered(&p.k);
    let stat = |perm: &[usize]| -> f64 {
        let mut s = 0.0;
        for a in 0..n {
            let la = p.l.row(perm[a]);
            for b in 0..n {
                s += kc[[a, b]] * la[perm[b]];
            }
        }
        s
    };
    let identity: Vec<usize> = (0..n).collect();
    let observed = stat(&identity);
    let exceed: usize = (0..n_perm as u64)
        .into_par_iter()
        .map(|i| {
            let mut perm = identity.clone();
            perm.shuffle(&mut stream(seed, i));
            usize::from(stat(&perm) >= observed)
        })
        .sum();
    Ok((1 + exceed) as f64 / (n_perm + 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Maximize,
    Minimize,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Maximize => 1.0,
            Direction::Minimize => -1.0,
        }
    }

    fn accepts(self, old: f64, new: f64) -> bool {
        match self {
            Direction::Maximize => new >= old,
            Direction::Minimize => new <= old,
        }
    }
}

/// One recorded state of [`unfold`]. State 0 is the input.
#[derive(Debug, Clone, PartialEq)]
pub struct UnfoldState {
    pub iter: usize,
    pub x: Array2<f64>,
    pub y: Array2<f64>,
    pub hsic: f64,
    /// Step length accepted to reach this state (0 for the input).
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<UnfoldState>,
    pub direction: Direction,
    /// Set when an iteration after the first could not find an acceptable
    /// step and the run stopped early.
    pub stalled: bool,
}

impl Trajectory {
    pub fn initial(&self) -> &UnfoldState {
        &self.states[0]
    }

    pub fn last(&self) -> &UnfoldState {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn hsic_values(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.hsic).collect()
    }
}

/// Moves all samples along the HSIC gradient (or against it) for `iters`
/// iterations. Each iteration starts from the base step and halves it, up
/// to [`MAX_HALVINGS`] times, until HSIC does not move the wrong way.
/// The kernels in `cfg` stay fixed throughout.
///
/// The base step defaults to `0.1 / max_i |Sᵢ|` on the initial field.
pub fn unfold(
    x: &Array2<f64>,
    y: &Array2<f64>,
    cfg: &HsicConfig,
    direction: Direction,
    step: Option<f64>,
    iters: usize,
) -> Result<Trajectory> {
    if iters == 0 {
        return Err(Error::InvalidParameter("iters must be at least 1".into()));
    }
    if let Some(s) = step {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidParameter(format!("step must be positive, got {s}")));
        }
    }
    let mut cur_x = x.as_standard_layout().into_owned();
    let mut cur_y = y.as_standard_layout().into_owned();
    let mut cur_h = hsic(&cur_x, &cur_y, cfg)?;
    let mut field = hsic_grad(&cur_x, &cur_y, cfg)?;
    let peak = field.magnitude.iter().fold(0.0, |a: f64, b| a.max(*b));
    let base = match step {
        Some(s) => s,
        None if peak > 0.0 => 0.1 / peak,
        None => 1.0,
    };
    ensure_finite([&base])?;

    let mut states = vec![UnfoldState {
        iter: 0,
        x: cur_x.clone(),
        y: cur_y.clone(),
        hsic: cur_h,
        step: 0.0,
    }];
    let sign = direction.sign();
    let mut stalled = false;
    for it in 1..=iters {
        let moving = field.grad_x.iter().chain(field.grad_y.iter()).any(|g| *g != 0.0);
        let mut accepted = None;
        if moving {
            let mut s = base;
            for _ in 0..=MAX_HALVINGS {
                let nx = &cur_x + &(&field.grad_x * (sign * s));
                let ny = &cur_y + &(&field.grad_y * (sign * s));
                let h = hsic(&nx, &ny, cfg)?;
                if direction.accepts(cur_h, h) {
                    accepted = Some((nx, ny, h, s));
                    break;
                }
                s *= 0.5;
            }
        } else {
            accepted = Some((cur_x.clone(), cur_y.clone(), cur_h, 0.0));
        }
        let Some((nx, ny, h, s)) = accepted else {
            if it == 1 {
                return Err(Error::StepCollapse);
            }
            stalled = true;
            break;
        };
        cur_x = nx;
        cur_y = ny;
        cur_h = h;
        if s > 0.0 {
            field = hsic_grad(&cur_x, &cur_y, cfg)?;
        }
        states.push(UnfoldState {
            iter: it,
            x: cur_x.clone(),
            y: cur_y.clone(),
            hsic: cur_h,
            step: s,
        });
    }
    Ok(Trajectory {
        states,
        direction,
        stalled,
    })
}

/// Mean per-sample gradient magnitude, a scalar summary of a field.
pub fn mean_magnitude(field: &HsicField) -> f64 {
    Array1::from(field.magnitude.clone()).mean().unwrap_or(0.0)
}
