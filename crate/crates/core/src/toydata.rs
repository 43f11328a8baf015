//! Seeded toy datasets.
//!
//! All generators are deterministic for a given [`ToySpec`]. `noise` is the
//! standard deviation of additive Gaussian noise: on the target for the
//! regression sets and on both coordinates for the classification and
//! paired sets.
//!
//! | name | inputs | target |
//! |------|--------|--------|
//! | `line`, `parabola`, `sine`, `x_sin_x`, `line_plus_sine` | grid on [−5, 5] | x, x², sin x, x sin x, x + sin x |
//! | `two_moons` | two interleaved half circles, radius 1, offset 0.5 | ±1 |
//! | `circles` | concentric circles of radius 1 and 0.5 | ±1 |
//! | `ellipsoids` | two overlapping elongated Gaussian blobs | ±1 |
//! | `noisy_ring` | x = r cos t, t ~ U[0, 2π] | y = r sin t |
//! | `sinusoid_pair` | x ~ U[−1, 1] | sin(3x) |
//! | `piecewise_plane` | x₁, x₂ ~ U[−20, 20] | a x₁ + b x₂ |
//!
//! For `piecewise_plane` the slopes are `a = 5, b = 1` where `x₁ ≥ 0` and
//! `a = b = 1` elsewhere.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;

/// Frequency of `sinusoid_pair`.
pub const SINUSOID_FREQ: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dataset {
    Line,
    Parabola,
    Sine,
    XSinX,
    LinePlusSine,
    TwoMoons,
    Circles,
    Ellipsoids,
    NoisyRing,
    SinusoidPair,
    PiecewisePlane,
}

impl Dataset {
    pub const ALL: [Dataset; 11] = [
        Dataset::Line,
        Dataset::Parabola,
        Dataset::Sine,
        Dataset::XSinX,
        Dataset::LinePlusSine,
        Dataset::TwoMoons,
        Dataset::Circles,
        Dataset::Ellipsoids,
        Dataset::NoisyRing,
        Dataset::SinusoidPair,
        Dataset::PiecewisePlane,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Dataset::Line => "line",
            Dataset::Parabola => "parabola",
            Dataset::Sine => "sine",
            Dataset::XSinX => "x_sin_x",
            Dataset::LinePlusSine => "line_plus_sine",
            Dataset::TwoMoons => "two_moons",
            Dataset::Circles => "circles",
            Dataset::Ellipsoids => "ellipsoids",
            Dataset::NoisyRing => "noisy_ring",
            Dataset::SinusoidPair => "sinusoid_pair",
            Dataset::PiecewisePlane => "piecewise_plane",
        }
    }

    pub fn target(self) -> Target {
        match self {
            Dataset::TwoMoons | Dataset::Circles | Dataset::Ellipsoids => Target::Labels,
            Dataset::NoisyRing | Dataset::SinusoidPair => Target::Paired,
            _ => Target::Regression,
        }
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dataset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Dataset::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::UnknownDataset(s.to_string()))
    }
}

/// What the `y` column means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    /// Real-valued regression target.
    Regression,
    /// Class labels in `{−1, +1}`.
    Labels,
    /// Second variable of a dependence pair.
    Paired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToySpec {
    pub dataset: Dataset,
    pub n: usize,
    pub noise: f64,
    pub seed: u64,
}

impl ToySpec {
    pub fn new(dataset: Dataset, n: usize, noise: f64, seed: u64) -> Self {
        ToySpec {
            dataset,
            n,
            noise,
            seed,
        }
    }

    /// Looks the dataset up by name.
    pub fn named(name: &str, n: usize, noise: f64, seed: u64) -> Result<Self> {
        Ok(Self::new(name.parse()?, n, noise, seed))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyData {
    pub x: Array2<f64>,
    pub y: Vec<f64>,
    pub target: Target,
}

struct Noise {
    rng: ChaCha8Rng,
    sd: f64,
}

impl Noise {
    fn draw(&mut self) -> f64 {
        if self.sd == 0.0 {
            return 0.0;
        }
        let z: f64 = StandardNormal.sample(&mut self.rng);
        self.sd * z
    }
}

fn grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Sizes of the two classes; the first gets the odd sample.
fn halves(n: usize) -> (usize, usize) {
    (n.div_ceil(2), n / 2)
}

pub fn generate(spec: &ToySpec) -> Result<ToyData> {
    if spec.n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if !(spec.noise >= 0.0 && spec.noise.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise must be >= 0, got {}", spec.noise)));
    }
    let n = spec.n;
    let mut noise = Noise {
        rng: seeded(spec.seed),
        sd: spec.noise,
    };
    let target = spec.dataset.target();
    let (rows, y): (Vec<Vec<f64>>, Vec<f64>) = match spec.dataset {
        Dataset::Line | Dataset::Parabola | Dataset::Sine | Dataset::XSinX | Dataset::LinePlusSine => {
            let f: fn(f64) -> f64 = match spec.dataset {
                Dataset::Line => |x| x,
                Dataset::Parabola => |x| x * x,
                Dataset::Sine => f64::sin,
                Dataset::XSinX => |x| x * x.sin(),
                _ => |x| x + x.sin(),
            };
            grid(n, -5.0, 5.0)
                .into_iter()
                .map(|x| (vec![x], f(x) + noise.draw()))
                .unzip()
        }
        Dataset::TwoMoons => {
            let (a, b) = halves(n);
            let mut out = Vec::with_capacity(n);
            for t in grid(a, 0.0, PI) {
                out.push((vec![t.cos() + noise.draw(), t.sin() + noise.draw()], 1.0));
            }
            for t in grid(b, 0.0, PI) {
                out.push((vec![1.0 - t.cos() + noise.draw(), 0.5 - t.sin() + noise.draw()], -1.0));
            }
            out.into_iter().unzip()
        }
        Dataset::Circles => {
            let (a, b) = halves(n);
            let ring = |m: usize| (0..m).map(move |i| 2.0 * PI * i as f64 / m as f64);
            let mut out = Vec::with_capacity(n);
            for t in ring(a) {
                out.push((vec![t.cos() + noise.draw(), t.sin() + noise.draw()], -1.0));
            }
            for t in ring(b) {
                out.push((vec![0.5 * t.cos() + noise.draw(), 0.5 * t.sin() + noise.draw()], 1.0));
            }
            out.into_iter().unzip()
        }
        Dataset::Ellipsoids => {
            let (a, b) = halves(n);
            let mut out = Vec::with_capacity(n);
            for (m, (cx, label)) in [(a, (-0.6, 1.0)), (b, (0.6, -1.0))] {
                for _ in 0..m {
                    let u: f64 = StandardNormal.sample(&mut noise.rng);
                    let v: f64 = StandardNormal.sample(&mut noise.rng);
                    let p = vec![cx + 0.5 * u + noise.draw(), 1.5 * v + noise.draw()];
                    out.push((p, label));
                }
            }
            out.into_iter().unzip()
        }
        Dataset::NoisyRing => (0..n)
            .map(|_| {
                let t = noise.rng.random_range(0.0..2.0 * PI);
                (vec![t.cos() + noise.draw()], t.sin() + noise.draw())
            })
            .unzip(),
        Dataset::SinusoidPair => (0..n)
            .map(|_| {
                let x = noise.rng.random_range(-1.0..1.0);
                (vec![x], (SINUSOID_FREQ * x).sin() + noise.draw())
            })
            .unzip(),
        Dataset::PiecewisePlane => (0..n)
            .map(|_| {
                let x1 = noise.rng.random_range(-20.0..20.0);
                let x2 = noise.rng.random_range(-20.0..20.0);
                (vec![x1, x2], piecewise_plane(x1, x2) + noise.draw())
            })
            .unzip(),
    };
    let d = rows[0].len();
    let x = Array2::from_shape_vec((n, d), rows.concat()).expect("rows share a length");
    Ok(ToyData { x, y, target })
}

/// `a x₁ + b x₂` with `(a, b) = (5, 1)` for `x₁ ≥ 0` and `(1, 1)` otherwise.
pub fn piecewise_plane(x1: f64, x2: f64) -> f64 {
    if x1 >= 0.0 {
        5.0 * x1 + x2
    } else {
        x1 + x2
    }
}
