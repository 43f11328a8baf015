use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kdx_core::density::{DensityMode, RidgeConvention};
use kdx_core::hsic::Direction;
use kdx_core::KernelSpec;

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "kdx", version, about = "Kernel machines with analytic input derivatives")]
pub struct Cli {
    /// Worker threads for parallel Gram matrices and permutations
    /// (falls back to KDX_THREADS)
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a toy dataset
    Gen(GenArgs),
    /// Gaussian process regression
    #[command(subcommand)]
    Gpr(GprCmd),
    /// Support vector classification
    #[command(subcommand)]
    Svm(SvmCmd),
    /// Kernel density estimation and ridges
    #[command(subcommand)]
    Density(DensityCmd),
    /// Hilbert-Schmidt independence criterion
    #[command(subcommand)]
    Hsic(HsicCmd),
    /// Kernel evaluation and derivatives
    #[command(subcommand)]
    Kernel(KernelCmd),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub name: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Linear,
    Poly,
    Rbf,
    Tanh,
    Ard,
    Sinc,
}

#[derive(Debug, Clone, Args)]
pub struct KernelArgs {
    #[arg(long, value_enum, default_value_t = Family::Rbf)]
    pub family: Family,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub coef0: Option<f64>,
    #[arg(long)]
    pub degree: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    pub lengthscales: Option<Vec<f64>>,
    #[arg(long)]
    pub signal_var: Option<f64>,
    #[arg(long)]
    pub bandwidth: Option<f64>,
}

impl KernelArgs {
    fn reject(&self, flags: &[(&str, bool)]) -> Result<(), CliError> {
        for (name, present) in flags {
            if *present {
                return Err(CliError::Usage(format!(
                    "--{name} does not apply to the {} kernel",
                    self.family.to_possible_value().expect("no skipped variants").get_name()
                )));
            }
        }
        Ok(())
    }

    /// Builds and validates the kernel. `gamma` supplies a value when
    /// `--gamma` is absent for families that need one; `None` makes the
    /// flag mandatory.
    pub fn spec(&self, gamma: Option<f64>) -> Result<KernelSpec, CliError> {
        let g = self.gamma.or(gamma);
        let need_gamma = || g.ok_or_else(|| CliError::Usage("--gamma is required".into()));
        let spec = match self.family {
            Family::Linear => {
                self.reject(&[
                    ("gamma", self.gamma.is_some()),
                    ("coef0", self.coef0.is_some()),
                    ("degree", self.degree.is_some()),
                    ("lengthscales", self.lengthscales.is_some()),
                    ("signal-var", self.signal_var.is_some()),
                    ("bandwidth", self.bandwidth.is_some()),
                ])?;
                KernelSpec::Linear
            }
            Family::Poly => {
                self.reject(&[
                    ("lengthscales", self.lengthscales.is_some()),
                    ("signal-var", self.signal_var.is_some()),
                    ("bandwidth", self.bandwidth.is_some()),
                ])?;
                KernelSpec::poly(self.gamma.unwrap_or(1.0), self.coef0.unwrap_or(1.0), self.degree.unwrap_or(2))
            }
            Family::Rbf => {
                self.reject(&[
                    ("coef0", self.coef0.is_some()),
                    ("degree", self.degree.is_some()),
                    ("lengthscales", self.lengthscales.is_some()),
                    ("signal-var", self.signal_var.is_some()),
                    ("bandwidth", self.bandwidth.is_some()),
                ])?;
                KernelSpec::rbf(need_gamma()?)
            }
            Family::Tanh => {
                self.reject(&[
                    ("degree", self.degree.is_some()),
                    ("lengthscales", self.lengthscales.is_some()),
                    ("signal-var", self.signal_var.is_some()),
                    ("bandwidth", self.bandwidth.is_some()),
                ])?;
                KernelSpec::tanh(self.gamma.unwrap_or(1.0), self.coef0.unwrap_or(0.0))
            }
            Family::Ard => {
                self.reject(&[
                    ("gamma", self.gamma.is_some()),
                    ("coef0", self.coef0.is_some()),
                    ("degree", self.degree.is_some()),
                    ("bandwidth", self.bandwidth.is_some()),
                ])?;
                let ls = self
                    .lengthscales
                    .clone()
                    .ok_or_else(|| CliError::Usage("--lengthscales is required".into()))?;
                KernelSpec::ard(ls, self.signal_var.unwrap_or(1.0))
            }
            Family::Sinc => {
                self.reject(&[
                    ("gamma", self.gamma.is_some()),
                    ("coef0", self.coef0.is_some()),
                    ("degree", self.degree.is_some()),
                    ("lengthscales", self.lengthscales.is_some()),
                    ("signal-var", self.signal_var.is_some()),
                ])?;
                KernelSpec::sinc(self.bandwidth.ok_or_else(|| CliError::Usage("--bandwidth is required".into()))?)
            }
        };
        spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(spec)
    }
}

#[derive(Debug, Subcommand)]
pub enum KernelCmd {
    /// Print k(x, y)
    Eval(KernelPair),
    /// Print the gradient of k(x, y) with respect to x
    Grad(KernelPair),
    /// Write the Gram matrix of a dataset
    Gram {
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct KernelPair {
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub x: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub y: Vec<f64>,
}

#[derive(Debug, Subcommand)]
pub enum GprCmd {
    /// Fit a model; an RBF kernel without --gamma is tuned by k-fold CV
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long)]
        noise_var: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        gammas: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        noise_vars: Option<Vec<f64>>,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        model: PathBuf,
    },
    /// Predictive mean and variance
    Predict(ModelData),
    /// Gradient field and sensitivities of the predictive mean
    Sens(ModelSens),
    /// Regularizer norms of the fitted function
    Norms {
        #[arg(long)]
        model: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct ModelData {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModelSens {
    #[arg(long)]
    pub model: PathBuf,
    /// Evaluation points (defaults to the training inputs)
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum SvmCmd {
    /// Train with SMO; an RBF kernel without --gamma or --c is tuned by CV
    Train {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long)]
        c: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        cs: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        gammas: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[arg(long)]
        max_updates: Option<usize>,
        #[arg(long, default_value_t = 3)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        model: PathBuf,
    },
    /// Decision values and labels
    Predict(ModelData),
    /// Mask and kernel terms of the smoothed decision gradient
    Sens {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Parzen,
    Keca,
    EntropyKeca,
}

impl ModeArg {
    pub fn mode(self, rank: Option<usize>) -> Result<DensityMode, CliError> {
        match (self, rank) {
            (ModeArg::Parzen, None) => Ok(DensityMode::Parzen),
            (ModeArg::Parzen, Some(_)) => Err(CliError::Usage("--rank does not apply to parzen".into())),
            (_, None) => Err(CliError::Usage("--rank is required for keca modes".into())),
            (ModeArg::Keca, Some(r)) => Ok(DensityMode::Keca { r }),
            (ModeArg::EntropyKeca, Some(r)) => Ok(DensityMode::EntropyKeca { r }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConventionArg {
    Trailing,
    Leading,
}

impl From<ConventionArg> for RidgeConvention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Trailing => RidgeConvention::Trailing,
            ConventionArg::Leading => RidgeConvention::Leading,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum DensityCmd {
    /// Fit a density model; RBF without --gamma uses the median heuristic
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long, value_enum, default_value_t = ModeArg::Parzen)]
        mode: ModeArg,
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long)]
        model: PathBuf,
    },
    /// Density and its gradient at points
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Scale RBF densities to integrate to one
        #[arg(long)]
        normalized: bool,
    },
    /// Ridge scores and selected ridge points
    Ridge {
        #[arg(long)]
        model: PathBuf,
        /// Points to score (defaults to the training inputs)
        #[arg(long)]
        data: Option<PathBuf>,
        /// Number of Hessian eigenvectors in the projection (default d − 1, at least 1)
        #[arg(long)]
        r_ridge: Option<usize>,
        #[arg(long, value_enum, default_value_t = ConventionArg::Trailing)]
        convention: ConventionArg,
        #[arg(long, conflicts_with = "tol")]
        quantile: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HsicKernel {
    Rbf,
    Linear,
}

#[derive(Debug, Args)]
pub struct HsicData {
    #[arg(long)]
    pub data: PathBuf,
    /// Use the first K columns as X and the rest as Y (default: features
    /// against the y/label column)
    #[arg(long)]
    pub split: Option<usize>,
    #[arg(long, value_enum, default_value_t = HsicKernel::Rbf)]
    pub kernel: HsicKernel,
    /// RBF γ for X (default: median heuristic)
    #[arg(long)]
    pub gamma_x: Option<f64>,
    /// RBF γ for Y (default: median heuristic)
    #[arg(long)]
    pub gamma_y: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    Maximize,
    Minimize,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Maximize => Direction::Maximize,
            DirectionArg::Minimize => Direction::Minimize,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum HsicCmd {
    /// Print HSIC
    Value(HsicData),
    /// Per-sample HSIC gradients
    Grad {
        #[command(flatten)]
        data: HsicData,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Permutation-test p-value
    Pvalue {
        #[command(flatten)]
        data: HsicData,
        #[arg(long, default_value_t = 199)]
        perms: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Move samples to raise or lower HSIC
    Unfold {
        #[command(flatten)]
        data: HsicData,
        #[arg(long, value_enum)]
        direction: DirectionArg,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long, default_value_t = 100)]
        iters: usize,
        /// Append every sample's coordinates to each row
        #[arg(long)]
        coords: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}
