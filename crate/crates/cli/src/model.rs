//! Model files: `{"kind": …, "kernel": …, "data": …, "params": …}`.

use std::path::Path;

use kdx_core::density::{DensityMode, DensityModel, DensityParts};
use kdx_core::gpr::{GprModel, GprParts};
use kdx_core::svm::{SvmModel, SvmParts};
use kdx_core::KernelSpec;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Gpr,
    Svm,
    Density,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Envelope {
    pub kind: Kind,
    pub kernel: KernelSpec,
    pub data: Value,
    pub params: Value,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GprData {
    x_train: Vec<Vec<f64>>,
    alpha: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GprParams {
    noise_var: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SvmData {
    sv_x: Vec<Vec<f64>>,
    sv_coef: Vec<f64>,
    bias: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SvmParams {
    c: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DensityData {
    x_train: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DensityParams {
    mode: DensityMode,
}

#[derive(Debug, Clone)]
pub enum Model {
    Gpr(GprModel),
    Svm(SvmModel),
    Density(DensityModel),
}

fn to_value<T: Serialize>(v: T) -> Value {
    serde_json::to_value(v).expect("model parts serialize to JSON")
}

fn from_value<T: for<'de> Deserialize<'de>>(v: Value, what: &str) -> Result<T, CliError> {
    serde_json::from_value(v).map_err(|e| CliError::Usage(format!("bad model {what}: {e}")))
}

impl Model {
    pub fn kind(&self) -> Kind {
        match self {
            Model::Gpr(_) => Kind::Gpr,
            Model::Svm(_) => Kind::Svm,
            Model::Density(_) => Kind::Density,
        }
    }

    pub fn to_envelope(&self) -> Envelope {
        match self {
            Model::Gpr(m) => {
                let p = m.to_parts();
                Envelope {
                    kind: Kind::Gpr,
                    kernel: p.kernel,
                    data: to_value(GprData {
                        x_train: p.x_train,
                        alpha: p.alpha,
                    }),
                    params: to_value(GprParams { noise_var: p.noise_var }),
                }
            }
            Model::Svm(m) => {
                let p = m.to_parts();
                Envelope {
                    kind: Kind::Svm,
                    kernel: p.kernel,
                    data: to_value(SvmData {
                        sv_x: p.sv_x,
                        sv_coef: p.sv_coef,
                        bias: p.bias,
                    }),
                    params: to_value(SvmParams { c: p.c }),
                }
            }
            Model::Density(m) => {
                let p = m.to_parts();
                Envelope {
                    kind: Kind::Density,
                    kernel: p.kernel,
                    data: to_value(DensityData {
                        x_train: p.x_train,
                        weights: p.weights,
                    }),
                    params: to_value(DensityParams { mode: p.mode }),
                }
            }
        }
    }

    pub fn from_envelope(env: Envelope) -> Result<Self, CliError> {
        Ok(match env.kind {
            Kind::Gpr => {
                let d: GprData = from_value(env.data, "data")?;
                let p: GprParams = from_value(env.params, "params")?;
                Model::Gpr(GprModel::from_parts(GprParts {
                    kernel: env.kernel,
                    x_train: d.x_train,
                    noise_var: p.noise_var,
                    alpha: d.alpha,
                })?)
            }
            Kind::Svm => {
                let d: SvmData = from_value(env.data, "data")?;
                let p: SvmParams = from_value(env.params, "params")?;
                Model::Svm(SvmModel::from_parts(SvmParts {
                    kernel: env.kernel,
                    sv_x: d.sv_x,
                    sv_coef: d.sv_coef,
                    bias: d.bias,
                    c: p.c,
                })?)
            }
            Kind::Density => {
                let d: DensityData = from_value(env.data, "data")?;
                let p: DensityParams = from_value(env.params, "params")?;
                Model::Density(DensityModel::from_parts(DensityParts {
                    kernel: env.kernel,
                    mode: p.mode,
                    x_train: d.x_train,
                    weights: d.weights,
                })?)
            }
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_envelope()).expect("envelope serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let env: Envelope = serde_json::from_str(text).map_err(|e| CliError::Usage(format!("bad model file: {e}")))?;
        Self::from_envelope(env)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_json()).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }
}
