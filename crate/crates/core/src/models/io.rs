//! JSON model files: `{"format", "kind", "arch", "params"}`.
//!
//! Floats are written with the shortest representation that parses back to
//! the same binary64 value, so a save/load round trip is bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Dense, LinearModel, Mlp, ModelError, MLP_ARCH};
use crate::track::{Action, FEATURE_COUNT};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Mlp(Mlp),
    Linear(LinearModel),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Mlp(_) => "mlp",
            Model::Linear(m) => m.kind().tag(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: u32,
    kind: String,
    arch: Vec<usize>,
    params: Value,
}

#[derive(Serialize, Deserialize)]
struct LayerParams {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MlpParams {
    layers: Vec<LayerParams>,
}

#[derive(Serialize, Deserialize)]
struct LdaParams {
    means: Vec<Vec<f64>>,
    cov_inv: Vec<Vec<f64>>,
    priors: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct LogRegParams {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    present: Vec<bool>,
}

fn rows<const N: usize>(m: &[[f64; N]]) -> Vec<Vec<f64>> {
    m.iter().map(|r| r.to_vec()).collect()
}

fn mismatch(expected: impl std::fmt::Debug, found: impl std::fmt::Debug) -> ModelError {
    ModelError::ArchitectureMismatch {
        expected: format!("{expected:?}"),
        found: format!("{found:?}"),
    }
}

fn fixed<const N: usize>(v: Vec<f64>) -> Result<[f64; N], ModelError> {
    let len = v.len();
    v.try_into().map_err(|_| mismatch(N, len))
}

fn matrix<const N: usize>(m: Vec<Vec<f64>>, rows: usize) -> Result<Vec<[f64; N]>, ModelError> {
    if m.len() != rows {
        return Err(mismatch(rows, m.len()));
    }
    m.into_iter().map(fixed::<N>).collect()
}

fn io_error(path: &Path, source: std::io::Error) -> ModelError {
    ModelError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn to_file(model: &Model) -> ModelFile {
    let linear_arch = vec![FEATURE_COUNT, Action::COUNT];
    let (arch, params) = match model {
        Model::Mlp(mlp) => {
            let params = MlpParams {
                layers: mlp
                    .layers()
                    .iter()
                    .map(|l| LayerParams {
                        weights: l.weights.chunks(l.inputs).map(|r| r.to_vec()).collect(),
                        bias: l.bias.clone(),
                    })
                    .collect(),
            };
            (mlp.arch(), serde_json::to_value(params))
        }
        Model::Linear(LinearModel::Lda {
            means,
            cov_inv,
            priors,
        }) => (
            linear_arch,
            serde_json::to_value(LdaParams {
                means: rows(means),
                cov_inv: rows(cov_inv),
                priors: priors.to_vec(),
            }),
        ),
        Model::Linear(LinearModel::LogisticRegression {
            weights,
            bias,
            present,
        }) => (
            linear_arch,
            serde_json::to_value(LogRegParams {
                weights: rows(weights),
                bias: bias.to_vec(),
                present: present.to_vec(),
            }),
        ),
    };
    ModelFile {
        format: FORMAT_VERSION,
        kind: model.kind().to_string(),
        arch,
        params: params.expect("finite parameters serialize"),
    }
}

pub fn save_model(model: &Model, path: &Path) -> Result<(), ModelError> {
    let mut text = serde_json::to_string(&to_file(model))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_error(path, e))
}

fn from_file(file: ModelFile) -> Result<Model, ModelError> {
    if file.format != FORMAT_VERSION {
        return Err(ModelError::UnsupportedFormat(file.format));
    }
    match file.kind.as_str() {
        "mlp" => {
            if file.arch != MLP_ARCH {
                return Err(mismatch(MLP_ARCH, &file.arch));
            }
            let params: MlpParams = serde_json::from_value(file.params)?;
            if params.layers.len() != file.arch.len() - 1 {
                return Err(mismatch(file.arch.len() - 1, params.layers.len()));
            }
            let mut layers = Vec::with_capacity(params.layers.len());
            for (l, w) in params.layers.into_iter().zip(file.arch.windows(2)) {
                let (inputs, outputs) = (w[0], w[1]);
                if l.weights.len() != outputs
                    || l.bias.len() != outputs
                    || l.weights.iter().any(|r| r.len() != inputs)
                {
                    return Err(mismatch((outputs, inputs), (l.weights.len(), l.bias.len())));
                }
                layers.push(Dense {
                    inputs,
                    outputs,
                    weights: l.weights.into_iter().flatten().collect(),
                    bias: l.bias,
                });
            }
            Ok(Model::Mlp(Mlp::from_layers(layers)))
        }
        "lda" | "logreg" => {
            let expected = [FEATURE_COUNT, Action::COUNT];
            if file.arch != expected {
                return Err(mismatch(expected, &file.arch));
            }
            if file.kind == "lda" {
                let p: LdaParams = serde_json::from_value(file.params)?;
                Ok(Model::Linear(LinearModel::Lda {
                    means: matrix(p.means, Action::COUNT)?,
                    cov_inv: matrix(p.cov_inv, FEATURE_COUNT)?,
                    priors: fixed(p.priors)?,
                }))
            } else {
                let p: LogRegParams = serde_json::from_value(file.params)?;
                let present: [bool; Action::COUNT] = p
                    .present
                    .try_into()
                    .map_err(|v: Vec<bool>| mismatch(Action::COUNT, v.len()))?;
                Ok(Model::Linear(LinearModel::LogisticRegression {
                    weights: matrix(p.weights, Action::COUNT)?,
                    bias: fixed(p.bias)?,
                    present,
                }))
            }
        }
        other => Err(mismatch("mlp | lda | logreg", other)),
    }
}

pub fn load_model(path: &Path) -> Result<Model, ModelError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    from_file(serde_json::from_str(&text)?)
}

pub fn load_mlp(path: &Path) -> Result<Mlp, ModelError> {
    match load_model(path)? {
        Model::Mlp(m) => Ok(m),
        other => Err(mismatch("mlp", other.kind())),
    }
}
