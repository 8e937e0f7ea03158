use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{DenseLayer, LinearModel, MlpModel, ModelKind, TrainConfig, TrainedModel};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "xaudit-model";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub kind: ModelKind,
    pub input_dim: usize,
    #[serde(default)]
    pub hidden_layers: Vec<usize>,
}

/// JSON container for a trained model.
///
/// Parameters are stored as base64 of little-endian `f64` bytes: for LR the
/// coefficients then the intercept; for NN each layer's row-major weights
/// followed by its bias, input layer first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub architecture: Architecture,
    pub parameters: String,
    pub train_config: TrainConfig,
    pub seed: u64,
    #[serde(default)]
    pub feature_names: Vec<String>,
}

fn pack(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    B64.encode(bytes)
}

fn unpack(text: &str) -> Result<Vec<f64>> {
    let bytes = B64
        .decode(text)
        .map_err(|e| Error::Checkpoint(format!("bad parameter encoding: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Checkpoint(
            "parameter byte count not a multiple of 8".into(),
        ));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

impl Checkpoint {
    pub fn new(
        model: &TrainedModel,
        train_config: &TrainConfig,
        seed: u64,
        feature_names: Vec<String>,
    ) -> Self {
        let (architecture, params) = match model {
            TrainedModel::Linear(m) => {
                let mut p = m.coefficients.clone();
                p.push(m.intercept);
                (
                    Architecture {
                        kind: ModelKind::Lr,
                        input_dim: m.coefficients.len(),
                        hidden_layers: Vec::new(),
                    },
                    p,
                )
            }
            TrainedModel::Mlp(m) => {
                let mut p = Vec::new();
                for layer in m.layers() {
                    p.extend(layer.weights.iter().copied());
                    p.extend(layer.bias.iter().copied());
                }
                (
                    Architecture {
                        kind: ModelKind::Nn,
                        input_dim: m.layers()[0].weights.ncols(),
                        hidden_layers: m.hidden_widths(),
                    },
                    p,
                )
            }
        };
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            architecture,
            parameters: pack(&params),
            train_config: train_config.clone(),
            seed,
            feature_names,
        }
    }

    pub fn model(&self) -> Result<TrainedModel> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported container {} v{}",
                self.format, self.version
            )));
        }
        let params = unpack(&self.parameters)?;
        let arch = &self.architecture;
        match arch.kind {
            ModelKind::Lr => {
                if params.len() != arch.input_dim + 1 {
                    return Err(Error::Checkpoint("parameter count mismatch".into()));
                }
                let (w, b) = params.split_at(arch.input_dim);
                Ok(TrainedModel::Linear(LinearModel::new(w.to_vec(), b[0])))
            }
            ModelKind::Nn => {
                let mut widths = vec![arch.input_dim];
                widths.extend(&arch.hidden_layers);
                widths.push(1);
                let expected: usize = widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
                if params.len() != expected {
                    return Err(Error::Checkpoint("parameter count mismatch".into()));
                }
                let mut rest = params.as_slice();
                let mut layers = Vec::new();
                for w in widths.windows(2) {
                    let (wt, tail) = rest.split_at(w[0] * w[1]);
                    let (b, tail) = tail.split_at(w[1]);
                    rest = tail;
                    layers.push(DenseLayer {
                        weights: Array2::from_shape_vec((w[1], w[0]), wt.to_vec())
                            .map_err(|e| Error::Checkpoint(e.to_string()))?,
                        bias: Array1::from(b.to_vec()),
                    });
                }
                Ok(TrainedModel::Mlp(MlpModel::from_layers(layers)?))
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
