//! Model container: JSON with a format tag and version, the model
//! (layer dimensions, activations, row-major weights) and the training
//! configuration used to produce it.
//!
//! ```json
//! { "format": "aiaas-model", "version": 1,
//!   "model": { "kind": "autoencoder", "layers": [ ... ], "bottleneck_index": 3 },
//!   "train_config": { "learning_rate": 0.001, ... } }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Autoencoder, EngineError, LinearModel, RecurrentModel, TrainConfig};

pub const MODEL_FORMAT: &str = "aiaas-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StoredModel {
    Autoencoder(Autoencoder),
    Recurrent(RecurrentModel),
    Linear(LinearModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub model: StoredModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_config: Option<TrainConfig>,
}

impl ModelFile {
    pub fn new(model: StoredModel, train_config: Option<TrainConfig>) -> Self {
        ModelFile { format: MODEL_FORMAT.into(), version: MODEL_VERSION, model, train_config }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, EngineError> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| EngineError::ModelFile(e.to_string()))?;
        if file.format != MODEL_FORMAT {
            return Err(EngineError::ModelFile(format!("unknown format `{}`", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(EngineError::ModelFile(format!("unsupported version {}", file.version)));
        }
        file.check_shapes()?;
        Ok(file)
    }

    fn check_shapes(&self) -> Result<(), EngineError> {
        let bad = |m: &str| Err(EngineError::ModelFile(m.to_owned()));
        match &self.model {
            StoredModel::Autoencoder(ae) => {
                for (i, l) in ae.layers.iter().enumerate() {
                    if l.weights.data.len() != l.weights.rows * l.weights.cols || l.bias.len() != l.weights.rows {
                        return bad("layer weight/bias sizes disagree");
                    }
                    if i > 0 && ae.layers[i - 1].outputs() != l.inputs() {
                        return bad("consecutive layer widths disagree");
                    }
                }
                if ae.bottleneck_index == 0 || ae.bottleneck_index >= ae.layers.len() {
                    return bad("bottleneck index out of range");
                }
            }
            StoredModel::Recurrent(r) => {
                let h = r.hidden_size;
                if r.input_weights.len() != 4 * h
                    || r.recurrent_weights.data.len() != 4 * h * h
                    || r.gate_bias.len() != 4 * h
                    || r.readout.data.len() != r.horizon * h
                    || r.readout_bias.len() != r.horizon
                {
                    return bad("recurrent model sizes disagree");
                }
            }
            StoredModel::Linear(_) => {}
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), EngineError> {
        std::fs::write(path, self.to_json()).map_err(|e| EngineError::ModelFile(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, EngineError> {
        let text = std::fs::read_to_string(path).map_err(|e| EngineError::ModelFile(e.to_string()))?;
        Self::from_json(&text)
    }
}
