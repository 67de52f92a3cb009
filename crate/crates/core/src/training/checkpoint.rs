use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Standardizer, TrainConfig, TrainError};
use crate::diffcore::Tensor;
use crate::gnn::{Model, ModelConfig};
use crate::molgraph::FeaturizedGraph;

pub const CHECKPOINT_FORMAT_VERSION: &str = "1";

/// Graphs per forward pass at inference time. Fixed so that scores do not
/// depend on how callers split their inputs.
pub const INFERENCE_CHUNK: usize = 256;

/// Trained surrogate plus everything needed to score new molecules.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelCheckpoint {
    pub model: Model,
    pub labels: Standardizer,
    pub train_config: TrainConfig,
    pub best_val_loss: f64,
    pub epoch_of_best: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NamedTensor {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    format_version: String,
    model_config: ModelConfig,
    parameters: Vec<NamedTensor>,
    label_mean: f64,
    label_std: f64,
    train_config: TrainConfig,
    best_val_loss: f64,
    epoch_of_best: usize,
}

impl ModelCheckpoint {
    /// Scores in docking-score units, computed in fixed-size chunks.
    pub fn predict(&self, graphs: &[FeaturizedGraph]) -> Result<Vec<f64>, TrainError> {
        let mut out = Vec::with_capacity(graphs.len());
        for chunk in graphs.chunks(INFERENCE_CHUNK) {
            let refs: Vec<&FeaturizedGraph> = chunk.iter().collect();
            let z = self.model.predict(&crate::molgraph::batch(&refs))?;
            out.extend(z.into_iter().map(|v| self.labels.destandardize(v)));
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String, TrainError> {
        let doc = Document {
            format_version: CHECKPOINT_FORMAT_VERSION.to_string(),
            model_config: self.model.config.clone(),
            parameters: self
                .model
                .named_params()
                .into_iter()
                .map(|(name, t)| NamedTensor {
                    name,
                    shape: t.shape().to_vec(),
                    data: t.into_data(),
                })
                .collect(),
            label_mean: self.labels.mean,
            label_std: self.labels.std,
            train_config: self.train_config.clone(),
            best_val_loss: self.best_val_loss,
            epoch_of_best: self.epoch_of_best,
        };
        serde_json::to_string_pretty(&doc).map_err(|e| TrainError::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<ModelCheckpoint, TrainError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| TrainError::Format(e.to_string()))?;
        match value.get("format_version").and_then(|v| v.as_str()) {
            Some(CHECKPOINT_FORMAT_VERSION) => {}
            Some(other) => return Err(TrainError::VersionMismatch(other.to_string())),
            None => return Err(TrainError::Format("missing format_version".into())),
        }
        let doc: Document = serde_json::from_value(value).map_err(|e| TrainError::Format(e.to_string()))?;
        if !(doc.label_std > 0.0 && doc.label_std.is_finite() && doc.label_mean.is_finite()) {
            return Err(TrainError::Format("label statistics must be finite with label_std > 0".into()));
        }
        let mut named = Vec::with_capacity(doc.parameters.len());
        for p in doc.parameters {
            let t = Tensor::new(p.shape, p.data).map_err(|e| TrainError::Format(format!("parameter `{}`: {e}", p.name)))?;
            if !t.is_finite() {
                return Err(TrainError::Format(format!("parameter `{}` is not finite", p.name)));
            }
            named.push((p.name, t));
        }
        let model = Model::from_named(doc.model_config, named).map_err(|e| TrainError::Format(e.to_string()))?;
        Ok(ModelCheckpoint {
            model,
            labels: Standardizer {
                mean: doc.label_mean,
                std: doc.label_std,
            },
            train_config: doc.train_config,
            best_val_loss: doc.best_val_loss,
            epoch_of_best: doc.epoch_of_best,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), TrainError> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ModelCheckpoint, TrainError> {
        ModelCheckpoint::from_json(&fs::read_to_string(path)?)
    }
}
