//! W-MSE loss, label standardization, Adam and the training loop with
//! best-validation checkpointing.

mod adam;
mod checkpoint;
mod loss;

pub use adam::Adam;
pub use checkpoint::{ModelCheckpoint, CHECKPOINT_FORMAT_VERSION, INFERENCE_CHUNK};
pub use loss::{mse, wmse_loss, wmse_on_tape, wmse_weights, Standardizer};

use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffcore::{DiffError, Tape, Var};
use crate::gnn::{GnnError, Model, ModelConfig, Topology};
use crate::molgraph::{batch, FeaturizedGraph};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Gnn(#[from] GnnError),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error("empty batch")]
    EmptyBatch,
    #[error("training labels need at least two distinct finite values")]
    DegenerateLabels,
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Divergence { epoch: usize, loss: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("malformed checkpoint: {0}")]
    Format(String),
    #[error("unsupported checkpoint format version `{0}`")]
    VersionMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Exponential weighting coefficient of the W-MSE loss.
    pub alpha: f64,
    pub seed: u64,
    /// Stop after this many epochs without a new best validation loss.
    pub early_stop_patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 128,
            max_epochs: 300,
            alpha: 0.8,
            seed: 0,
            early_stop_patience: Some(50),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidInput(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be non-negative");
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return bad("batch_size and max_epochs must be positive");
        }
        if self.early_stop_patience == Some(0) {
            return bad("early_stop_patience must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Featurized molecules with finite docking-score labels.
#[derive(Clone, Debug)]
pub struct LabeledDataset {
    pub split: Split,
    pub graphs: Vec<FeaturizedGraph>,
    pub labels: Vec<f64>,
}

impl LabeledDataset {
    pub fn new(split: Split, graphs: Vec<FeaturizedGraph>, labels: Vec<f64>) -> Result<Self, TrainError> {
        if graphs.len() != labels.len() {
            return Err(TrainError::InvalidInput(format!(
                "{} graphs for {} labels",
                graphs.len(),
                labels.len()
            )));
        }
        if labels.iter().any(|y| !y.is_finite()) {
            return Err(TrainError::InvalidInput("labels must be finite".into()));
        }
        Ok(LabeledDataset { split, graphs, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_wmse: f64,
    pub val_wmse: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn write_csv(&self, path: &Path) -> Result<(), TrainError> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.epochs {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<TrainHistory, TrainError> {
        let mut r = csv::Reader::from_path(path)?;
        let epochs = r.deserialize().collect::<Result<Vec<EpochRecord>, _>>()?;
        Ok(TrainHistory { epochs })
    }
}

/// A pre-assembled evaluation batch.
struct Prepared {
    graph: FeaturizedGraph,
    topology: Topology,
    targets: Vec<f64>,
}

fn prepare(graphs: &[&FeaturizedGraph], targets: Vec<f64>) -> Prepared {
    let graph = batch(graphs);
    let topology = Topology::new(&graph);
    Prepared {
        graph,
        topology,
        targets,
    }
}

/// Evaluation-mode W-MSE over pre-assembled batches, sample-weighted.
fn evaluate(model: &Model, batches: &[Prepared], alpha: f64) -> Result<f64, TrainError> {
    let mut total = 0.0;
    let mut count = 0;
    for b in batches {
        let mut tape = Tape::new();
        let vars: Vec<Var> = model.params.iter().map(|p| tape.constant(p.clone())).collect();
        let out = model.forward(&mut tape, &vars, &b.graph, &b.topology, None)?;
        let z = tape.value(out).data();
        total += wmse_loss(z, &b.targets, alpha)? * b.targets.len() as f64;
        count += b.targets.len();
    }
    Ok(total / count.max(1) as f64)
}

/// Trains a fresh model and returns the parameters of the epoch with the
/// lowest validation W-MSE. Deterministic for a given seed.
pub fn train(
    model_config: &ModelConfig,
    config: &TrainConfig,
    train_set: &LabeledDataset,
    val_set: &LabeledDataset,
) -> Result<(ModelCheckpoint, TrainHistory), TrainError> {
    config.validate()?;
    model_config.validate()?;
    if val_set.is_empty() {
        return Err(TrainError::InvalidInput("validation set is empty".into()));
    }
    let labels = Standardizer::fit(&train_set.labels)?;
    let train_y: Vec<f64> = train_set.labels.iter().map(|&y| labels.standardize(y)).collect();

    let val_batches: Vec<Prepared> = (0..val_set.len())
        .collect::<Vec<_>>()
        .chunks(INFERENCE_CHUNK)
        .map(|idx| {
            let graphs: Vec<&FeaturizedGraph> = idx.iter().map(|&i| &val_set.graphs[i]).collect();
            prepare(&graphs, idx.iter().map(|&i| labels.standardize(val_set.labels[i])).collect())
        })
        .collect();

    let mut model = Model::new(model_config.clone(), config.seed)?;
    let mut adam = Adam::new(&model.params, config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x005e_ed0f_7a1e);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = TrainHistory::default();
    let mut best = (f64::INFINITY, 0, model.params.clone());

    for epoch in 1..=config.max_epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for idx in order.chunks(config.batch_size) {
            let graphs: Vec<&FeaturizedGraph> = idx.iter().map(|&i| &train_set.graphs[i]).collect();
            let b = prepare(&graphs, idx.iter().map(|&i| train_y[i]).collect());
            let mut tape = Tape::new();
            let vars: Vec<Var> = model.params.iter().map(|p| tape.param(p.clone())).collect();
            let out = model.forward(&mut tape, &vars, &b.graph, &b.topology, Some(&mut rng))?;
            let loss = wmse_on_tape(&mut tape, out, &b.targets, config.alpha)?;
            let value = tape.value(loss).data()[0];
            if !value.is_finite() {
                return Err(TrainError::Divergence { epoch, loss: value });
            }
            epoch_loss += value * idx.len() as f64;
            let grads = tape.backward(loss)?;
            let grads: Vec<_> = vars.iter().map(|&v| grads.wrt(v)).collect();
            adam.step(&mut model.params, &grads)?;
        }
        let train_wmse = epoch_loss / train_set.len().max(1) as f64;
        let val_wmse = evaluate(&model, &val_batches, config.alpha)?;
        if !val_wmse.is_finite() {
            return Err(TrainError::Divergence { epoch, loss: val_wmse });
        }
        history.epochs.push(EpochRecord {
            epoch,
            train_wmse,
            val_wmse,
            seconds: started.elapsed().as_secs_f64(),
        });
        log::debug!("epoch {epoch}: train W-MSE {train_wmse:.5}, val W-MSE {val_wmse:.5}");
        if val_wmse < best.0 {
            best = (val_wmse, epoch, model.params.clone());
        } else if config.early_stop_patience.is_some_and(|p| epoch - best.1 >= p) {
            log::info!("early stop at epoch {epoch}, best epoch {}", best.1);
            break;
        }
    }

    model.params = best.2;
    Ok((
        ModelCheckpoint {
            model,
            labels,
            train_config: config.clone(),
            best_val_loss: best.0,
            epoch_of_best: best.1,
        },
        history,
    ))
}

#[cfg(test)]
mod tests;
