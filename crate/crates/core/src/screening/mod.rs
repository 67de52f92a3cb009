//! The screening workflow: dock a random sample, train a surrogate on it,
//! score the whole library, and re-dock the best-predicted fraction.

mod oracle;

pub use oracle::{raw_score, Oracle, OracleParams, CALIBRATION_SEED, CALIBRATION_SIZE};

use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gnn::ModelConfig;
use crate::metrics::{self, top_count, top_fraction, MetricReport, MetricsError, RankedPair, ResSurface};
use crate::molgraph::io::format_score;
use crate::molgraph::{add_virtual_node, featurize, FeaturizedGraph, MolError, MolecularGraph};
use crate::training::{self, LabeledDataset, ModelCheckpoint, Split, TrainConfig, TrainError, TrainHistory};

#[derive(Debug, Error)]
pub enum ScreeningError {
    #[error("invalid input: {0}")]
    BadInput(String),
    #[error("only {0} labeled molecules after dropping failed dockings; at least 100 are needed")]
    InsufficientData(usize),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Mol(#[from] MolError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub const MIN_LIBRARY: usize = 1000;
pub const MIN_LABELED: usize = 100;

/// Train/validation/test shares of the docked sample.
pub const SPLIT: (f64, f64, f64) = (0.8, 0.1, 0.1);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Fraction of the library docked for training.
    pub rho: f64,
    /// Fraction of the library re-docked after screening.
    pub sigma: f64,
    /// Hit thresholds for evaluation.
    pub zeta_list: Vec<f64>,
    /// Extra σ values reported alongside `sigma`.
    pub sigma_list: Vec<f64>,
    pub grid_points: usize,
    /// Modeled cost of one docking, used for the speedup estimate.
    pub dock_seconds_per_molecule: f64,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            rho: 0.1,
            sigma: 0.1,
            zeta_list: vec![0.01, 0.001],
            sigma_list: vec![],
            grid_points: metrics::GRID_POINTS,
            dock_seconds_per_molecule: 60.0,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ScreeningError> {
        let frac = |f: f64| f > 0.0 && f <= 1.0;
        if !frac(self.rho) || !frac(self.sigma) {
            return Err(ScreeningError::BadInput("rho and sigma must lie in (0, 1]".into()));
        }
        if self.zeta_list.is_empty() || !self.zeta_list.iter().chain(&self.sigma_list).all(|&f| frac(f)) {
            return Err(ScreeningError::BadInput("zeta_list must be non-empty with values in (0, 1]".into()));
        }
        if self.grid_points < 2 {
            return Err(ScreeningError::BadInput("grid_points must be at least 2".into()));
        }
        if self.dock_seconds_per_molecule.is_nan() || self.dock_seconds_per_molecule <= 0.0 {
            return Err(ScreeningError::BadInput("dock_seconds_per_molecule must be positive".into()));
        }
        Ok(())
    }

    fn sigmas(&self) -> Vec<f64> {
        let mut s = vec![self.sigma];
        s.extend(self.sigma_list.iter().copied().filter(|&v| v != self.sigma));
        s
    }
}

/// `t_D / (t_inf + σ t_D)`: cost of docking everything over the cost of
/// inference plus docking the selected fraction.
pub fn compute_speedup(t_dock: f64, t_inf: f64, sigma: f64) -> Result<f64, ScreeningError> {
    if !(t_dock > 0.0 && t_dock.is_finite()) || !(t_inf >= 0.0 && t_inf.is_finite()) || !(sigma > 0.0 && sigma <= 1.0) {
        return Err(ScreeningError::BadInput(format!(
            "speedup needs t_D > 0, t_inf >= 0 and sigma in (0, 1]; got {t_dock}, {t_inf}, {sigma}"
        )));
    }
    Ok(t_dock / (t_inf + sigma * t_dock))
}

/// Deterministic outcome of a screening run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreeningReport {
    pub library_size: usize,
    pub sampled: usize,
    pub dropped_nan: usize,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub best_val_wmse: f64,
    pub epoch_of_best: usize,
    pub epochs_run: usize,
    pub test_wmse: f64,
    pub selected: usize,
    pub selected_nan: usize,
    /// `R_{σ,ζ}` of the selected set for each ζ.
    pub recall_at_sigma: Vec<(f64, f64)>,
    pub metrics: MetricReport,
}

/// Wall-clock measurements; kept apart from the report because they vary
/// between runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub featurize_seconds: f64,
    pub train_seconds: f64,
    pub inference_seconds: f64,
    /// Modeled time to dock the full library.
    pub full_docking_seconds: f64,
    pub speedup: f64,
}

#[derive(Clone, Debug)]
pub struct ScreeningResult {
    /// Surrogate scores for every library molecule.
    pub predictions: Vec<f64>,
    /// Indices of the re-docked molecules in ranking order.
    pub selected: Vec<usize>,
    /// Oracle scores of `selected`, NaN for failed dockings.
    pub redocked: Vec<f64>,
    /// Noise-free oracle scores used as ground truth.
    pub ground_truth: Vec<f64>,
    pub report: ScreeningReport,
    pub surface: ResSurface,
    pub timing: Timing,
    pub checkpoint: ModelCheckpoint,
    pub history: TrainHistory,
}

/// Seeded partition of `0..n` into train, validation and test index lists
/// with the [`SPLIT`] shares (train and validation rounded down).
pub fn split_indices(n: usize, seed: u64) -> [Vec<usize>; 3] {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (SPLIT.0 * n as f64).floor() as usize;
    let n_val = (SPLIT.1 * n as f64).floor() as usize;
    let test = idx.split_off(n_train + n_val);
    let val = idx.split_off(n_train);
    [idx, val, test]
}

/// `ceil(rho * n)` distinct indices drawn without replacement, in draw
/// order; all of `0..n` in order when `rho == 1`.
pub fn subsample(n: usize, rho: f64, seed: u64) -> Result<Vec<usize>, ScreeningError> {
    if rho == 1.0 {
        return Ok((0..n).collect());
    }
    let k = top_count(n, rho)?;
    Ok(rand::seq::index::sample(&mut ChaCha8Rng::seed_from_u64(seed), n, k).into_vec())
}

pub fn featurize_library(library: &[MolecularGraph], virtual_node: bool) -> Result<Vec<FeaturizedGraph>, MolError> {
    library
        .iter()
        .map(|g| {
            if virtual_node {
                Ok(featurize(&add_virtual_node(g)?))
            } else {
                Ok(featurize(g))
            }
        })
        .collect()
}

/// Runs the full workflow on `library`.
pub fn run_dsd(
    library: &[MolecularGraph],
    cfg: &PipelineConfig,
    model: &ModelConfig,
    train_cfg: &TrainConfig,
    oracle: &Oracle,
) -> Result<ScreeningResult, ScreeningError> {
    cfg.validate()?;
    let n = library.len();
    if n < MIN_LIBRARY {
        return Err(ScreeningError::BadInput(format!(
            "library has {n} molecules; at least {MIN_LIBRARY} are required"
        )));
    }

    // Sample and dock.
    let sample_size = top_count(n, cfg.rho)?;
    let sampled = rand::seq::index::sample(&mut ChaCha8Rng::seed_from_u64(cfg.seed), n, sample_size).into_vec();
    let mut labeled: Vec<(usize, f64)> = Vec::with_capacity(sample_size);
    for &i in &sampled {
        let y = oracle.dock(&library[i]);
        if !y.is_nan() {
            labeled.push((i, y));
        }
    }
    let dropped_nan = sample_size - labeled.len();
    if labeled.len() < MIN_LABELED {
        return Err(ScreeningError::InsufficientData(labeled.len()));
    }

    let started = Instant::now();
    let features = featurize_library(library, model.virtual_node)?;
    let featurize_seconds = started.elapsed().as_secs_f64();

    // The sample is already in random order, so split by position.
    let m = labeled.len();
    let n_train = (SPLIT.0 * m as f64).floor() as usize;
    let n_val = (SPLIT.1 * m as f64).floor() as usize;
    let subset = |range: std::ops::Range<usize>, split: Split| {
        let part = &labeled[range];
        LabeledDataset::new(
            split,
            part.iter().map(|&(i, _)| features[i].clone()).collect(),
            part.iter().map(|&(_, y)| y).collect(),
        )
    };
    let train_set = subset(0..n_train, Split::Train)?;
    let val_set = subset(n_train..n_train + n_val, Split::Val)?;
    let test_set = subset(n_train + n_val..m, Split::Test)?;

    let started = Instant::now();
    let (checkpoint, history) = training::train(model, train_cfg, &train_set, &val_set)?;
    let train_seconds = started.elapsed().as_secs_f64();

    let started = Instant::now();
    let predictions = checkpoint.predict(&features)?;
    let inference_seconds = started.elapsed().as_secs_f64();

    let test_wmse = if test_set.is_empty() {
        f64::NAN
    } else {
        let z: Vec<f64> = checkpoint
            .predict(&test_set.graphs)?
            .iter()
            .map(|&v| checkpoint.labels.standardize(v))
            .collect();
        let y: Vec<f64> = test_set.labels.iter().map(|&v| checkpoint.labels.standardize(v)).collect();
        training::wmse_loss(&z, &y, train_cfg.alpha)?
    };

    let selected = top_fraction(&predictions, cfg.sigma)?;
    let redocked: Vec<f64> = selected.iter().map(|&i| oracle.dock(&library[i])).collect();
    let selected_nan = redocked.iter().filter(|v| v.is_nan()).count();

    let ground_truth: Vec<f64> = library.iter().map(|g| oracle.noise_free(g)).collect();
    let rp = RankedPair::new(ground_truth.clone(), predictions.clone())?;
    let (metric_report, surface) = metrics::evaluate(&rp, &cfg.sigmas(), &cfg.zeta_list, cfg.grid_points)?;
    let recall_at_sigma = cfg
        .zeta_list
        .iter()
        .map(|&z| Ok((z, metrics::recall_at(&rp, cfg.sigma, z)?)))
        .collect::<Result<Vec<_>, MetricsError>>()?;

    let full_docking_seconds = n as f64 * cfg.dock_seconds_per_molecule;
    let speedup = compute_speedup(full_docking_seconds, inference_seconds, cfg.sigma)?;

    let report = ScreeningReport {
        library_size: n,
        sampled: sample_size,
        dropped_nan,
        train_size: train_set.len(),
        val_size: val_set.len(),
        test_size: test_set.len(),
        best_val_wmse: checkpoint.best_val_loss,
        epoch_of_best: checkpoint.epoch_of_best,
        epochs_run: history.epochs.len(),
        test_wmse,
        selected: selected.len(),
        selected_nan,
        recall_at_sigma,
        metrics: metric_report,
    };
    log::info!(
        "screened {n} molecules: trained on {}, selected {}, R at sigma {}: {:?}",
        train_set.len(),
        selected.len(),
        cfg.sigma,
        report.recall_at_sigma
    );
    Ok(ScreeningResult {
        predictions,
        selected,
        redocked,
        ground_truth,
        report,
        surface,
        timing: Timing {
            featurize_seconds,
            train_seconds,
            inference_seconds,
            full_docking_seconds,
            speedup,
        },
        checkpoint,
        history,
    })
}

/// Writes `predictions.csv`, `selection.csv`, `report.json`,
/// `res_surface.csv`, `timing.json`, `history.csv` and `model.json` into
/// `dir`.
pub fn write_artifacts(result: &ScreeningResult, smiles: &[String], dir: &Path) -> Result<(), ScreeningError> {
    if smiles.len() != result.predictions.len() {
        return Err(ScreeningError::BadInput(format!(
            "{} SMILES for {} predictions",
            smiles.len(),
            result.predictions.len()
        )));
    }
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("predictions.csv"))?;
    w.write_record(["index", "smiles", "pred_score"])?;
    for (i, (s, p)) in smiles.iter().zip(&result.predictions).enumerate() {
        w.write_record([i.to_string(), s.clone(), format_score(*p)])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("selection.csv"))?;
    w.write_record(["index", "smiles", "pred_score", "dock_score"])?;
    for (&i, &d) in result.selected.iter().zip(&result.redocked) {
        w.write_record([
            i.to_string(),
            smiles[i].clone(),
            format_score(result.predictions[i]),
            format_score(d),
        ])?;
    }
    w.flush()?;

    fs::write(dir.join("report.json"), serde_json::to_string_pretty(&result.report)?)?;
    fs::write(dir.join("timing.json"), serde_json::to_string_pretty(&result.timing)?)?;
    metrics::write_surface_csv(&dir.join("res_surface.csv"), &result.surface)?;
    result.history.write_csv(&dir.join("history.csv"))?;
    result.checkpoint.save(&dir.join("model.json"))?;
    Ok(())
}

#[cfg(test)]
mod tests;
