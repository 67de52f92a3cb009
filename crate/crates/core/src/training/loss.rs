use super::TrainError;
use crate::diffcore::{Tape, Tensor, Var};

/// Per-sample weights `exp(-alpha * y)`; exactly 1 when `alpha == 0`.
pub fn wmse_weights(y: &[f64], alpha: f64) -> Vec<f64> {
    y.iter().map(|&v| (-alpha * v).exp()).collect()
}

/// Mean of `exp(-alpha * y_i) * (z_i - y_i)^2` over the batch.
pub fn wmse_loss(z: &[f64], y: &[f64], alpha: f64) -> Result<f64, TrainError> {
    check_lengths(z.len(), y.len())?;
    let w = wmse_weights(y, alpha);
    let s: f64 = z.iter().zip(y).zip(&w).map(|((z, y), w)| (z - y) * (z - y) * w).sum();
    Ok(s / z.len() as f64)
}

pub fn mse(z: &[f64], y: &[f64]) -> Result<f64, TrainError> {
    check_lengths(z.len(), y.len())?;
    let s: f64 = z.iter().zip(y).map(|(z, y)| (z - y) * (z - y)).sum();
    Ok(s / z.len() as f64)
}

/// Tape form of [`wmse_loss`] for a `n x 1` prediction column; the labels
/// and weights are constants.
pub fn wmse_on_tape(tape: &mut Tape, z: Var, y: &[f64], alpha: f64) -> Result<Var, TrainError> {
    check_lengths(tape.value(z).numel(), y.len())?;
    let target = tape.constant(Tensor::column(y.to_vec()));
    let weights = tape.constant(Tensor::column(wmse_weights(y, alpha)));
    let d = tape.sub(z, target)?;
    let sq = tape.mul(d, d)?;
    let weighted = tape.mul(sq, weights)?;
    Ok(tape.mean_all(weighted))
}

fn check_lengths(nz: usize, ny: usize) -> Result<(), TrainError> {
    if nz == 0 || ny == 0 {
        return Err(TrainError::EmptyBatch);
    }
    if nz != ny {
        return Err(TrainError::InvalidInput(format!("{nz} predictions for {ny} labels")));
    }
    Ok(())
}

/// Training-split label statistics (population standard deviation).
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Standardizer {
    pub mean: f64,
    pub std: f64,
}

impl Standardizer {
    pub fn fit(labels: &[f64]) -> Result<Standardizer, TrainError> {
        if labels.len() < 2 || labels.iter().any(|v| !v.is_finite()) {
            return Err(TrainError::DegenerateLabels);
        }
        let n = labels.len() as f64;
        let mean = labels.iter().sum::<f64>() / n;
        let var = labels.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        if std.is_nan() || std <= 0.0 {
            return Err(TrainError::DegenerateLabels);
        }
        Ok(Standardizer { mean, std })
    }

    pub fn standardize(&self, y: f64) -> f64 {
        (y - self.mean) / self.std
    }

    pub fn destandardize(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}
