use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::ScreeningError;
use crate::molgraph::{canonical_hash, generate_random_library, GeneratorParams, MolecularGraph};

/// Size and seed of the generated library used to calibrate unset noise
/// parameters.
pub const CALIBRATION_SIZE: usize = 2000;
pub const CALIBRATION_SEED: u64 = 0x000c_a11b_4a7e;

/// Synthetic docking oracle settings. Lower scores are better.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleParams {
    /// Weights of aromatic-atom count, ring count, heteroatom count, mean
    /// degree and heavy-atom count.
    pub weights: [f64; 5],
    /// Standard deviation of the additive noise. Unset means 0.25 times the
    /// raw-score spread of the calibration library.
    pub noise_base: Option<f64>,
    /// Extra noise per unit of raw score above `median_raw`.
    pub noise_slope: f64,
    /// Unset means the median raw score of the calibration library.
    pub median_raw: Option<f64>,
    pub nan_fraction: f64,
    pub seed: u64,
}

impl Default for OracleParams {
    fn default() -> Self {
        OracleParams {
            weights: [1.0, 2.0, 1.5, 0.5, 0.1],
            noise_base: None,
            noise_slope: 0.1,
            median_raw: None,
            nan_fraction: 0.01,
            seed: 0,
        }
    }
}

/// Oracle with every parameter resolved.
#[derive(Clone, Debug, PartialEq)]
pub struct Oracle {
    pub params: OracleParams,
    noise_base: f64,
    median_raw: f64,
}

/// Noise-free score from structural counts.
pub fn raw_score(g: &MolecularGraph, w: &[f64; 5]) -> f64 {
    -(w[0] * g.num_aromatic_atoms() as f64
        + w[1] * g.cycle_rank() as f64
        + w[2] * g.num_hetero_atoms() as f64
        + w[3] * g.mean_degree()
        + w[4] * g.num_heavy_atoms() as f64)
}

impl Oracle {
    pub fn new(params: OracleParams) -> Result<Oracle, ScreeningError> {
        if params.weights.iter().any(|w| !w.is_finite()) {
            return Err(ScreeningError::BadInput("oracle weights must be finite".into()));
        }
        if !(0.0..=1.0).contains(&params.nan_fraction) {
            return Err(ScreeningError::BadInput(format!("nan_fraction {} outside [0, 1]", params.nan_fraction)));
        }
        if !(params.noise_slope.is_finite() && params.noise_base.is_none_or(|b| b >= 0.0 && b.is_finite())) {
            return Err(ScreeningError::BadInput("noise_base must be non-negative and noise_slope finite".into()));
        }
        let (median_raw, noise_base) = match (params.median_raw, params.noise_base) {
            (Some(m), Some(b)) => (m, b),
            (m, b) => {
                let (median, std) = calibration(&params.weights)?;
                (m.unwrap_or(median), b.unwrap_or(0.25 * std))
            }
        };
        Ok(Oracle {
            params,
            noise_base,
            median_raw,
        })
    }

    /// Parameters with the calibrated values filled in.
    pub fn resolved_params(&self) -> OracleParams {
        OracleParams {
            noise_base: Some(self.noise_base),
            median_raw: Some(self.median_raw),
            ..self.params.clone()
        }
    }

    pub fn noise_free(&self, g: &MolecularGraph) -> f64 {
        raw_score(g, &self.params.weights)
    }

    /// Noisy score, or NaN for a failed docking. The random stream is keyed
    /// by the oracle seed and the molecule's canonical hash, so the result
    /// does not depend on call order.
    pub fn dock(&self, g: &MolecularGraph) -> f64 {
        let raw = self.noise_free(g);
        let key = canonical_hash(g) ^ self.params.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        if rng.random::<f64>() < self.params.nan_fraction {
            return f64::NAN;
        }
        let std = self.noise_base + self.params.noise_slope * (raw - self.median_raw).max(0.0);
        let z: f64 = rng.sample(StandardNormal);
        raw + std.max(0.0) * z
    }
}

fn calibration(weights: &[f64; 5]) -> Result<(f64, f64), ScreeningError> {
    let params = GeneratorParams {
        seed: CALIBRATION_SEED,
        ..GeneratorParams::default()
    };
    let lib = generate_random_library(&params, CALIBRATION_SIZE)?;
    let mut raw: Vec<f64> = lib.iter().map(|g| raw_score(g, weights)).collect();
    raw.sort_by(f64::total_cmp);
    let n = raw.len() as f64;
    let median = (raw[raw.len() / 2] + raw[(raw.len() - 1) / 2]) / 2.0;
    let mean = raw.iter().sum::<f64>() / n;
    let std = (raw.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    Ok((median, std))
}
