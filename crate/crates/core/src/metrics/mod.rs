//! Rank-based evaluation of a surrogate against oracle scores. Lower scores
//! are better throughout: the "top" of a ranking is its smallest values.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("fraction {0} outside (0, 1]")]
    BadFraction(f64),
    #[error("{0} true scores but {1} predictions")]
    LengthMismatch(usize, usize),
    #[error("no items to rank")]
    TooFewItems,
    #[error("scores must be finite")]
    NonFinite,
    #[error("grid needs at least two points per axis")]
    BadGrid,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub const GRID_MIN: f64 = 1e-3;
pub const GRID_POINTS: usize = 50;

/// Oracle and surrogate scores for the same items.
#[derive(Clone, Debug)]
pub struct RankedPair {
    y_true: Vec<f64>,
    y_pred: Vec<f64>,
    /// Items in ascending predicted score, ties by index.
    pred_order: Vec<usize>,
    /// Position of each item in `pred_order`.
    pred_rank: Vec<usize>,
    /// Items in ascending true score, ties by index.
    true_order: Vec<usize>,
}

impl RankedPair {
    pub fn new(y_true: Vec<f64>, y_pred: Vec<f64>) -> Result<RankedPair, MetricsError> {
        if y_true.len() != y_pred.len() {
            return Err(MetricsError::LengthMismatch(y_true.len(), y_pred.len()));
        }
        if y_true.is_empty() {
            return Err(MetricsError::TooFewItems);
        }
        if y_true.iter().chain(&y_pred).any(|v| !v.is_finite()) {
            return Err(MetricsError::NonFinite);
        }
        let pred_order = ascending_order(&y_pred);
        let mut pred_rank = vec![0; y_pred.len()];
        for (r, &i) in pred_order.iter().enumerate() {
            pred_rank[i] = r;
        }
        let true_order = ascending_order(&y_true);
        Ok(RankedPair {
            y_true,
            y_pred,
            pred_order,
            pred_rank,
            true_order,
        })
    }

    pub fn len(&self) -> usize {
        self.y_true.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_true.is_empty()
    }

    pub fn y_true(&self) -> &[f64] {
        &self.y_true
    }

    pub fn y_pred(&self) -> &[f64] {
        &self.y_pred
    }

    /// Size of the true top-`kz` set that falls inside the predicted
    /// top-`ks` set.
    fn overlap(&self, ks: usize, kz: usize) -> usize {
        self.true_order[..kz].iter().filter(|&&i| self.pred_rank[i] < ks).count()
    }

    /// Predicted ranks of the true top-`kz` items, ascending.
    fn sorted_pred_ranks(&self, kz: usize) -> Vec<usize> {
        let mut r: Vec<usize> = self.true_order[..kz].iter().map(|&i| self.pred_rank[i]).collect();
        r.sort_unstable();
        r
    }

    pub fn predicted_order(&self) -> &[usize] {
        &self.pred_order
    }
}

fn ascending_order(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    idx
}

/// `ceil(f * n)`, clamped to `[1, n]`. Products within 1e-9 (relative) of an
/// integer are taken as that integer, so `0.07 * 100` gives 7, not 8.
pub fn top_count(n: usize, fraction: f64) -> Result<usize, MetricsError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(MetricsError::BadFraction(fraction));
    }
    let x = fraction * n as f64;
    let r = x.round();
    let k = if (x - r).abs() <= 1e-9 * r.max(1.0) { r } else { x.ceil() };
    Ok((k as usize).clamp(1, n.max(1)))
}

/// Indices of the `ceil(f * n)` smallest scores, ties by ascending index,
/// in ranking order.
pub fn top_fraction(scores: &[f64], fraction: f64) -> Result<Vec<usize>, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::TooFewItems);
    }
    let k = top_count(scores.len(), fraction)?;
    let mut order = ascending_order(scores);
    order.truncate(k);
    Ok(order)
}

/// `R_{σ,ζ}`: share of the true top-ζ items found in the predicted top-σ.
pub fn recall_at(rp: &RankedPair, sigma: f64, zeta: f64) -> Result<f64, MetricsError> {
    let ks = top_count(rp.len(), sigma)?;
    let kz = top_count(rp.len(), zeta)?;
    Ok(rp.overlap(ks, kz) as f64 / kz as f64)
}

/// Overlap normalized by `min(kσ, kζ)`, so a perfect ranking scores 1.
pub fn normalized_recall(rp: &RankedPair, sigma: f64, zeta: f64) -> Result<f64, MetricsError> {
    let ks = top_count(rp.len(), sigma)?;
    let kz = top_count(rp.len(), zeta)?;
    Ok(rp.overlap(ks, kz) as f64 / ks.min(kz) as f64)
}

/// `points` log-spaced values from `GRID_MIN` to 1.
pub fn log_grid(points: usize) -> Result<Vec<f64>, MetricsError> {
    if points < 2 {
        return Err(MetricsError::BadGrid);
    }
    let lo = GRID_MIN.log10();
    Ok((0..points)
        .map(|i| {
            if i + 1 == points {
                1.0
            } else {
                10f64.powf(lo - lo * i as f64 / (points - 1) as f64)
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResSurface {
    pub sigma_grid: Vec<f64>,
    pub zeta_grid: Vec<f64>,
    /// `recall[i][j]` is the normalized recall at `(sigma_grid[i], zeta_grid[j])`.
    pub recall: Vec<Vec<f64>>,
    pub res_score: f64,
}

/// Normalized recall for every σ in `sigmas` at one ζ, using one sort.
fn recall_row(rp: &RankedPair, sigmas: &[f64], zeta: f64) -> Result<Vec<f64>, MetricsError> {
    let kz = top_count(rp.len(), zeta)?;
    let ranks = rp.sorted_pred_ranks(kz);
    sigmas
        .iter()
        .map(|&s| {
            let ks = top_count(rp.len(), s)?;
            let hits = ranks.partition_point(|&r| r < ks);
            Ok(hits as f64 / ks.min(kz) as f64)
        })
        .collect()
}

pub fn res_surface(rp: &RankedPair, points: usize) -> Result<ResSurface, MetricsError> {
    let grid = log_grid(points)?;
    if rp.len() < 1000 {
        log::warn!("{} items: grid resolution exceeds rank resolution", rp.len());
    }
    let mut recall = vec![vec![0.0; points]; points];
    for (j, &z) in grid.iter().enumerate() {
        for (i, r) in recall_row(rp, &grid, z)?.into_iter().enumerate() {
            recall[i][j] = r;
        }
    }
    let res_score = recall.iter().flatten().sum::<f64>() / (points * points) as f64;
    Ok(ResSurface {
        sigma_grid: grid.clone(),
        zeta_grid: grid,
        recall,
        res_score,
    })
}

/// Recall-threshold curve: normalized recall against σ at fixed ζ.
#[derive(Clone, Debug, PartialEq)]
pub struct Rtc {
    pub zeta: f64,
    pub sigma: Vec<f64>,
    pub recall: Vec<f64>,
}

pub fn rtc(rp: &RankedPair, zeta: f64, points: usize) -> Result<Rtc, MetricsError> {
    let sigma = log_grid(points)?;
    let recall = recall_row(rp, &sigma, zeta)?;
    Ok(Rtc { zeta, sigma, recall })
}

/// Trapezoidal area over `log10 σ`, divided by the width of the log range.
pub fn aurtc(curve: &Rtc) -> f64 {
    let x: Vec<f64> = curve.sigma.iter().map(|s| s.log10()).collect();
    let area: f64 = (1..x.len())
        .map(|i| (x[i] - x[i - 1]) * (curve.recall[i] + curve.recall[i - 1]) / 2.0)
        .sum();
    area / (x[x.len() - 1] - x[0])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision and recall of the predicted top-σ set against the true top-ζ.
pub fn classification_metrics(rp: &RankedPair, sigma: f64, zeta: f64) -> Result<Classification, MetricsError> {
    let ks = top_count(rp.len(), sigma)?;
    let kz = top_count(rp.len(), zeta)?;
    let tp = rp.overlap(ks, kz) as f64;
    let precision = tp / ks as f64;
    let recall = tp / kz as f64;
    let f1 = if tp == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Classification { precision, recall, f1 })
}

/// AUROC of `-y_pred` against membership in the true top-ζ set, with
/// midranks for tied predictions. `None` when one class is empty.
pub fn auroc(rp: &RankedPair, zeta: f64) -> Result<Option<f64>, MetricsError> {
    let n = rp.len();
    let kz = top_count(n, zeta)?;
    if kz == n {
        return Ok(None);
    }
    let mut positive = vec![false; n];
    for &i in &rp.true_order[..kz] {
        positive[i] = true;
    }
    // Rank 1 is the highest predicted score (least likely hit). Walk the
    // predicted order backwards so ranks grow with -y_pred.
    let order: Vec<usize> = rp.pred_order.iter().rev().copied().collect();
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && rp.y_pred[order[end]] == rp.y_pred[order[start]] {
            end += 1;
        }
        let mid = (start + 1 + end) as f64 / 2.0;
        rank_sum += mid * order[start..end].iter().filter(|&&i| positive[i]).count() as f64;
        start = end;
    }
    let p = kz as f64;
    let q = (n - kz) as f64;
    Ok(Some((rank_sum - p * (p + 1.0) / 2.0) / (p * q)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecallEntry {
    pub sigma: f64,
    pub zeta: f64,
    pub k_sigma: usize,
    pub k_zeta: usize,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZetaEntry {
    pub zeta: f64,
    pub aurtc: f64,
    pub auroc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n: usize,
    pub res_score: f64,
    pub per_zeta: Vec<ZetaEntry>,
    pub per_pair: Vec<RecallEntry>,
}

/// Full report for the requested σ and ζ values; also returns the surface.
pub fn evaluate(
    rp: &RankedPair,
    sigmas: &[f64],
    zetas: &[f64],
    points: usize,
) -> Result<(MetricReport, ResSurface), MetricsError> {
    let surface = res_surface(rp, points)?;
    let mut per_zeta = Vec::new();
    for &z in zetas {
        per_zeta.push(ZetaEntry {
            zeta: z,
            aurtc: aurtc(&rtc(rp, z, points)?),
            auroc: auroc(rp, z)?,
        });
    }
    let mut per_pair = Vec::new();
    for &s in sigmas {
        for &z in zetas {
            let c = classification_metrics(rp, s, z)?;
            per_pair.push(RecallEntry {
                sigma: s,
                zeta: z,
                k_sigma: top_count(rp.len(), s)?,
                k_zeta: top_count(rp.len(), z)?,
                recall: c.recall,
                precision: c.precision,
                f1: c.f1,
            });
        }
    }
    let report = MetricReport {
        n: rp.len(),
        res_score: surface.res_score,
        per_zeta,
        per_pair,
    };
    Ok((report, surface))
}

/// Writes the surface as `sigma,zeta,recall` rows.
pub fn write_surface_csv(path: &Path, s: &ResSurface) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["sigma", "zeta", "recall"])?;
    for (i, sigma) in s.sigma_grid.iter().enumerate() {
        for (j, zeta) in s.zeta_grid.iter().enumerate() {
            w.write_record([sigma.to_string(), zeta.to_string(), s.recall[i][j].to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
