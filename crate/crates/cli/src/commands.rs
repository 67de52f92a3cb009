use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use dsd_core::metrics::{self, MetricReport, RankedPair};
use dsd_core::molgraph::io::{format_score, read_dataset, read_library_lines, write_dataset, write_library};
use dsd_core::molgraph::{generate_random_library, parse_smiles, write_smiles, MolecularGraph};
use dsd_core::screening::{self, featurize_library, run_dsd, split_indices, subsample, Oracle};
use dsd_core::training::{self, LabeledDataset, ModelCheckpoint, Split, TrainHistory};
use serde::{Deserialize, Serialize};

use crate::config::{resolved_path_for, RunConfig};
use crate::{Common, UsageError};

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(UsageError(msg.into()))
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(common.config.as_deref()).map_err(|e| usage(format!("{e:#}")))?;
    if let Some(s) = common.seed {
        cfg.set_seed(s);
    }
    cfg.resolve_seeds();
    check(&cfg)?;
    Ok(cfg)
}

fn check(cfg: &RunConfig) -> Result<()> {
    let bad = |e: &dyn std::fmt::Display| usage(format!("invalid config: {e}"));
    cfg.generator.validate().map_err(|e| bad(&e))?;
    cfg.model.validate().map_err(|e| bad(&e))?;
    cfg.train.validate().map_err(|e| bad(&e))?;
    cfg.pipeline_config().validate().map_err(|e| bad(&e))?;
    Ok(())
}

fn require(flag: Option<PathBuf>, configured: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    flag.or_else(|| configured.clone())
        .ok_or_else(|| usage(format!("missing --{name} (or paths.{name} in the config)")))
}

/// Parses every line, reporting the first failure by line number.
fn parse_all(lines: &[(usize, String)], source: &Path) -> Result<Vec<MolecularGraph>> {
    lines
        .iter()
        .map(|(line, s)| parse_smiles(s).map_err(|e| anyhow!("{}: line {line}: {e}", source.display())))
        .collect()
}

fn read_molecules(path: &Path) -> Result<(Vec<String>, Vec<MolecularGraph>)> {
    let lines = read_library_lines(path).with_context(|| format!("reading {}", path.display()))?;
    let graphs = parse_all(&lines, path)?;
    Ok((lines.into_iter().map(|(_, s)| s).collect(), graphs))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

pub fn gen_data(common: &Common, count: usize, out: Option<PathBuf>) -> Result<()> {
    if count == 0 {
        return Err(usage("--count must be positive"));
    }
    let cfg = load_config(common)?;
    let out = require(out, &cfg.paths.library, "library")?;
    let graphs = generate_random_library(&cfg.generator, count)?;
    let smiles = graphs.iter().map(write_smiles).collect::<Result<Vec<_>, _>>()?;
    write_library(&out, &smiles)?;
    cfg.write_resolved(&resolved_path_for(&out))?;
    println!("wrote {count} molecules to {} (seed {})", out.display(), cfg.generator.seed);
    Ok(())
}

pub fn dock(common: &Common, input: Option<PathBuf>, out: &Path, noise_free: bool) -> Result<()> {
    let cfg = load_config(common)?;
    let input = require(input, &cfg.paths.library, "in")?;
    let (smiles, graphs) = read_molecules(&input)?;
    let oracle = Oracle::new(cfg.oracle.clone()).map_err(|e| usage(format!("invalid oracle settings: {e}")))?;
    let rows: Vec<(String, f64)> = smiles
        .into_iter()
        .zip(&graphs)
        .map(|(s, g)| {
            let y = if noise_free { oracle.noise_free(g) } else { oracle.dock(g) };
            (s, y)
        })
        .collect();
    if let Err(e) = write_dataset(out, &rows) {
        let _ = fs::remove_file(out);
        return Err(e.into());
    }
    let mut resolved = cfg.clone();
    resolved.oracle = oracle.resolved_params();
    resolved.write_resolved(&resolved_path_for(out))?;
    let nan = rows.iter().filter(|(_, y)| y.is_nan()).count();
    println!("docked {} molecules into {} ({nan} failed)", rows.len(), out.display());
    Ok(())
}

/// Deterministic summary of one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub dataset_size: usize,
    pub dropped_nan: usize,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub best_val_wmse: f64,
    pub epoch_of_best: usize,
    pub epochs_run: usize,
    pub test_wmse: Option<f64>,
    pub test_metrics: Option<MetricReport>,
}

pub struct Fit {
    pub checkpoint: ModelCheckpoint,
    pub history: TrainHistory,
    pub summary: FitSummary,
}

/// Subsamples `rho` of the labeled rows, splits 80/10/10, trains, and
/// evaluates on the test split.
pub fn fit(rows: &[(MolecularGraph, f64)], cfg: &RunConfig, rho: f64) -> Result<Fit> {
    let picked = subsample(rows.len(), rho, cfg.train.seed)?;
    let kept: Vec<&(MolecularGraph, f64)> = picked.iter().map(|&i| &rows[i]).filter(|r| !r.1.is_nan()).collect();
    let dropped_nan = picked.len() - kept.len();
    let graphs: Vec<MolecularGraph> = kept.iter().map(|r| r.0.clone()).collect();
    let features = featurize_library(&graphs, cfg.model.virtual_node)?;
    let [tr, va, te] = split_indices(kept.len(), cfg.train.seed);
    let subset = |idx: &[usize], split| {
        LabeledDataset::new(
            split,
            idx.iter().map(|&i| features[i].clone()).collect(),
            idx.iter().map(|&i| kept[i].1).collect(),
        )
    };
    let train_set = subset(&tr, Split::Train)?;
    let val_set = subset(&va, Split::Val)?;
    let test_set = subset(&te, Split::Test)?;

    let started = Instant::now();
    let (checkpoint, history) = training::train(&cfg.model, &cfg.train, &train_set, &val_set)?;
    log::info!(
        "trained {} epochs in {:.1}s, best validation W-MSE {:.5} at epoch {}",
        history.epochs.len(),
        started.elapsed().as_secs_f64(),
        checkpoint.best_val_loss,
        checkpoint.epoch_of_best
    );

    let (test_wmse, test_metrics) = if test_set.is_empty() {
        (None, None)
    } else {
        let pred = checkpoint.predict(&test_set.graphs)?;
        let z: Vec<f64> = pred.iter().map(|&v| checkpoint.labels.standardize(v)).collect();
        let y: Vec<f64> = test_set.labels.iter().map(|&v| checkpoint.labels.standardize(v)).collect();
        let wmse = training::wmse_loss(&z, &y, cfg.train.alpha)?;
        let rp = RankedPair::new(test_set.labels.clone(), pred)?;
        let (report, _) = metrics::evaluate(&rp, &cfg.sigmas(), &cfg.metrics.zeta_list, cfg.metrics.grid_points)?;
        (Some(wmse), Some(report))
    };
    let summary = FitSummary {
        dataset_size: picked.len(),
        dropped_nan,
        train_size: train_set.len(),
        val_size: val_set.len(),
        test_size: test_set.len(),
        best_val_wmse: checkpoint.best_val_loss,
        epoch_of_best: checkpoint.epoch_of_best,
        epochs_run: history.epochs.len(),
        test_wmse,
        test_metrics,
    };
    Ok(Fit {
        checkpoint,
        history,
        summary,
    })
}

fn read_labeled(path: &Path) -> Result<Vec<(MolecularGraph, f64)>> {
    let rows = read_dataset(path).with_context(|| format!("reading {}", path.display()))?;
    rows.iter()
        .enumerate()
        .map(|(i, (s, y))| {
            let g = parse_smiles(s).map_err(|e| anyhow!("{}: line {}: {e}", path.display(), i + 2))?;
            Ok((g, *y))
        })
        .collect()
}

pub fn train(common: &Common, data: Option<PathBuf>, out: Option<PathBuf>) -> Result<()> {
    let cfg = load_config(common)?;
    let data = require(data, &cfg.paths.data, "data")?;
    let out = require(out, &cfg.paths.checkpoint, "checkpoint")?;
    let rows = read_labeled(&data)?;
    let f = fit(&rows, &cfg, 1.0)?;
    f.checkpoint.save(&out)?;
    f.history.write_csv(&sibling(&out, "history.csv"))?;
    write_json(&sibling(&out, "report.json"), &f.summary)?;
    cfg.write_resolved(&resolved_path_for(&out))?;
    println!(
        "saved {} (best validation W-MSE {} at epoch {})",
        out.display(),
        format_score(f.summary.best_val_wmse),
        f.summary.epoch_of_best
    );
    Ok(())
}

pub fn infer(checkpoint: &Path, input: &Path, out: &Path) -> Result<()> {
    let ck = ModelCheckpoint::load(checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
    let (smiles, graphs) = read_molecules(input)?;
    let features = featurize_library(&graphs, ck.model.config.virtual_node)?;
    let started = Instant::now();
    let pred = ck.predict(&features)?;
    log::info!("scored {} molecules in {:.2}s", pred.len(), started.elapsed().as_secs_f64());
    let mut w = csv::Writer::from_path(out)?;
    w.write_record(["index", "smiles", "pred_score"])?;
    for (i, (s, p)) in smiles.iter().zip(&pred).enumerate() {
        w.write_record([i.to_string(), s.clone(), format_score(*p)])?;
    }
    w.flush()?;
    println!("wrote {} predictions to {}", pred.len(), out.display());
    Ok(())
}

pub fn screen(common: &Common, library: Option<PathBuf>, outdir: Option<PathBuf>) -> Result<()> {
    let cfg = load_config(common)?;
    let library = require(library, &cfg.paths.library, "library")?;
    let outdir = require(outdir, &cfg.paths.outdir, "outdir")?;
    let (smiles, graphs) = read_molecules(&library)?;
    let oracle = Oracle::new(cfg.oracle.clone()).map_err(|e| usage(format!("invalid oracle settings: {e}")))?;
    let result = run_dsd(&graphs, &cfg.pipeline_config(), &cfg.model, &cfg.train, &oracle)?;
    screening::write_artifacts(&result, &smiles, &outdir)?;
    let mut resolved = cfg.clone();
    resolved.oracle = oracle.resolved_params();
    resolved.write_resolved(&outdir.join("config.toml"))?;
    for (z, r) in &result.report.recall_at_sigma {
        println!("R(sigma={}, zeta={z}) = {r}", cfg.pipeline.sigma);
    }
    println!("RES score {}", result.report.metrics.res_score);
    println!("modeled speedup {:.3}x", result.timing.speedup);
    Ok(())
}

/// Reads a CSV with a `smiles` column (optional) and one score column named
/// `dock_score`, `pred_score` or `score`.
fn read_scores(path: &Path) -> Result<Vec<(Option<String>, f64)>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = r.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let score = ["dock_score", "pred_score", "score"]
        .iter()
        .find_map(|n| find(n))
        .ok_or_else(|| usage(format!("{}: no dock_score, pred_score or score column", path.display())))?;
    let smiles = find("smiles");
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let y: f64 = rec[score]
            .trim()
            .parse()
            .map_err(|_| anyhow!("{}: line {}: bad score `{}`", path.display(), i + 2, &rec[score]))?;
        out.push((smiles.map(|c| rec[c].to_string()), y));
    }
    Ok(out)
}

pub fn metrics(config: Option<PathBuf>, truth: &Path, pred: &Path, out: &Path, surface: Option<PathBuf>) -> Result<()> {
    let cfg = load_config(&Common { config, seed: None })?;
    let t = read_scores(truth)?;
    let p = read_scores(pred)?;
    if t.len() != p.len() {
        bail!("{} has {} rows but {} has {}", truth.display(), t.len(), pred.display(), p.len());
    }
    let mut y_true = Vec::new();
    let mut y_pred = Vec::new();
    for (i, ((ts, ty), (ps, py))) in t.iter().zip(&p).enumerate() {
        if let (Some(a), Some(b)) = (ts, ps) {
            if a != b {
                bail!("row {}: SMILES differ (`{a}` vs `{b}`)", i + 1);
            }
        }
        if !ty.is_nan() && !py.is_nan() {
            y_true.push(*ty);
            y_pred.push(*py);
        }
    }
    let dropped = t.len() - y_true.len();
    let rp = RankedPair::new(y_true, y_pred)?;
    let (report, surf) = metrics::evaluate(&rp, &cfg.sigmas(), &cfg.metrics.zeta_list, cfg.metrics.grid_points)?;
    write_json(out, &report)?;
    let surface = surface.unwrap_or_else(|| sibling(out, "res.csv"));
    metrics::write_surface_csv(&surface, &surf)?;
    println!("n = {} ({dropped} NaN rows dropped), RES score {}", report.n, report.res_score);
    Ok(())
}

/// Axes of a hyperparameter sweep. Missing axes use the config value.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamGrid {
    pub hidden_dim: Vec<usize>,
    pub num_layers: Vec<usize>,
    pub dropout_rate: Vec<f64>,
    pub alpha: Vec<f64>,
    pub rho: Vec<f64>,
}

fn axis<T: Clone>(values: &[T], fallback: T) -> Vec<T> {
    if values.is_empty() {
        vec![fallback]
    } else {
        values.to_vec()
    }
}

pub fn grid(common: &Common, param_grid: &Path, data: Option<PathBuf>, outdir: Option<PathBuf>) -> Result<()> {
    let cfg = load_config(common)?;
    let data = require(data, &cfg.paths.data, "data")?;
    let outdir = require(outdir, &cfg.paths.outdir, "outdir")?;
    let text = fs::read_to_string(param_grid).with_context(|| format!("reading {}", param_grid.display()))?;
    let g: ParamGrid =
        toml::from_str(&text).map_err(|e| usage(format!("invalid grid {}: {e}", param_grid.display())))?;
    if g.rho.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
        return Err(usage("grid rho values must lie in (0, 1]"));
    }
    let rows = read_labeled(&data)?;
    fs::create_dir_all(&outdir)?;

    let mut combos = Vec::new();
    for &h in &axis(&g.hidden_dim, cfg.model.hidden_dim) {
        for &l in &axis(&g.num_layers, cfg.model.num_layers) {
            for &d in &axis(&g.dropout_rate, cfg.model.dropout_rate) {
                for &a in &axis(&g.alpha, cfg.train.alpha) {
                    for &r in &axis(&g.rho, 1.0) {
                        combos.push((h, l, d, a, r));
                    }
                }
            }
        }
    }

    let sigmas = cfg.sigmas();
    let zetas = cfg.metrics.zeta_list.clone();
    let mut header: Vec<String> = [
        "combo",
        "hidden_dim",
        "num_layers",
        "dropout_rate",
        "alpha",
        "rho",
        "dataset_size",
        "train_size",
        "best_val_wmse",
        "epoch_of_best",
        "test_wmse",
        "res_score",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(zetas.iter().map(|z| format!("aurtc_{z}")));
    for s in &sigmas {
        header.extend(zetas.iter().map(|z| format!("recall_{s}_{z}")));
    }
    header.push("error".into());

    let mut w = csv::Writer::from_path(outdir.join("summary.csv"))?;
    w.write_record(&header)?;
    let mut failures = 0;
    for (k, &(h, l, d, a, r)) in combos.iter().enumerate() {
        let mut c = cfg.clone();
        c.model.hidden_dim = h;
        c.model.num_layers = l;
        c.model.dropout_rate = d;
        c.train.alpha = a;
        let mut row = vec![k.to_string(), h.to_string(), l.to_string(), format_score(d), format_score(a), format_score(r)];
        let blank = header.len() - row.len() - 1;
        let outcome = check(&c).and_then(|_| fit(&rows, &c, r));
        match outcome {
            Ok(f) => {
                let dir = outdir.join(format!("combo_{k}"));
                fs::create_dir_all(&dir)?;
                f.checkpoint.save(&dir.join("model.json"))?;
                f.history.write_csv(&dir.join("history.csv"))?;
                write_json(&dir.join("report.json"), &f.summary)?;
                let s = &f.summary;
                row.push(s.dataset_size.to_string());
                row.push(s.train_size.to_string());
                row.push(format_score(s.best_val_wmse));
                row.push(s.epoch_of_best.to_string());
                row.push(s.test_wmse.map(format_score).unwrap_or_default());
                match &s.test_metrics {
                    Some(m) => {
                        row.push(format_score(m.res_score));
                        row.extend(m.per_zeta.iter().map(|z| format_score(z.aurtc)));
                        row.extend(m.per_pair.iter().map(|p| format_score(p.recall)));
                    }
                    None => row.extend(std::iter::repeat_n(String::new(), 1 + zetas.len() * (1 + sigmas.len()))),
                }
                row.push(String::new());
            }
            Err(e) => {
                failures += 1;
                log::warn!("combination {k} failed: {e:#}");
                row.extend(std::iter::repeat_n(String::new(), blank));
                row.push(format!("{e:#}"));
            }
        }
        w.write_record(&row)?;
        w.flush()?;
    }
    cfg.write_resolved(&outdir.join("config.toml"))?;
    println!(
        "ran {} combinations ({failures} failed); summary in {}",
        combos.len(),
        outdir.join("summary.csv").display()
    );
    Ok(())
}
