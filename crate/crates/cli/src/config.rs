use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use dsd_core::gnn::ModelConfig;
use dsd_core::molgraph::GeneratorParams;
use dsd_core::screening::{OracleParams, PipelineConfig};
use dsd_core::training::TrainConfig;
use serde::{Deserialize, Serialize};

/// Screening options that are not metric settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    pub rho: f64,
    pub sigma: f64,
    pub dock_seconds_per_molecule: f64,
}

impl Default for PipelineSection {
    fn default() -> Self {
        let p = PipelineConfig::default();
        PipelineSection {
            rho: p.rho,
            sigma: p.sigma,
            dock_seconds_per_molecule: p.dock_seconds_per_molecule,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    pub grid_points: usize,
    pub zeta_list: Vec<f64>,
    pub sigma_list: Vec<f64>,
}

impl Default for MetricsSection {
    fn default() -> Self {
        MetricsSection {
            grid_points: dsd_core::metrics::GRID_POINTS,
            zeta_list: vec![0.01, 0.001],
            sigma_list: vec![0.1],
        }
    }
}

/// Default file locations; command-line flags take precedence.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub library: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub outdir: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// When set, replaces the seed of every section.
    pub seed: Option<u64>,
    pub generator: GeneratorParams,
    pub oracle: OracleParams,
    pub pipeline: PipelineSection,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub metrics: MetricsSection,
    pub paths: PathsSection,
}

impl RunConfig {
    /// Reads a TOML config, or the defaults when `path` is `None`.
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    /// Pushes the global seed into every section.
    pub fn resolve_seeds(&mut self) {
        if let Some(s) = self.seed {
            self.generator.seed = s;
            self.oracle.seed = s;
            self.train.seed = s;
        }
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            rho: self.pipeline.rho,
            sigma: self.pipeline.sigma,
            zeta_list: self.metrics.zeta_list.clone(),
            sigma_list: self.metrics.sigma_list.clone(),
            grid_points: self.metrics.grid_points,
            dock_seconds_per_molecule: self.pipeline.dock_seconds_per_molecule,
            seed: self.train.seed,
        }
    }

    /// Every sigma to report: the pipeline sigma first, then the list.
    pub fn sigmas(&self) -> Vec<f64> {
        let mut s = vec![self.pipeline.sigma];
        s.extend(self.metrics.sigma_list.iter().copied().filter(|&v| v != self.pipeline.sigma));
        s
    }

    pub fn write_resolved(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self).context("serializing resolved config")?;
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }
}

/// Where the resolved config of a single-file output goes:
/// `<dir>/<stem>.config.toml`.
pub fn resolved_path_for(output: &Path) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
    output.with_file_name(format!("{stem}.config.toml"))
}
