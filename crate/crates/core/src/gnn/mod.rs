//! Relational message-passing surrogate: input projection, stacked graph
//! layers with layer-norm/dropout/relu between them, mean pooling and a
//! linear regression head.

mod layers;
mod topology;

pub use layers::{film_layer, gatv2_layer, gin_layer, FilmKind, FilmParams, GatParams, GinParams, GAT_LEAKY_SLOPE};
pub use topology::{RelationEdges, Topology};

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffcore::{DiffError, Tape, Tensor, Var};
use crate::molgraph::{FeaturizedGraph, EDGE_RELATIONS, NODE_FEATURES, RELATION_SELF_LOOP};

pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GnnError {
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error("batch contains no graphs")]
    EmptyBatch,
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Architecture {
    #[serde(rename = "GIN")]
    Gin,
    #[serde(rename = "GATv2")]
    GatV2,
    #[serde(rename = "FiLM")]
    Film,
    #[serde(rename = "FiLMv2")]
    FilmV2,
    #[serde(rename = "FiLMv2Tanh")]
    FilmV2Tanh,
    #[serde(rename = "FiLMv2SourceAct")]
    FilmV2SourceAct,
}

impl Architecture {
    pub const ALL: [Architecture; 6] = [
        Architecture::Gin,
        Architecture::GatV2,
        Architecture::Film,
        Architecture::FilmV2,
        Architecture::FilmV2Tanh,
        Architecture::FilmV2SourceAct,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Gin => "GIN",
            Architecture::GatV2 => "GATv2",
            Architecture::Film => "FiLM",
            Architecture::FilmV2 => "FiLMv2",
            Architecture::FilmV2Tanh => "FiLMv2Tanh",
            Architecture::FilmV2SourceAct => "FiLMv2SourceAct",
        }
    }

    fn film_kind(self) -> Option<FilmKind> {
        match self {
            Architecture::Film => Some(FilmKind::Film),
            Architecture::FilmV2 => Some(FilmKind::FilmV2),
            Architecture::FilmV2Tanh => Some(FilmKind::FilmV2Tanh),
            Architecture::FilmV2SourceAct => Some(FilmKind::FilmV2SourceAct),
            _ => None,
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = GnnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Architecture::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| GnnError::InvalidConfig(format!("unknown architecture `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub dropout_rate: f64,
    pub input_dim: usize,
    /// Whether graphs are augmented with a virtual node before featurizing.
    pub virtual_node: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            architecture: Architecture::FilmV2,
            hidden_dim: 64,
            num_layers: 4,
            dropout_rate: 0.1,
            input_dim: NODE_FEATURES,
            virtual_node: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), GnnError> {
        let bad = |m: String| Err(GnnError::InvalidConfig(m));
        if self.hidden_dim == 0 || self.num_layers == 0 {
            return bad("hidden_dim and num_layers must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate {} outside [0, 1)", self.dropout_rate));
        }
        if self.input_dim != NODE_FEATURES {
            return bad(format!("input_dim must be {NODE_FEATURES}, got {}", self.input_dim));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
enum Init {
    Glorot,
    Zeros,
    Ones,
}

/// Names, shapes and initializers of every parameter, in storage order.
fn layout(c: &ModelConfig) -> Vec<(String, Vec<usize>, Init)> {
    let d = c.hidden_dim;
    let mut out = vec![
        ("input.weight".to_string(), vec![c.input_dim, d], Init::Glorot),
        ("input.bias".to_string(), vec![d], Init::Zeros),
    ];
    for l in 0..c.num_layers {
        match c.architecture {
            Architecture::Gin => {
                for r in (0..EDGE_RELATIONS).filter(|&r| r != RELATION_SELF_LOOP) {
                    out.push((format!("layer{l}.relation{r}"), vec![d, d], Init::Glorot));
                }
                out.push((format!("layer{l}.eps"), vec![1], Init::Zeros));
                out.push((format!("layer{l}.mlp1.weight"), vec![d, d], Init::Glorot));
                out.push((format!("layer{l}.mlp1.bias"), vec![d], Init::Zeros));
                out.push((format!("layer{l}.mlp2.weight"), vec![d, d], Init::Glorot));
                out.push((format!("layer{l}.mlp2.bias"), vec![d], Init::Zeros));
            }
            Architecture::GatV2 => {
                for r in 0..EDGE_RELATIONS {
                    out.push((format!("layer{l}.source{r}"), vec![d, d], Init::Glorot));
                    out.push((format!("layer{l}.target{r}"), vec![d, d], Init::Glorot));
                }
                out.push((format!("layer{l}.attention"), vec![d, 1], Init::Glorot));
            }
            _ => {
                for r in 0..EDGE_RELATIONS {
                    for w in ["gamma", "alpha", "beta"] {
                        out.push((format!("layer{l}.{w}{r}"), vec![d, d], Init::Glorot));
                    }
                }
            }
        }
        if l + 1 < c.num_layers {
            out.push((format!("norm{l}.gain"), vec![d], Init::Ones));
            out.push((format!("norm{l}.bias"), vec![d], Init::Zeros));
        }
    }
    out.push(("head.weight".to_string(), vec![d, 1], Init::Glorot));
    out.push(("head.bias".to_string(), vec![1], Init::Zeros));
    out
}

/// Architecture plus parameter tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    names: Vec<String>,
    pub params: Vec<Tensor>,
    index: HashMap<String, usize>,
}

impl Model {
    /// Fresh model: Glorot-uniform matrices, zero biases, unit norm gains.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Model, GnnError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entries = layout(&config);
        let mut names = Vec::with_capacity(entries.len());
        let mut params = Vec::with_capacity(entries.len());
        for (name, shape, init) in entries {
            let n: usize = shape.iter().product();
            let data = match init {
                Init::Zeros => vec![0.0; n],
                Init::Ones => vec![1.0; n],
                Init::Glorot => {
                    let limit = (6.0 / (shape[0] + shape[1]) as f64).sqrt();
                    (0..n).map(|_| rng.random_range(-limit..limit)).collect()
                }
            };
            names.push(name);
            params.push(Tensor::new(shape, data)?);
        }
        Ok(Model::assemble(config, names, params))
    }

    /// Rebuilds a model from stored parameters, checking names and shapes.
    pub fn from_named(config: ModelConfig, named: Vec<(String, Tensor)>) -> Result<Model, GnnError> {
        config.validate()?;
        let entries = layout(&config);
        if entries.len() != named.len() {
            return Err(GnnError::InvalidConfig(format!(
                "expected {} parameter tensors, found {}",
                entries.len(),
                named.len()
            )));
        }
        let mut names = Vec::new();
        let mut params = Vec::new();
        for ((want, shape, _), (name, t)) in entries.into_iter().zip(named) {
            if want != name || t.shape() != shape.as_slice() {
                return Err(GnnError::InvalidConfig(format!(
                    "parameter `{name}` {:?} does not match expected `{want}` {shape:?}",
                    t.shape()
                )));
            }
            names.push(name);
            params.push(t);
        }
        Ok(Model::assemble(config, names, params))
    }

    fn assemble(config: ModelConfig, names: Vec<String>, params: Vec<Tensor>) -> Model {
        let index = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        Model {
            config,
            names,
            params,
            index,
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn num_parameters(&self) -> usize {
        self.params.iter().map(Tensor::numel).sum()
    }

    fn var(&self, vars: &[Var], name: &str) -> Var {
        vars[self.index[name]]
    }

    /// Scores (`num_graphs x 1`) in standardized label space. `vars` are the
    /// parameters placed on `tape`, in storage order. Dropout is active iff
    /// `dropout_rng` is given.
    pub fn forward(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        g: &FeaturizedGraph,
        topo: &Topology,
        mut dropout_rng: Option<&mut dyn RngCore>,
    ) -> Result<Var, GnnError> {
        if g.num_graphs == 0 || g.num_nodes() == 0 {
            return Err(GnnError::EmptyBatch);
        }
        let c = &self.config;
        let x = tape.constant(g.node_features.clone());
        let h = tape.matmul(x, self.var(vars, "input.weight"))?;
        let mut h = tape.add_row(h, self.var(vars, "input.bias"))?;

        for l in 0..c.num_layers {
            let v = |name: &str| self.var(vars, &format!("layer{l}.{name}"));
            h = match c.architecture {
                Architecture::Gin => {
                    let mut relation = vec![v("mlp1.weight"); EDGE_RELATIONS];
                    for (r, slot) in relation.iter_mut().enumerate() {
                        if r != RELATION_SELF_LOOP {
                            *slot = v(&format!("relation{r}"));
                        }
                    }
                    let p = GinParams {
                        relation,
                        eps: v("eps"),
                        w1: v("mlp1.weight"),
                        b1: v("mlp1.bias"),
                        w2: v("mlp2.weight"),
                        b2: v("mlp2.bias"),
                    };
                    gin_layer(tape, h, topo, &p)?
                }
                Architecture::GatV2 => {
                    let p = GatParams {
                        source: (0..EDGE_RELATIONS).map(|r| v(&format!("source{r}"))).collect(),
                        target: (0..EDGE_RELATIONS).map(|r| v(&format!("target{r}"))).collect(),
                        attention: v("attention"),
                    };
                    gatv2_layer(tape, h, topo, &p)?
                }
                arch => {
                    let p = FilmParams {
                        gamma: (0..EDGE_RELATIONS).map(|r| v(&format!("gamma{r}"))).collect(),
                        alpha: (0..EDGE_RELATIONS).map(|r| v(&format!("alpha{r}"))).collect(),
                        beta: (0..EDGE_RELATIONS).map(|r| v(&format!("beta{r}"))).collect(),
                    };
                    film_layer(tape, h, topo, &p, arch.film_kind().expect("film family"))?
                }
            };
            if l + 1 < c.num_layers {
                let gain = self.var(vars, &format!("norm{l}.gain"));
                let bias = self.var(vars, &format!("norm{l}.bias"));
                h = tape.layer_norm(h, gain, bias, LAYER_NORM_EPS)?;
                if let Some(rng) = dropout_rng.as_deref_mut() {
                    h = tape.dropout(h, c.dropout_rate, rng, true);
                }
                h = tape.relu(h);
            }
        }

        let pooled = tape.segment_mean(h, topo.graph_segment.clone(), g.num_graphs)?;
        let out = tape.matmul(pooled, self.var(vars, "head.weight"))?;
        Ok(tape.add_row(out, self.var(vars, "head.bias"))?)
    }

    /// Evaluation-mode scores for every graph of `g`.
    pub fn predict(&self, g: &FeaturizedGraph) -> Result<Vec<f64>, GnnError> {
        let topo = Topology::new(g);
        let mut tape = Tape::new();
        let vars: Vec<Var> = self.params.iter().map(|p| tape.constant(p.clone())).collect();
        let out = self.forward(&mut tape, &vars, g, &topo, None)?;
        Ok(tape.value(out).data().to_vec())
    }

    /// Copies out the parameters with their names.
    pub fn named_params(&self) -> Vec<(String, Tensor)> {
        self.names.iter().cloned().zip(self.params.iter().cloned()).collect()
    }
}

#[cfg(test)]
mod tests;
