//! Graph layers as tape operations. Weight matrices are stored
//! `d_in x d_out` and applied as `h · W`; per-relation weights are indexed by
//! relation id.

use super::Topology;
use crate::diffcore::{DiffError, Tape, Var};

/// Member of the feature-wise linear modulation family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FilmKind {
    /// `relu(Σ relu((W_γ h_v)⊙(W_α h_u) + W_β h_v))`
    Film,
    /// `relu(Σ relu(W_γ h_v)⊙(W_α h_u) + relu(W_β h_v))`
    FilmV2,
    /// FiLMv2 with every relu replaced by tanh.
    FilmV2Tanh,
    /// FiLMv2 with an extra relu on `W_α h_u`.
    FilmV2SourceAct,
}

/// Per-relation weights, indexed by relation id.
pub struct FilmParams {
    pub gamma: Vec<Var>,
    pub alpha: Vec<Var>,
    pub beta: Vec<Var>,
}

pub struct GinParams {
    /// One transform per relation id; the self-loop slot is unused.
    pub relation: Vec<Var>,
    /// Scalar ε.
    pub eps: Var,
    pub w1: Var,
    pub b1: Var,
    pub w2: Var,
    pub b2: Var,
}

pub struct GatParams {
    pub source: Vec<Var>,
    pub target: Vec<Var>,
    /// Attention vector, `d_out x 1`.
    pub attention: Var,
}

pub const GAT_LEAKY_SLOPE: f64 = 0.2;

pub fn film_layer(t: &mut Tape, h: Var, topo: &Topology, p: &FilmParams, kind: FilmKind) -> Result<Var, DiffError> {
    let act = |t: &mut Tape, x: Var| match kind {
        FilmKind::FilmV2Tanh => t.tanh(x),
        _ => t.relu(x),
    };
    let mut messages = Vec::with_capacity(topo.relations.len());
    for rel in &topo.relations {
        let r = rel.relation;
        let ht = t.gather(h, rel.targets.clone())?;
        let hs = t.gather(h, rel.sources.clone())?;
        let mut g = t.matmul(ht, p.gamma[r])?;
        let mut b = t.matmul(ht, p.beta[r])?;
        let mut a = t.matmul(hs, p.alpha[r])?;
        if kind != FilmKind::Film {
            g = act(t, g);
            b = act(t, b);
        }
        if kind == FilmKind::FilmV2SourceAct {
            a = t.relu(a);
        }
        let ge = t.gather(g, rel.edge_target_pos.clone())?;
        let be = t.gather(b, rel.edge_target_pos.clone())?;
        let ae = t.gather(a, rel.edge_source_pos.clone())?;
        let prod = t.mul(ge, ae)?;
        let mut m = t.add(prod, be)?;
        if kind == FilmKind::Film {
            m = t.relu(m);
        }
        messages.push(m);
    }
    aggregate(t, h, topo, &messages, topo.all_targets.clone()).map(|s| act(t, s))
}

/// `MLP((1+ε)h_v + Σ_r Σ_u h_u W^r)` over all relations except self loops.
pub fn gin_layer(t: &mut Tape, h: Var, topo: &Topology, p: &GinParams) -> Result<Var, DiffError> {
    let mut messages = Vec::new();
    for rel in topo.relations.iter().filter(|r| r.relation != crate::molgraph::RELATION_SELF_LOOP) {
        let hs = t.gather(h, rel.sources.clone())?;
        let a = t.matmul(hs, p.relation[rel.relation])?;
        messages.push(t.gather(a, rel.edge_source_pos.clone())?);
    }
    let eps_h = t.mul(h, p.eps)?;
    let mut z = t.add(h, eps_h)?;
    if !messages.is_empty() {
        let s = aggregate(t, h, topo, &messages, topo.targets_without_self_loops.clone())?;
        z = t.add(z, s)?;
    }
    let z1 = t.matmul(z, p.w1)?;
    let z1 = t.add_row(z1, p.b1)?;
    let z1 = t.relu(z1);
    let z2 = t.matmul(z1, p.w2)?;
    t.add_row(z2, p.b2)
}

/// Single-head attention: `e = aᵀ leaky(W_s h_u + W_t h_v)`, softmax over
/// every incoming edge of `v`, output `Σ att · W_s h_u`.
pub fn gatv2_layer(t: &mut Tape, h: Var, topo: &Topology, p: &GatParams) -> Result<Var, DiffError> {
    let mut scores = Vec::new();
    let mut values = Vec::new();
    for rel in &topo.relations {
        let r = rel.relation;
        let hs = t.gather(h, rel.sources.clone())?;
        let ht = t.gather(h, rel.targets.clone())?;
        let s = t.matmul(hs, p.source[r])?;
        let tt = t.matmul(ht, p.target[r])?;
        let se = t.gather(s, rel.edge_source_pos.clone())?;
        let te = t.gather(tt, rel.edge_target_pos.clone())?;
        let z = t.add(se, te)?;
        let z = t.leaky_relu(z, GAT_LEAKY_SLOPE);
        scores.push(t.matmul(z, p.attention)?);
        values.push(se);
    }
    if scores.is_empty() {
        let d = t.value(p.attention).rows();
        let zero = t.constant(crate::diffcore::Tensor::zeros(&[topo.num_nodes, d]));
        return Ok(zero);
    }
    let scores = t.concat_rows(&scores)?;
    let values = t.concat_rows(&values)?;
    let att = t.segment_softmax(scores, topo.all_targets.clone(), topo.num_nodes)?;
    let weighted = t.mul_col(values, att)?;
    t.segment_sum(weighted, topo.all_targets.clone(), topo.num_nodes)
}

fn aggregate(
    t: &mut Tape,
    h: Var,
    topo: &Topology,
    messages: &[Var],
    targets: std::sync::Arc<Vec<usize>>,
) -> Result<Var, DiffError> {
    if messages.is_empty() {
        let d = t.value(h).cols();
        return Ok(t.constant(crate::diffcore::Tensor::zeros(&[topo.num_nodes, d])));
    }
    let all = if messages.len() == 1 {
        messages[0]
    } else {
        t.concat_rows(messages)?
    };
    t.segment_sum(all, targets, topo.num_nodes)
}
