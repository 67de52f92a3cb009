//! One-hot node features and relation-typed directed edges.

use serde::{Deserialize, Serialize};

use super::{BondOrder, Chirality, Element, MolecularGraph};
use crate::diffcore::Tensor;

/// Sizes of the nine one-hot blocks, in layout order: atomic number,
/// chirality, degree, formal charge, total H, radical electrons,
/// hybridization, aromatic, in-ring.
pub const NODE_FEATURE_BLOCKS: [usize; 9] = [13, 4, 8, 6, 6, 4, 4, 2, 2];
pub const NODE_FEATURES: usize = 49;
/// Single, Double, Triple, Aromatic, Virtual, SelfLoop.
pub const EDGE_RELATIONS: usize = 6;
pub const RELATION_VIRTUAL: usize = 4;
pub const RELATION_SELF_LOOP: usize = 5;

const ATOMIC_SLOTS: [u8; 11] = [1, 5, 6, 7, 8, 9, 15, 16, 17, 35, 53];
const ATOMIC_OTHER: usize = 11;
const ATOMIC_VIRTUAL: usize = 12;
const HYBRID_OTHER: usize = 3;

/// Numeric form of one graph, or of a disjoint union of graphs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeaturizedGraph {
    /// `num_nodes x NODE_FEATURES`, entries in {0, 1}.
    pub node_features: Tensor,
    /// Directed `(source, target)` pairs sorted by source, then target.
    pub edge_index: Vec<(usize, usize)>,
    pub edge_relation: Vec<usize>,
    /// Graph id of every node.
    pub graph_segment: Vec<usize>,
    pub num_graphs: usize,
}

impl FeaturizedGraph {
    pub fn num_nodes(&self) -> usize {
        self.graph_segment.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edge_index.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Hybridization {
    Sp,
    Sp2,
    Sp3,
}

fn hybridization(g: &MolecularGraph, atom: usize) -> Hybridization {
    let mut doubles = 0;
    let mut triple = false;
    for b in g.chemical_bonds().filter(|b| b.touches(atom)) {
        match b.order {
            BondOrder::Double => doubles += 1,
            BondOrder::Triple => triple = true,
            _ => {}
        }
    }
    if triple || doubles >= 2 {
        Hybridization::Sp
    } else if g.atoms[atom].is_aromatic || doubles == 1 {
        Hybridization::Sp2
    } else {
        Hybridization::Sp3
    }
}

fn slot_or_other(value: i64, lo: i64, hi: i64) -> usize {
    if (lo..=hi).contains(&value) {
        (value - lo) as usize
    } else {
        (hi - lo + 1) as usize
    }
}

/// Turns a graph into model input. Node order is preserved; every bond
/// yields two directed edges and every node one self loop.
pub fn featurize(g: &MolecularGraph) -> FeaturizedGraph {
    let n = g.atoms.len();
    let mut x = vec![0.0; n * NODE_FEATURES];
    let mut degree = vec![0usize; n];
    for b in g.chemical_bonds() {
        degree[b.a] += 1;
        degree[b.b] += 1;
    }

    for (i, atom) in g.atoms.iter().enumerate() {
        let row = &mut x[i * NODE_FEATURES..(i + 1) * NODE_FEATURES];
        let virtual_node = atom.is_virtual();
        let atomic = atomic_slot(atom.element);
        let chirality = match atom.chirality {
            Chirality::None => 0,
            Chirality::Clockwise => 1,
            Chirality::CounterClockwise => 2,
        };
        let hybrid = if virtual_node {
            HYBRID_OTHER
        } else {
            match hybridization(g, i) {
                Hybridization::Sp => 0,
                Hybridization::Sp2 => 1,
                Hybridization::Sp3 => 2,
            }
        };
        let slots = [
            atomic,
            chirality,
            slot_or_other(degree[i] as i64, 0, 6),
            slot_or_other(atom.formal_charge as i64, -2, 2),
            slot_or_other(atom.total_h() as i64, 0, 4),
            slot_or_other(atom.radical_electrons as i64, 0, 2),
            hybrid,
            atom.is_aromatic as usize,
            g.ring_membership[i] as usize,
        ];
        let mut offset = 0;
        for (slot, width) in slots.into_iter().zip(NODE_FEATURE_BLOCKS) {
            row[offset + slot] = 1.0;
            offset += width;
        }
    }

    let mut edges: Vec<(usize, usize, usize)> = Vec::with_capacity(2 * g.bonds.len() + n);
    for b in &g.bonds {
        let r = b.order.relation();
        edges.push((b.a, b.b, r));
        edges.push((b.b, b.a, r));
    }
    edges.extend((0..n).map(|i| (i, i, RELATION_SELF_LOOP)));
    edges.sort_unstable();

    FeaturizedGraph {
        node_features: Tensor::new(vec![n, NODE_FEATURES], x).expect("row-major layout"),
        edge_index: edges.iter().map(|&(s, t, _)| (s, t)).collect(),
        edge_relation: edges.iter().map(|&(_, _, r)| r).collect(),
        graph_segment: vec![0; n],
        num_graphs: 1,
    }
}

/// Disjoint union of several featurized graphs; node and edge blocks are
/// concatenated in input order and graph ids renumbered consecutively.
pub fn batch(graphs: &[&FeaturizedGraph]) -> FeaturizedGraph {
    let total_nodes: usize = graphs.iter().map(|g| g.num_nodes()).sum();
    let total_edges: usize = graphs.iter().map(|g| g.num_edges()).sum();
    let mut x = Vec::with_capacity(total_nodes * NODE_FEATURES);
    let mut edge_index = Vec::with_capacity(total_edges);
    let mut edge_relation = Vec::with_capacity(total_edges);
    let mut graph_segment = Vec::with_capacity(total_nodes);
    let mut node_offset = 0;
    let mut graph_offset = 0;
    for g in graphs {
        x.extend_from_slice(g.node_features.data());
        edge_index.extend(g.edge_index.iter().map(|&(s, t)| (s + node_offset, t + node_offset)));
        edge_relation.extend_from_slice(&g.edge_relation);
        graph_segment.extend(g.graph_segment.iter().map(|&s| s + graph_offset));
        node_offset += g.num_nodes();
        graph_offset += g.num_graphs;
    }
    FeaturizedGraph {
        node_features: Tensor::new(vec![total_nodes, NODE_FEATURES], x).expect("row-major layout"),
        edge_index,
        edge_relation,
        graph_segment,
        num_graphs: graph_offset,
    }
}

fn atomic_slot(e: Element) -> usize {
    if e == Element::VIRTUAL {
        ATOMIC_VIRTUAL
    } else {
        ATOMIC_SLOTS
            .iter()
            .position(|&z| z == e.atomic_number())
            .unwrap_or(ATOMIC_OTHER)
    }
}
