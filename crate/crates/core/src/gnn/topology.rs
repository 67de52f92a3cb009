use std::sync::Arc;

use crate::molgraph::{FeaturizedGraph, EDGE_RELATIONS, RELATION_SELF_LOOP};

/// Edges of one relation, arranged so that per-node transforms are computed
/// once per distinct endpoint and then gathered per edge.
#[derive(Clone, Debug)]
pub struct RelationEdges {
    pub relation: usize,
    /// Distinct target nodes, ascending.
    pub targets: Arc<Vec<usize>>,
    /// Distinct source nodes, ascending.
    pub sources: Arc<Vec<usize>>,
    /// For each edge, position of its target within `targets`.
    pub edge_target_pos: Arc<Vec<usize>>,
    /// For each edge, position of its source within `sources`.
    pub edge_source_pos: Arc<Vec<usize>>,
    /// For each edge, its target node.
    pub edge_targets: Vec<usize>,
}

impl RelationEdges {
    pub fn num_edges(&self) -> usize {
        self.edge_targets.len()
    }
}

/// Message-passing structure of a (batched) featurized graph.
#[derive(Clone, Debug)]
pub struct Topology {
    pub num_nodes: usize,
    pub num_graphs: usize,
    pub graph_segment: Arc<Vec<usize>>,
    /// Relations that have at least one edge, in relation order.
    pub relations: Vec<RelationEdges>,
    /// Edge targets concatenated over `relations`.
    pub all_targets: Arc<Vec<usize>>,
    /// Same, skipping the self-loop relation.
    pub targets_without_self_loops: Arc<Vec<usize>>,
}

impl Topology {
    /// Builds from explicit edge lists; `relation[e]` must be below
    /// `num_relations`.
    pub fn from_edges(
        num_nodes: usize,
        edges: &[(usize, usize)],
        relation: &[usize],
        num_relations: usize,
        graph_segment: Vec<usize>,
        num_graphs: usize,
    ) -> Topology {
        assert_eq!(edges.len(), relation.len());
        let mut per_rel: Vec<Vec<(usize, usize)>> = vec![Vec::new(); num_relations];
        for (&(s, t), &r) in edges.iter().zip(relation) {
            per_rel[r].push((s, t));
        }
        let mut lookup = vec![usize::MAX; num_nodes];
        let mut relations = Vec::new();
        for (r, list) in per_rel.into_iter().enumerate() {
            if list.is_empty() {
                continue;
            }
            let distinct = |pick: fn(&(usize, usize)) -> usize| {
                let mut v: Vec<usize> = list.iter().map(pick).collect();
                v.sort_unstable();
                v.dedup();
                v
            };
            let targets = distinct(|e| e.1);
            let sources = distinct(|e| e.0);
            let mut positions = |nodes: &[usize], pick: fn(&(usize, usize)) -> usize| {
                for (k, &v) in nodes.iter().enumerate() {
                    lookup[v] = k;
                }
                list.iter().map(|e| lookup[pick(e)]).collect::<Vec<_>>()
            };
            let edge_target_pos = positions(&targets, |e| e.1);
            let edge_source_pos = positions(&sources, |e| e.0);
            relations.push(RelationEdges {
                relation: r,
                edge_targets: list.iter().map(|e| e.1).collect(),
                targets: Arc::new(targets),
                sources: Arc::new(sources),
                edge_target_pos: Arc::new(edge_target_pos),
                edge_source_pos: Arc::new(edge_source_pos),
            });
        }
        let all_targets: Vec<usize> = relations.iter().flat_map(|r| r.edge_targets.iter().copied()).collect();
        let no_self: Vec<usize> = relations
            .iter()
            .filter(|r| r.relation != RELATION_SELF_LOOP)
            .flat_map(|r| r.edge_targets.iter().copied())
            .collect();
        Topology {
            num_nodes,
            num_graphs,
            graph_segment: Arc::new(graph_segment),
            relations,
            all_targets: Arc::new(all_targets),
            targets_without_self_loops: Arc::new(no_self),
        }
    }

    pub fn new(g: &FeaturizedGraph) -> Topology {
        Topology::from_edges(
            g.num_nodes(),
            &g.edge_index,
            &g.edge_relation,
            EDGE_RELATIONS,
            g.graph_segment.clone(),
            g.num_graphs,
        )
    }
}
