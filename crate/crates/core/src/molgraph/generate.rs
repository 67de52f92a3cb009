//! Seeded random molecule libraries for desk-scale experiments.

use std::collections::VecDeque;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::compare::{identical, relabel};
use super::perception::implicit_hydrogens;
use super::{parse_smiles, write_smiles_with_order, Atom, Bond, BondOrder, Element, MolError, MolecularGraph};

const GROWTH_ELEMENTS: [Element; 6] = [Element::C, Element::N, Element::O, Element::S, Element::F, Element::CL];
const MAX_ATTEMPTS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorParams {
    /// Inclusive range of heavy-atom counts.
    pub atom_count_range: (usize, usize),
    /// Relative weights of C, N, O, S, F, Cl for atoms added one at a time.
    pub element_weights: [f64; 6],
    /// Inclusive range of extra ring-closing bonds per molecule.
    pub ring_closure_count_range: (usize, usize),
    /// Chance that a growth step attaches a benzene-like ring instead of a
    /// single atom (only when six or more atoms are still missing).
    pub aromatic_ring_probability: f64,
    pub seed: u64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            atom_count_range: (8, 30),
            element_weights: [0.70, 0.12, 0.12, 0.02, 0.02, 0.02],
            ring_closure_count_range: (0, 2),
            aromatic_ring_probability: 0.15,
            seed: 0,
        }
    }
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<(), MolError> {
        let bad = |m: &str| Err(MolError::InvalidParams(m.into()));
        let (lo, hi) = self.atom_count_range;
        if lo == 0 || lo > hi {
            return bad("atom_count_range must be a non-empty range of positive counts");
        }
        if self.ring_closure_count_range.0 > self.ring_closure_count_range.1 {
            return bad("ring_closure_count_range is empty");
        }
        if self.element_weights.iter().any(|w| !w.is_finite() || *w < 0.0) || self.element_weights.iter().sum::<f64>() <= 0.0 {
            return bad("element_weights must be non-negative with a positive sum");
        }
        if !(0.0..=1.0).contains(&self.aromatic_ring_probability) {
            return bad("aromatic_ring_probability must lie in [0, 1]");
        }
        Ok(())
    }
}

/// Draws `count` molecules. Each returned graph is the parse of its own
/// SMILES string, so atom order matches what a library file reproduces.
pub fn generate_random_library(p: &GeneratorParams, count: usize) -> Result<Vec<MolecularGraph>, MolError> {
    p.validate()?;
    if count == 0 {
        return Err(MolError::InvalidParams("count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let weights = WeightedIndex::new(p.element_weights).map_err(|e| MolError::InvalidParams(e.to_string()))?;
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let g = (0..MAX_ATTEMPTS)
            .find_map(|_| Draft::grow(p, &weights, &mut rng))
            .ok_or_else(|| MolError::GenerationFailure(format!("molecule {i}: no valid graph after {MAX_ATTEMPTS} attempts")))?;
        let (smiles, order) = write_smiles_with_order(&g)?;
        let parsed = parse_smiles(&smiles)?;
        if !identical(&relabel(&g, &order), &parsed) {
            return Err(MolError::GenerationFailure(format!("round trip changed {smiles}")));
        }
        out.push(parsed);
    }
    Ok(out)
}

struct Draft {
    elements: Vec<Element>,
    aromatic: Vec<bool>,
    bonds: Vec<(usize, usize, BondOrder)>,
    used: Vec<f64>,
}

impl Draft {
    fn spare(&self, i: usize) -> f64 {
        self.elements[i].default_valences()[0] as f64 - self.used[i]
    }

    fn add_atom(&mut self, e: Element, aromatic: bool) -> usize {
        self.elements.push(e);
        self.aromatic.push(aromatic);
        self.used.push(0.0);
        self.elements.len() - 1
    }

    fn bond(&mut self, a: usize, b: usize, order: BondOrder) {
        self.used[a] += order.valence_contribution();
        self.used[b] += order.valence_contribution();
        self.bonds.push((a, b, order));
    }

    fn add_ring(&mut self, rng: &mut ChaCha8Rng) -> usize {
        let nitrogen = if rng.random_bool(0.25) { Some(rng.random_range(1..6)) } else { None };
        let first = self.elements.len();
        for k in 0..6 {
            let e = if Some(k) == nitrogen { Element::N } else { Element::C };
            self.add_atom(e, true);
        }
        for k in 0..6 {
            self.bond(first + k, first + (k + 1) % 6, BondOrder::Aromatic);
        }
        first
    }

    fn open_sites(&self) -> Vec<usize> {
        (0..self.elements.len()).filter(|&i| self.spare(i) >= 1.0).collect()
    }

    fn grow(p: &GeneratorParams, weights: &WeightedIndex<f64>, rng: &mut ChaCha8Rng) -> Option<MolecularGraph> {
        let (lo, hi) = p.atom_count_range;
        let target = rng.random_range(lo..=hi);
        let mut d = Draft {
            elements: Vec::new(),
            aromatic: Vec::new(),
            bonds: Vec::new(),
            used: Vec::new(),
        };
        let ring_step = |d: &Draft, rng: &mut ChaCha8Rng| {
            target - d.elements.len() >= 6 && p.aromatic_ring_probability > 0.0 && rng.random_bool(p.aromatic_ring_probability)
        };

        if ring_step(&d, rng) {
            d.add_ring(rng);
        } else {
            d.add_atom(GROWTH_ELEMENTS[weights.sample(rng)], false);
        }
        while d.elements.len() < target {
            let sites = d.open_sites();
            if sites.is_empty() {
                return None;
            }
            let host = sites[rng.random_range(0..sites.len())];
            if ring_step(&d, rng) {
                let r = d.add_ring(rng);
                d.bond(host, r, BondOrder::Single);
                continue;
            }
            let e = GROWTH_ELEMENTS[weights.sample(rng)];
            let v = d.add_atom(e, false);
            let cap = e.default_valences()[0] as f64;
            let host_spare = d.spare(host);
            let u: f64 = rng.random();
            let order = if !d.aromatic[host] && u < 0.03 && host_spare >= 3.0 && cap >= 3.0 {
                BondOrder::Triple
            } else if !d.aromatic[host] && u < 0.12 && host_spare >= 2.0 && cap >= 2.0 {
                BondOrder::Double
            } else {
                BondOrder::Single
            };
            d.bond(host, v, order);
        }

        let (rlo, rhi) = p.ring_closure_count_range;
        let closures = rng.random_range(rlo..=rhi);
        for _ in 0..closures {
            let sites = d.open_sites();
            let adj = d.adjacency();
            let mut candidates = Vec::new();
            for (k, &a) in sites.iter().enumerate() {
                let dist = bfs(&adj, a);
                for &b in &sites[k + 1..] {
                    if (3..=6).contains(&dist[b]) && !(d.aromatic[a] && d.aromatic[b]) {
                        candidates.push((a, b));
                    }
                }
            }
            if candidates.is_empty() {
                break;
            }
            let (a, b) = candidates[rng.random_range(0..candidates.len())];
            d.bond(a, b, BondOrder::Single);
        }
        Some(d.finish())
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.elements.len()];
        for &(a, b, _) in &self.bonds {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    fn finish(self) -> MolecularGraph {
        let atoms = (0..self.elements.len())
            .map(|i| {
                let mut a = Atom::new(self.elements[i]);
                a.is_aromatic = self.aromatic[i];
                a.implicit_h = implicit_hydrogens(a.element, a.is_aromatic, self.used[i], 0).expect("spare valence respected");
                a
            })
            .collect();
        let bonds = self.bonds.iter().map(|&(a, b, o)| Bond::new(a, b, o)).collect();
        MolecularGraph::from_parts(atoms, bonds)
    }
}

fn bfs(adj: &[Vec<usize>], start: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; adj.len()];
    dist[start] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    dist
}
