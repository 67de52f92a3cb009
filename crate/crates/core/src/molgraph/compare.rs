//! Graph equivalence checks and a relabeling-invariant hash.

use sha2::{Digest, Sha256};

use super::smiles::{canonical_neighbors, odd_permutation, stereo_reference};
use super::{Atom, Bond, BondOrder, BondStereo, Chirality, MolecularGraph};

/// Relabeling-invariant summary of a graph: sorted atom attribute tuples,
/// sorted degree sequence, bond-order counts, cycle rank and a
/// Weisfeiler-Lehman hash.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructuralSignature {
    pub atoms: Vec<(u8, i8, u8, bool, bool, u8, bool)>,
    pub degrees: Vec<usize>,
    pub bond_orders: [usize; 5],
    pub cycle_rank: usize,
    pub wl_hash: u64,
}

pub fn structural_signature(g: &MolecularGraph) -> StructuralSignature {
    let mut atoms: Vec<_> = g
        .atoms
        .iter()
        .enumerate()
        .map(|(i, a)| {
            (
                a.atomic_number(),
                a.formal_charge,
                a.total_h(),
                a.is_aromatic,
                a.chirality != Chirality::None,
                a.radical_electrons,
                g.ring_membership[i],
            )
        })
        .collect();
    atoms.sort_unstable();
    let mut degrees: Vec<usize> = (0..g.atoms.len()).map(|i| g.degree(i)).collect();
    degrees.sort_unstable();
    let mut bond_orders = [0; 5];
    for b in &g.bonds {
        bond_orders[b.order.relation()] += 1;
    }
    StructuralSignature {
        atoms,
        degrees,
        bond_orders,
        cycle_rank: g.cycle_rank(),
        wl_hash: canonical_hash(g),
    }
}

/// Graph isomorphism check by signature comparison. Can in principle
/// accept non-isomorphic graphs that WL refinement cannot separate; never
/// rejects isomorphic ones.
pub fn equivalent(a: &MolecularGraph, b: &MolecularGraph) -> bool {
    a.atoms.len() == b.atoms.len() && a.bonds.len() == b.bonds.len() && structural_signature(a) == structural_signature(b)
}

fn mix(mut x: u64) -> u64 {
    // splitmix64 finalizer
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn atom_label(a: &Atom, in_ring: bool) -> u64 {
    let mut x = a.atomic_number() as u64;
    x = mix(x ^ ((a.formal_charge as i64 as u64) << 8));
    x = mix(x ^ ((a.total_h() as u64) << 16));
    x = mix(x ^ ((a.is_aromatic as u64) << 24) ^ ((in_ring as u64) << 25));
    x = mix(x ^ ((a.chirality != Chirality::None) as u64) << 26);
    mix(x ^ ((a.radical_electrons as u64) << 32))
}

/// Hash of the graph that does not depend on atom numbering. Built from
/// Weisfeiler-Lehman label refinement over atoms and bond orders.
pub fn canonical_hash(g: &MolecularGraph) -> u64 {
    let n = g.atoms.len();
    let mut labels: Vec<u64> = (0..n).map(|i| atom_label(&g.atoms[i], g.ring_membership[i])).collect();
    let mut nbrs: Vec<Vec<(usize, u64)>> = vec![Vec::new(); n];
    for b in &g.bonds {
        let o = b.order.relation() as u64 + 1;
        nbrs[b.a].push((b.b, o));
        nbrs[b.b].push((b.a, o));
    }
    let distinct = |l: &[u64]| {
        let mut s = l.to_vec();
        s.sort_unstable();
        s.dedup();
        s.len()
    };
    let mut classes = distinct(&labels);
    for _ in 0..n {
        let next: Vec<u64> = (0..n)
            .map(|v| {
                let mut msgs: Vec<u64> = nbrs[v].iter().map(|&(w, o)| mix(labels[w] ^ o.rotate_left(48))).collect();
                msgs.sort_unstable();
                msgs.iter().fold(mix(labels[v]), |acc, &m| mix(acc ^ m))
            })
            .collect();
        labels = next;
        let c = distinct(&labels);
        if c == classes {
            break;
        }
        classes = c;
    }
    labels.sort_unstable();
    let mut h = Sha256::new();
    h.update((n as u64).to_le_bytes());
    h.update((g.bonds.len() as u64).to_le_bytes());
    for l in labels {
        h.update(l.to_le_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Renumbers atoms so that new atom `k` is old atom `order[k]`, carrying
/// chirality and bond stereo into the new index frame.
pub fn relabel(g: &MolecularGraph, order: &[usize]) -> MolecularGraph {
    let n = g.atoms.len();
    assert_eq!(order.len(), n, "order must cover every atom");
    let mut new_of = vec![usize::MAX; n];
    for (k, &old) in order.iter().enumerate() {
        new_of[old] = k;
    }
    let adj = g.adjacency();

    let atoms: Vec<Atom> = order
        .iter()
        .map(|&old| {
            let mut a = g.atoms[old].clone();
            if a.chirality != Chirality::None {
                let before = canonical_neighbors(g, &adj, old, |x| x);
                let after = canonical_neighbors(g, &adj, old, |x| new_of[x]);
                if odd_permutation(&before, &after) == Some(true) {
                    a.chirality = a.chirality.inverted();
                }
            }
            a
        })
        .collect();

    let bonds: Vec<Bond> = g
        .bonds
        .iter()
        .map(|b| {
            let mut nb = b.clone();
            nb.a = new_of[b.a];
            nb.b = new_of[b.b];
            if b.order == BondOrder::Double && b.stereo != BondStereo::None {
                for (end, partner) in [(b.a, b.b), (b.b, b.a)] {
                    let old_ref = stereo_reference(&adj, end, partner, |x| x);
                    let new_ref = stereo_reference(&adj, end, partner, |x| new_of[x]);
                    if old_ref != new_ref {
                        nb.stereo = nb.stereo.flipped();
                    }
                }
            }
            nb
        })
        .collect();

    MolecularGraph {
        atoms,
        bonds,
        ring_membership: order.iter().map(|&o| g.ring_membership[o]).collect(),
        has_virtual_node: g.has_virtual_node,
        virtual_index: g.virtual_index.map(|v| new_of[v]),
    }
}

/// Exact equality of two graphs with the same numbering, ignoring the order
/// of the bond list and the orientation of each bond.
pub fn identical(a: &MolecularGraph, b: &MolecularGraph) -> bool {
    let norm = |g: &MolecularGraph| {
        let mut bonds: Vec<_> = g
            .bonds
            .iter()
            .map(|x| (x.a.min(x.b), x.a.max(x.b), x.order, x.stereo, x.is_conjugated))
            .collect();
        bonds.sort_unstable();
        bonds
    };
    a.atoms == b.atoms
        && a.ring_membership == b.ring_membership
        && a.has_virtual_node == b.has_virtual_node
        && a.virtual_index == b.virtual_index
        && norm(a) == norm(b)
}
