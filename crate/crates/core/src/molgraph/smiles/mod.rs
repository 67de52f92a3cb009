//! SMILES subset reader and writer.
//!
//! Tetrahedral chirality is stored relative to the neighbor order
//! `[H (if any), neighbors by ascending index]`; bond stereo is stored
//! relative to the lowest-indexed neighbor on each end of the double bond.
//! The parser and writer translate between these frames and the order in
//! which a particular string lists the neighbors.

mod parse;
mod write;

pub use parse::parse_smiles;
pub use write::{write_smiles, write_smiles_with_order};

use super::MolecularGraph;

/// A neighbor position around a stereocenter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Neighbor {
    H,
    Atom(usize),
}

/// Canonical neighbor frame for chirality: `[H if the atom carries any,
/// chemical neighbors ascending]`, with neighbors ranked by `rank`.
pub(crate) fn canonical_neighbors(
    g: &MolecularGraph,
    adj: &[Vec<usize>],
    atom: usize,
    rank: impl Fn(usize) -> usize,
) -> Vec<Neighbor> {
    let mut out = Vec::with_capacity(adj[atom].len() + 1);
    if g.atoms[atom].total_h() > 0 {
        out.push(Neighbor::H);
    }
    let mut heavy = adj[atom].clone();
    heavy.sort_by_key(|&x| rank(x));
    out.extend(heavy.into_iter().map(Neighbor::Atom));
    out
}

/// `Some(true)` if `to` is an odd permutation of `from`; `None` when the two
/// lists do not hold the same items.
pub(crate) fn odd_permutation(from: &[Neighbor], to: &[Neighbor]) -> Option<bool> {
    if from.len() != to.len() {
        return None;
    }
    let mut perm = Vec::with_capacity(from.len());
    for item in to {
        perm.push(from.iter().position(|x| x == item)?);
    }
    let mut sorted = perm.clone();
    sorted.sort_unstable();
    if sorted.iter().enumerate().any(|(i, &p)| i != p) {
        return None;
    }
    let mut seen = vec![false; perm.len()];
    let mut odd = false;
    for start in 0..perm.len() {
        let mut len = 0;
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            i = perm[i];
            len += 1;
        }
        if len > 0 && len % 2 == 0 {
            odd = !odd;
        }
    }
    Some(odd)
}

/// Neighbor of `end` (other than `partner`) with the lowest rank: the
/// reference substituent for `Z`/`E`.
pub(crate) fn stereo_reference(
    adj: &[Vec<usize>],
    end: usize,
    partner: usize,
    rank: impl Fn(usize) -> usize,
) -> Option<usize> {
    adj[end]
        .iter()
        .copied()
        .filter(|&x| x != partner)
        .min_by_key(|&x| rank(x))
}
