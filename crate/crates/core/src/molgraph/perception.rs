//! Ring membership, conjugation and the implicit-hydrogen rule.

use super::{BondOrder, Element, MolecularGraph};

/// Implicit hydrogen count for an unbracketed atom, or `None` when the bond
/// sum exceeds every allowed valence.
///
/// `bond_sum` counts aromatic bonds as 1.5. Aromatic atoms always use their
/// lowest valence (so thiophene sulfur stays at two), and the result is
/// floored at zero.
pub fn implicit_hydrogens(element: Element, aromatic: bool, bond_sum: f64, formal_charge: i8) -> Option<u8> {
    let valences = element.default_valences();
    if valences.is_empty() {
        return Some(0);
    }
    let adjust = |v: u8| -> f64 {
        let v = v as f64;
        let c = formal_charge as f64;
        if element.is_n_like() {
            v + c
        } else if element == Element::B {
            v - c
        } else {
            v - c.abs()
        }
    };
    if aromatic {
        let v = adjust(valences[0]);
        return Some((v - bond_sum).floor().max(0.0) as u8);
    }
    let v = valences
        .iter()
        .map(|&v| adjust(v))
        .find(|&v| v >= bond_sum - 1e-9)?;
    Some((v - bond_sum).floor().max(0.0) as u8)
}

/// Upper bound on the bond-order sum plus hydrogens of an atom, used to
/// reject over-bonded input. Deliberately loose for charged atoms.
pub(crate) fn max_valence(element: Element, formal_charge: i8) -> Option<f64> {
    let v = *element.default_valences().last()? as f64;
    Some(v + (formal_charge as f64).abs())
}

/// Number of connected components over chemical bonds (virtual node excluded).
pub(crate) fn components(g: &MolecularGraph) -> usize {
    let adj = g.adjacency();
    let mut seen = vec![false; g.atoms.len()];
    let mut count = 0;
    for start in 0..g.atoms.len() {
        if seen[start] || g.atoms[start].is_virtual() {
            continue;
        }
        count += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    count
}

/// An atom lies on a simple cycle iff one of its bonds is not a bridge.
/// Bridges come from a DFS lowlink pass (back edges lift `low`).
pub(crate) fn ring_membership(g: &MolecularGraph) -> Vec<bool> {
    let n = g.atoms.len();
    let adj = g.adjacency();
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut in_ring = vec![false; n];
    let mut time = 0;

    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        // (vertex, parent, next neighbor position)
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        disc[root] = time;
        low[root] = time;
        time += 1;
        while let Some(&mut (v, parent, ref mut pos)) = stack.last_mut() {
            if *pos < adj[v].len() {
                let w = adj[v][*pos];
                *pos += 1;
                if w == parent {
                    continue;
                }
                if disc[w] == usize::MAX {
                    disc[w] = time;
                    low[w] = time;
                    time += 1;
                    stack.push((w, v, 0));
                } else {
                    low[v] = low[v].min(disc[w]);
                }
            } else {
                stack.pop();
                if parent != usize::MAX {
                    low[parent] = low[parent].min(low[v]);
                    if low[v] <= disc[parent] {
                        // parent-v is not a bridge
                        in_ring[v] = true;
                        in_ring[parent] = true;
                    }
                }
            }
        }
    }
    in_ring
}

/// Exhaustive simple-cycle search: atom `i` is in a ring iff some simple
/// path leaves `i` and returns to it through at least three atoms.
pub fn brute_force_ring_membership(g: &MolecularGraph) -> Vec<bool> {
    let adj = g.adjacency();
    let n = g.atoms.len();

    fn search(adj: &[Vec<usize>], start: usize, v: usize, depth: usize, visited: &mut [bool]) -> bool {
        for &w in &adj[v] {
            if w == start && depth >= 3 {
                return true;
            }
            if !visited[w] {
                visited[w] = true;
                if search(adj, start, w, depth + 1, visited) {
                    return true;
                }
                visited[w] = false;
            }
        }
        false
    }

    (0..n)
        .map(|i| {
            let mut visited = vec![false; n];
            visited[i] = true;
            search(&adj, i, i, 1, &mut visited)
        })
        .collect()
}

/// Marks aromatic bonds, single bonds between two unsaturated atoms, and
/// multiple bonds next to such single bonds as conjugated.
pub(crate) fn assign_conjugation(g: &mut MolecularGraph) {
    let n = g.atoms.len();
    let mut unsaturated = vec![false; n];
    for b in g.chemical_bonds() {
        if matches!(b.order, BondOrder::Double | BondOrder::Triple | BondOrder::Aromatic) {
            unsaturated[b.a] = true;
            unsaturated[b.b] = true;
        }
    }
    let mut conj_atom = vec![false; n];
    for b in g.bonds.iter_mut() {
        b.is_conjugated = match b.order {
            BondOrder::Aromatic => true,
            BondOrder::Single => unsaturated[b.a] && unsaturated[b.b],
            _ => false,
        };
        if b.is_conjugated {
            conj_atom[b.a] = true;
            conj_atom[b.b] = true;
        }
    }
    for b in g.bonds.iter_mut() {
        if matches!(b.order, BondOrder::Double | BondOrder::Triple) && (conj_atom[b.a] || conj_atom[b.b]) {
            b.is_conjugated = true;
        }
    }
}
