use std::collections::{BTreeSet, HashMap};

use super::{canonical_neighbors, odd_permutation, stereo_reference, Neighbor};
use crate::molgraph::perception::{components, implicit_hydrogens};
use crate::molgraph::{BondOrder, BondStereo, Chirality, MolError, MolecularGraph};

/// Writes `g` as a SMILES string. See [`write_smiles_with_order`].
pub fn write_smiles(g: &MolecularGraph) -> Result<String, MolError> {
    write_smiles_with_order(g).map(|(s, _)| s)
}

/// Writes `g` and also returns the output atom order: `order[k]` is the index
/// in `g` of the `k`-th atom of the string, which is also its index after
/// re-parsing.
///
/// The traversal is a depth-first walk from atom 0 visiting neighbors in
/// ascending index order; back edges become ring-closure digits.
pub fn write_smiles_with_order(g: &MolecularGraph) -> Result<(String, Vec<usize>), MolError> {
    if g.atoms.is_empty() {
        return Err(MolError::EmptyGraph);
    }
    if g.has_virtual_node || g.atoms.iter().any(|a| a.is_virtual()) {
        return Err(MolError::UnsupportedFeature("virtual node".into()));
    }
    if g.bonds.iter().any(|b| b.order == BondOrder::Virtual) {
        return Err(MolError::UnsupportedFeature("virtual bond".into()));
    }
    if components(g) != 1 {
        return Err(MolError::UnsupportedFeature("disconnected graph".into()));
    }
    if let Some(i) = g.atoms.iter().position(|a| a.radical_electrons != 0) {
        return Err(MolError::UnsupportedFeature(format!("radical electrons on atom {i}")));
    }

    let adj = g.adjacency();
    let plan = Plan::build(g, &adj);
    let directions = assign_directions(g, &adj)?;
    let mut w = Writer {
        g,
        adj: &adj,
        plan: &plan,
        directions: &directions,
        out: String::new(),
        free: (1..100).collect(),
        open_digits: HashMap::new(),
    };
    w.emit(plan.order[0])?;
    Ok((w.out, plan.order))
}

/// DFS tree and ring-closure bookkeeping.
struct Plan {
    order: Vec<usize>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    /// Partners whose ring bond opens at this atom, in closing order.
    opens: Vec<Vec<usize>>,
    /// Partners whose ring bond closes at this atom.
    closes: Vec<Vec<usize>>,
}

impl Plan {
    fn build(g: &MolecularGraph, adj: &[Vec<usize>]) -> Plan {
        let n = g.atoms.len();
        let mut plan = Plan {
            order: Vec::with_capacity(n),
            parent: vec![None; n],
            children: vec![Vec::new(); n],
            opens: vec![Vec::new(); n],
            closes: vec![Vec::new(); n],
        };
        let mut pos = vec![usize::MAX; n];
        // Explicit stack of (atom, next neighbor position).
        let mut stack = vec![(0usize, 0usize)];
        pos[0] = 0;
        plan.order.push(0);
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            if *next == adj[v].len() {
                stack.pop();
                continue;
            }
            let w = adj[v][*next];
            *next += 1;
            if plan.parent[v] == Some(w) {
                continue;
            }
            if pos[w] == usize::MAX {
                pos[w] = plan.order.len();
                plan.order.push(w);
                plan.parent[w] = Some(v);
                plan.children[v].push(w);
                stack.push((w, 0));
            } else if pos[w] < pos[v] {
                plan.closes[v].push(w);
                plan.opens[w].push(v);
            }
        }
        plan
    }
}

/// Chooses `/` and `\` marks for stereo double bonds.
///
/// Each marked single bond `(p, q)` with `p < q` gets one boolean: whether
/// `q` sits "up" relative to `p`. Stereo requirements become XOR
/// constraints between these booleans, solved by graph 2-colouring.
fn assign_directions(g: &MolecularGraph, adj: &[Vec<usize>]) -> Result<HashMap<usize, bool>, MolError> {
    let bond_index: HashMap<(usize, usize), usize> = g
        .bonds
        .iter()
        .enumerate()
        .map(|(i, b)| ((b.a.min(b.b), b.a.max(b.b)), i))
        .collect();
    let bond_of = |a: usize, b: usize| bond_index[&(a.min(b), a.max(b))];
    let single_subs = |end: usize, partner: usize| -> Vec<usize> {
        adj[end]
            .iter()
            .copied()
            .filter(|&x| x != partner && g.bonds[bond_of(end, x)].order == BondOrder::Single)
            .collect()
    };

    let stereo: Vec<usize> = (0..g.bonds.len())
        .filter(|&i| g.bonds[i].order == BondOrder::Double && g.bonds[i].stereo != BondStereo::None)
        .collect();
    if stereo.is_empty() {
        return Ok(HashMap::new());
    }

    let mut marked: BTreeSet<usize> = BTreeSet::new();
    let mut chosen: Vec<[(usize, usize); 2]> = Vec::new();
    for &bi in &stereo {
        let b = &g.bonds[bi];
        let mut pick = [(0, 0); 2];
        for (k, (end, partner)) in [(b.a, b.b), (b.b, b.a)].into_iter().enumerate() {
            let subs = single_subs(end, partner);
            if subs.is_empty() {
                return Err(MolError::UnsupportedFeature(format!(
                    "stereo double bond {bi} has no single-bonded substituent on atom {end}"
                )));
            }
            let reference = stereo_reference(adj, end, partner, |x| x);
            let x = subs
                .iter()
                .copied()
                .find(|&x| marked.contains(&bond_of(end, x)))
                .or_else(|| subs.iter().copied().find(|&x| Some(x) == reference))
                .unwrap_or(subs[0]);
            marked.insert(bond_of(end, x));
            pick[k] = (end, x);
        }
        chosen.push(pick);
    }

    // up(x relative to d) = value(bond) XOR (d is the larger index)
    let flip = |d: usize, x: usize| d > x;
    let mut constraints: Vec<(usize, usize, bool)> = Vec::new();
    for (&bi, pick) in stereo.iter().zip(&chosen) {
        let b = &g.bonds[bi];
        let [(a, xa), (bb, xb)] = *pick;
        let mut cis = b.stereo == BondStereo::Z;
        if stereo_reference(adj, a, bb, |x| x) != Some(xa) {
            cis = !cis;
        }
        if stereo_reference(adj, bb, a, |x| x) != Some(xb) {
            cis = !cis;
        }
        // up_a == up_b iff cis
        let parity = !cis ^ flip(a, xa) ^ flip(bb, xb);
        constraints.push((bond_of(a, xa), bond_of(bb, xb), parity));
        for (end, partner) in [(b.a, b.b), (b.b, b.a)] {
            let on_end: Vec<usize> = single_subs(end, partner)
                .into_iter()
                .filter(|&x| marked.contains(&bond_of(end, x)))
                .collect();
            for w in on_end.windows(2) {
                // two marked substituents on one end point opposite ways
                let parity = true ^ flip(end, w[0]) ^ flip(end, w[1]);
                constraints.push((bond_of(end, w[0]), bond_of(end, w[1]), parity));
            }
        }
    }
    for (i, b) in g.bonds.iter().enumerate() {
        if b.order != BondOrder::Double || b.stereo != BondStereo::None {
            continue;
        }
        let touches = |end: usize, partner: usize| {
            adj[end]
                .iter()
                .any(|&x| x != partner && marked.contains(&bond_of(end, x)))
        };
        if touches(b.a, b.b) && touches(b.b, b.a) {
            return Err(MolError::UnsupportedFeature(format!(
                "double bond {i} without stereo sits between two marked substituents"
            )));
        }
    }

    let mut value: HashMap<usize, bool> = HashMap::new();
    let mut links: HashMap<usize, Vec<(usize, bool)>> = HashMap::new();
    for &(u, v, p) in &constraints {
        links.entry(u).or_default().push((v, p));
        links.entry(v).or_default().push((u, p));
    }
    for &root in &marked {
        if value.contains_key(&root) {
            continue;
        }
        value.insert(root, false);
        let mut stack = vec![root];
        while let Some(u) = stack.pop() {
            let vu = value[&u];
            for &(v, p) in links.get(&u).map(Vec::as_slice).unwrap_or(&[]) {
                match value.get(&v) {
                    Some(&vv) if vv != (vu ^ p) => {
                        return Err(MolError::UnsupportedFeature("inconsistent double-bond stereo".into()));
                    }
                    Some(_) => {}
                    None => {
                        value.insert(v, vu ^ p);
                        stack.push(v);
                    }
                }
            }
        }
    }
    Ok(value)
}

struct Writer<'a> {
    g: &'a MolecularGraph,
    adj: &'a [Vec<usize>],
    plan: &'a Plan,
    directions: &'a HashMap<usize, bool>,
    out: String,
    free: BTreeSet<u32>,
    open_digits: HashMap<(usize, usize), u32>,
}

impl Writer<'_> {
    fn bond_symbol(&self, left: usize, right: usize) -> &'static str {
        let g = self.g;
        let (bi, b) = g
            .bonds
            .iter()
            .enumerate()
            .find(|(_, b)| b.touches(left) && b.touches(right))
            .expect("bond exists");
        let both_aromatic = g.atoms[left].is_aromatic && g.atoms[right].is_aromatic;
        match b.order {
            BondOrder::Single => {
                if let Some(&value) = self.directions.get(&bi) {
                    // is `right` up relative to `left`?
                    let up = value ^ (left > right);
                    if up {
                        "/"
                    } else {
                        "\\"
                    }
                } else if both_aromatic {
                    "-"
                } else {
                    ""
                }
            }
            BondOrder::Double => "=",
            BondOrder::Triple => "#",
            BondOrder::Aromatic => {
                if both_aromatic {
                    ""
                } else {
                    ":"
                }
            }
            BondOrder::Virtual => unreachable!("rejected earlier"),
        }
    }

    fn atom_token(&self, v: usize, written: &[Neighbor]) -> Result<String, MolError> {
        let atom = &self.g.atoms[v];
        let bond_sum: f64 = self
            .g
            .chemical_bonds()
            .filter(|b| b.touches(v))
            .map(|b| b.order.valence_contribution())
            .sum();
        let organic = atom.element.is_organic_subset() && (!atom.is_aromatic || atom.element.aromatic_organic());
        let plain = organic
            && atom.formal_charge == 0
            && atom.chirality == Chirality::None
            && atom.explicit_h == 0
            && implicit_hydrogens(atom.element, atom.is_aromatic, bond_sum, 0) == Some(atom.implicit_h);
        let symbol = if atom.is_aromatic {
            let s = atom.element.symbol();
            if !matches!(s, "B" | "C" | "N" | "O" | "P" | "S" | "Se" | "As") {
                return Err(MolError::UnsupportedFeature(format!("aromatic {s}")));
            }
            s.to_ascii_lowercase()
        } else {
            atom.element.symbol().to_string()
        };
        if plain {
            return Ok(symbol);
        }

        let mut t = String::from("[");
        t.push_str(&symbol);
        if atom.chirality != Chirality::None {
            let canonical = canonical_neighbors(self.g, self.adj, v, |x| x);
            let c = match odd_permutation(&canonical, written) {
                Some(true) => atom.chirality.inverted(),
                _ => atom.chirality,
            };
            t.push_str(if c == Chirality::CounterClockwise { "@" } else { "@@" });
        }
        match atom.total_h() {
            0 => {}
            1 => t.push('H'),
            h if h <= 9 => t.push_str(&format!("H{h}")),
            h => return Err(MolError::UnsupportedFeature(format!("{h} hydrogens on one atom"))),
        }
        match atom.formal_charge {
            0 => {}
            1 => t.push('+'),
            -1 => t.push('-'),
            c if c > 0 => t.push_str(&format!("+{c}")),
            c => t.push_str(&format!("-{}", -c)),
        }
        t.push(']');
        Ok(t)
    }

    fn emit(&mut self, v: usize) -> Result<(), MolError> {
        let plan = self.plan;
        let mut written = Vec::new();
        if let Some(p) = plan.parent[v] {
            written.push(Neighbor::Atom(p));
        }
        if self.g.atoms[v].total_h() > 0 {
            written.push(Neighbor::H);
        }
        written.extend(plan.closes[v].iter().map(|&u| Neighbor::Atom(u)));
        written.extend(plan.opens[v].iter().map(|&u| Neighbor::Atom(u)));
        written.extend(plan.children[v].iter().map(|&u| Neighbor::Atom(u)));
        let token = self.atom_token(v, &written)?;
        self.out.push_str(&token);

        let mut released = Vec::new();
        for &u in &plan.closes[v] {
            let d = self.open_digits.remove(&(u, v)).expect("ring opened earlier");
            push_label(&mut self.out, d);
            released.push(d);
        }
        for &u in &plan.opens[v] {
            let d = self
                .free
                .pop_first()
                .ok_or_else(|| MolError::UnsupportedFeature("more than 99 open ring bonds".into()))?;
            let sym = self.bond_symbol(v, u);
            self.out.push_str(sym);
            push_label(&mut self.out, d);
            self.open_digits.insert((v, u), d);
        }
        self.free.extend(released);

        let children = &plan.children[v];
        for (i, &c) in children.iter().enumerate() {
            let last = i + 1 == children.len();
            if !last {
                self.out.push('(');
            }
            let sym = self.bond_symbol(v, c);
            self.out.push_str(sym);
            self.emit(c)?;
            if !last {
                self.out.push(')');
            }
        }
        Ok(())
    }
}

fn push_label(out: &mut String, d: u32) {
    if d < 10 {
        out.push(char::from(b'0' + d as u8));
    } else {
        out.push_str(&format!("%{d:02}"));
    }
}
