use std::collections::{BTreeMap, HashSet};

use super::{canonical_neighbors, odd_permutation, stereo_reference, Neighbor};
use crate::molgraph::perception::{implicit_hydrogens, max_valence};
use crate::molgraph::{Atom, Bond, BondOrder, BondStereo, Chirality, Element, MolError, MolecularGraph};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum BondSym {
    Single,
    Double,
    Triple,
    Aromatic,
    /// `/`
    Up,
    /// `\`
    Down,
}

impl BondSym {
    fn order(self) -> BondOrder {
        match self {
            BondSym::Single | BondSym::Up | BondSym::Down => BondOrder::Single,
            BondSym::Double => BondOrder::Double,
            BondSym::Triple => BondOrder::Triple,
            BondSym::Aromatic => BondOrder::Aromatic,
        }
    }

    fn is_directional(self) -> bool {
        matches!(self, BondSym::Up | BondSym::Down)
    }
}

#[derive(Clone, Copy, Debug)]
enum Slot {
    H,
    Atom(usize),
    Pending,
}

struct OpenRing {
    atom: usize,
    bond: Option<BondSym>,
    slot: usize,
}

/// A `/` or `\` written between `left` and `right` (in string order).
struct Directional {
    left: usize,
    right: usize,
    up: bool,
}

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
    atoms: Vec<Atom>,
    bracketed: Vec<bool>,
    written_chirality: Vec<Chirality>,
    slots: Vec<Vec<Slot>>,
    bonds: Vec<Bond>,
    pairs: HashSet<(usize, usize)>,
    directional: Vec<Directional>,
    rings: BTreeMap<u32, OpenRing>,
}

fn syntax(position: usize, message: impl Into<String>) -> MolError {
    MolError::Syntax {
        position,
        message: message.into(),
    }
}

/// Parses one molecule written in the supported SMILES subset.
///
/// Atoms are numbered in order of first appearance.
pub fn parse_smiles(text: &str) -> Result<MolecularGraph, MolError> {
    if text.is_empty() {
        return Err(syntax(0, "empty input"));
    }
    if !text.is_ascii() {
        return Err(syntax(0, "input is not ASCII"));
    }
    let mut p = Parser {
        text: text.as_bytes(),
        pos: 0,
        atoms: Vec::new(),
        bracketed: Vec::new(),
        written_chirality: Vec::new(),
        slots: Vec::new(),
        bonds: Vec::new(),
        pairs: HashSet::new(),
        directional: Vec::new(),
        rings: BTreeMap::new(),
    };
    p.run()?;
    p.finish()
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.text.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<u8> {
        self.text.get(self.pos + offset).copied()
    }

    fn run(&mut self) -> Result<(), MolError> {
        let mut prev: Option<usize> = None;
        // (branch point, atom count when the branch opened)
        let mut branches: Vec<(usize, usize, usize)> = Vec::new();
        let mut pending: Option<(BondSym, usize)> = None;
        let mut after_atom = false;

        while let Some(c) = self.peek() {
            let start = self.pos;
            match c {
                b'(' => {
                    let Some(p) = prev else {
                        return Err(syntax(start, "branch before any atom"));
                    };
                    if pending.is_some() {
                        return Err(syntax(start, "bond symbol before '('"));
                    }
                    if start > 0 && self.text[start - 1] == b'(' {
                        return Err(syntax(start, "branch cannot open another branch directly"));
                    }
                    branches.push((p, self.atoms.len(), start));
                    self.pos += 1;
                    after_atom = false;
                }
                b')' => {
                    let Some((p, count, _)) = branches.pop() else {
                        return Err(syntax(start, "unmatched ')'"));
                    };
                    if pending.is_some() {
                        return Err(syntax(start, "bond symbol before ')'"));
                    }
                    if self.atoms.len() == count {
                        return Err(syntax(start, "empty branch"));
                    }
                    prev = Some(p);
                    self.pos += 1;
                    after_atom = false;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if prev.is_none() {
                        return Err(syntax(start, "bond before any atom"));
                    }
                    if pending.is_some() {
                        return Err(syntax(start, "two consecutive bond symbols"));
                    }
                    let sym = match c {
                        b'-' => BondSym::Single,
                        b'=' => BondSym::Double,
                        b'#' => BondSym::Triple,
                        b':' => BondSym::Aromatic,
                        b'/' => BondSym::Up,
                        _ => BondSym::Down,
                    };
                    pending = Some((sym, start));
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => {
                    let (Some(atom), true) = (prev, after_atom) else {
                        return Err(syntax(start, "ring bond must follow an atom"));
                    };
                    let label = self.ring_label()?;
                    self.ring_bond(atom, label, pending.take().map(|(s, _)| s))?;
                }
                b'[' => {
                    let (atom, chirality, h) = self.bracket_atom()?;
                    let idx = self.add_atom(atom, true, chirality, prev, pending.take().map(|(s, _)| s))?;
                    if h > 0 {
                        self.slots[idx].push(Slot::H);
                    }
                    prev = Some(idx);
                    after_atom = true;
                }
                b'.' => return Err(syntax(start, "disconnected components are not supported")),
                b'*' => return Err(syntax(start, "wildcard atoms are not supported")),
                b'>' => return Err(syntax(start, "reactions are not supported")),
                _ => {
                    let atom = self.organic_atom()?;
                    let idx = self.add_atom(atom, false, Chirality::None, prev, pending.take().map(|(s, _)| s))?;
                    prev = Some(idx);
                    after_atom = true;
                }
            }
        }

        if let Some(&(_, _, pos)) = branches.last() {
            return Err(syntax(pos, "unclosed branch"));
        }
        if let Some((_, pos)) = pending {
            return Err(syntax(pos, "bond symbol without a following atom"));
        }
        if let Some((&label, _)) = self.rings.iter().next() {
            return Err(MolError::RingClosure {
                label,
                message: "ring bond never closed".into(),
            });
        }
        if self.atoms.is_empty() {
            return Err(syntax(0, "no atoms"));
        }
        Ok(())
    }

    fn ring_label(&mut self) -> Result<u32, MolError> {
        let start = self.pos;
        if self.peek() == Some(b'%') {
            match (self.peek_at(1), self.peek_at(2)) {
                (Some(a), Some(b)) if a.is_ascii_digit() && b.is_ascii_digit() => {
                    self.pos += 3;
                    Ok(((a - b'0') * 10 + (b - b'0')) as u32)
                }
                _ => Err(syntax(start, "'%' must be followed by two digits")),
            }
        } else {
            let d = self.peek().unwrap() - b'0';
            self.pos += 1;
            Ok(d as u32)
        }
    }

    fn organic_atom(&mut self) -> Result<Atom, MolError> {
        let start = self.pos;
        let c = self.peek().unwrap();
        let (element, aromatic, len) = match (c, self.peek_at(1)) {
            (b'C', Some(b'l')) => (Element::CL, false, 2),
            (b'B', Some(b'r')) => (Element::BR, false, 2),
            (b'B', _) => (Element::B, false, 1),
            (b'C', _) => (Element::C, false, 1),
            (b'N', _) => (Element::N, false, 1),
            (b'O', _) => (Element::O, false, 1),
            (b'P', _) => (Element::P, false, 1),
            (b'S', _) => (Element::S, false, 1),
            (b'F', _) => (Element::F, false, 1),
            (b'I', _) => (Element::I, false, 1),
            (b'b', _) => (Element::B, true, 1),
            (b'c', _) => (Element::C, true, 1),
            (b'n', _) => (Element::N, true, 1),
            (b'o', _) => (Element::O, true, 1),
            (b'p', _) => (Element::P, true, 1),
            (b's', _) => (Element::S, true, 1),
            _ => {
                return Err(syntax(start, format!("unexpected character '{}'", c as char)));
            }
        };
        self.pos += len;
        let mut atom = Atom::new(element);
        atom.is_aromatic = aromatic;
        Ok(atom)
    }

    /// Returns the atom, the chirality as written, and the bracket H count.
    fn bracket_atom(&mut self) -> Result<(Atom, Chirality, u8), MolError> {
        let open = self.pos;
        self.pos += 1;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1; // isotope, ignored
        }

        let start = self.pos;
        let (element, aromatic) = match self.peek() {
            Some(c) if c.is_ascii_lowercase() => {
                let two = match (c, self.peek_at(1)) {
                    (b's', Some(b'e')) => Some(Element::from_symbol("Se").unwrap()),
                    (b'a', Some(b's')) => Some(Element::from_symbol("As").unwrap()),
                    _ => None,
                };
                if let Some(e) = two {
                    self.pos += 2;
                    (e, true)
                } else {
                    let e = match c {
                        b'b' => Element::B,
                        b'c' => Element::C,
                        b'n' => Element::N,
                        b'o' => Element::O,
                        b'p' => Element::P,
                        b's' => Element::S,
                        _ => return Err(syntax(start, "unknown aromatic symbol")),
                    };
                    self.pos += 1;
                    (e, true)
                }
            }
            Some(c) if c.is_ascii_uppercase() => {
                let two = self
                    .peek_at(1)
                    .filter(|n| n.is_ascii_lowercase())
                    .and_then(|n| Element::from_symbol(std::str::from_utf8(&[c, n]).unwrap()));
                if let Some(e) = two {
                    self.pos += 2;
                    (e, false)
                } else {
                    let e = Element::from_symbol(std::str::from_utf8(&[c]).unwrap())
                        .ok_or_else(|| syntax(start, "unknown element symbol"))?;
                    self.pos += 1;
                    (e, false)
                }
            }
            Some(b'*') => return Err(syntax(start, "wildcard atoms are not supported")),
            _ => return Err(syntax(start, "expected element symbol in bracket atom")),
        };

        let mut chirality = Chirality::None;
        if self.peek() == Some(b'@') {
            self.pos += 1;
            chirality = Chirality::CounterClockwise;
            if self.peek() == Some(b'@') {
                self.pos += 1;
                chirality = Chirality::Clockwise;
            }
            if let (Some(a), Some(b)) = (self.peek(), self.peek_at(1)) {
                if matches!(&[a, b], b"TH" | b"AL" | b"SP" | b"TB" | b"OH") {
                    return Err(syntax(self.pos, "extended chirality classes are not supported"));
                }
            }
        }

        let mut h = 0u8;
        if self.peek() == Some(b'H') {
            self.pos += 1;
            h = 1;
            if let Some(d) = self.peek().filter(|c| c.is_ascii_digit()) {
                h = d - b'0';
                self.pos += 1;
            }
        }

        let mut charge: i32 = 0;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let unit = if sign == b'+' { 1 } else { -1 };
            self.pos += 1;
            charge = unit;
            if let Some(d) = self.peek().filter(|c| c.is_ascii_digit()) {
                charge = unit * (d - b'0') as i32;
                self.pos += 1;
            } else {
                while self.peek() == Some(sign) {
                    charge += unit;
                    self.pos += 1;
                }
            }
        }
        if !(-4..=4).contains(&charge) {
            return Err(syntax(start, "formal charge outside [-4, +4]"));
        }

        if self.peek() == Some(b':') {
            self.pos += 1;
            let digits = self.pos;
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
            if self.pos == digits {
                return Err(syntax(digits, "atom class needs digits"));
            }
        }

        if self.peek() != Some(b']') {
            return Err(syntax(open, "unterminated bracket atom"));
        }
        self.pos += 1;

        let mut atom = Atom::new(element);
        atom.is_aromatic = aromatic;
        atom.formal_charge = charge as i8;
        atom.explicit_h = h;
        Ok((atom, chirality, h))
    }

    fn default_order(&self, a: usize, b: usize) -> BondOrder {
        if self.atoms[a].is_aromatic && self.atoms[b].is_aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        }
    }

    fn push_bond(&mut self, a: usize, b: usize, order: BondOrder) -> bool {
        let key = (a.min(b), a.max(b));
        if !self.pairs.insert(key) {
            return false;
        }
        self.bonds.push(Bond::new(a, b, order));
        true
    }

    fn add_atom(
        &mut self,
        atom: Atom,
        bracketed: bool,
        chirality: Chirality,
        prev: Option<usize>,
        bond: Option<BondSym>,
    ) -> Result<usize, MolError> {
        let idx = self.atoms.len();
        self.atoms.push(atom);
        self.bracketed.push(bracketed);
        self.written_chirality.push(chirality);
        self.slots.push(Vec::new());
        if let Some(p) = prev {
            let order = bond.map(BondSym::order).unwrap_or_else(|| self.default_order(p, idx));
            self.push_bond(p, idx, order);
            self.slots[idx].push(Slot::Atom(p));
            self.slots[p].push(Slot::Atom(idx));
            if let Some(sym) = bond.filter(|s| s.is_directional()) {
                self.directional.push(Directional {
                    left: p,
                    right: idx,
                    up: sym == BondSym::Up,
                });
            }
        }
        Ok(idx)
    }

    fn ring_bond(&mut self, atom: usize, label: u32, sym: Option<BondSym>) -> Result<(), MolError> {
        let err = |message: &str| MolError::RingClosure {
            label,
            message: message.into(),
        };
        let Some(open) = self.rings.remove(&label) else {
            let slot = self.slots[atom].len();
            self.slots[atom].push(Slot::Pending);
            self.rings.insert(label, OpenRing { atom, bond: sym, slot });
            return Ok(());
        };
        if open.atom == atom {
            return Err(err("ring bond closes on its own atom"));
        }
        let order = match (open.bond, sym) {
            (Some(a), Some(b)) if a.order() != b.order() => {
                return Err(err("conflicting bond symbols on the two ends"));
            }
            (Some(a), _) => a.order(),
            (None, Some(b)) => b.order(),
            (None, None) => self.default_order(open.atom, atom),
        };
        if !self.push_bond(open.atom, atom, order) {
            return Err(err("duplicate bond between the same atoms"));
        }
        if let Some(s) = open.bond.filter(|s| s.is_directional()) {
            self.directional.push(Directional {
                left: open.atom,
                right: atom,
                up: s == BondSym::Up,
            });
        } else if let Some(s) = sym.filter(|s| s.is_directional()) {
            self.directional.push(Directional {
                left: atom,
                right: open.atom,
                up: s == BondSym::Up,
            });
        }
        self.slots[open.atom][open.slot] = Slot::Atom(atom);
        self.slots[atom].push(Slot::Atom(open.atom));
        Ok(())
    }

    fn finish(mut self) -> Result<MolecularGraph, MolError> {
        let n = self.atoms.len();
        let mut bond_sum = vec![0.0f64; n];
        let mut kekule_min = vec![0.0f64; n];
        for b in &self.bonds {
            let v = b.order.valence_contribution();
            let lo = if b.order == BondOrder::Aromatic { 1.0 } else { v };
            for end in [b.a, b.b] {
                bond_sum[end] += v;
                kekule_min[end] += lo;
            }
        }
        for i in 0..n {
            let atom = &mut self.atoms[i];
            let valence_error = |message: &str| MolError::Valence {
                atom: i,
                element: atom.element,
                message: message.into(),
            };
            if !self.bracketed[i] {
                atom.implicit_h = implicit_hydrogens(atom.element, atom.is_aromatic, bond_sum[i], 0)
                    .ok_or_else(|| valence_error("bond orders exceed every allowed valence"))?;
            }
            if let Some(max) = max_valence(atom.element, atom.formal_charge) {
                if kekule_min[i] + atom.explicit_h as f64 > max + 1e-9 {
                    return Err(valence_error("bonds and hydrogens exceed the maximum valence"));
                }
            }
        }

        let mut g = MolecularGraph::from_parts(self.atoms, self.bonds);
        let adj = g.adjacency();

        for i in 0..n {
            let written = self.written_chirality[i];
            if written == Chirality::None {
                continue;
            }
            let order: Vec<Neighbor> = self.slots[i]
                .iter()
                .map(|s| match *s {
                    Slot::H => Neighbor::H,
                    Slot::Atom(a) => Neighbor::Atom(a),
                    Slot::Pending => unreachable!("all ring bonds are closed"),
                })
                .collect();
            let canonical = canonical_neighbors(&g, &adj, i, |x| x);
            g.atoms[i].chirality = match odd_permutation(&order, &canonical) {
                Some(true) => written.inverted(),
                _ => written,
            };
        }

        // Direction of neighbor `x` as seen from double-bond atom `d`.
        let mark = |d: usize, partner: usize| -> Option<(usize, bool)> {
            self.directional.iter().find_map(|m| {
                if m.left == d && m.right != partner {
                    Some((m.right, m.up))
                } else if m.right == d && m.left != partner {
                    Some((m.left, !m.up))
                } else {
                    None
                }
            })
        };
        for bi in 0..g.bonds.len() {
            let (a, b, order) = (g.bonds[bi].a, g.bonds[bi].b, g.bonds[bi].order);
            if order != BondOrder::Double {
                continue;
            }
            let (Some((xa, up_a)), Some((xb, up_b))) = (mark(a, b), mark(b, a)) else {
                continue;
            };
            let mut cis = up_a == up_b;
            if stereo_reference(&adj, a, b, |x| x) != Some(xa) {
                cis = !cis;
            }
            if stereo_reference(&adj, b, a, |x| x) != Some(xb) {
                cis = !cis;
            }
            g.bonds[bi].stereo = if cis { BondStereo::Z } else { BondStereo::E };
        }
        Ok(g)
    }
}
