//! Molecular graphs: SMILES in and out, chemical perception, featurization,
//! virtual-node augmentation and random desk-scale libraries.

mod compare;
mod element;
mod featurize;
mod generate;
pub mod io;
mod perception;
mod smiles;

pub use compare::{canonical_hash, equivalent, identical, relabel, structural_signature, StructuralSignature};
pub use element::Element;
pub use featurize::{
    batch, featurize, FeaturizedGraph, EDGE_RELATIONS, NODE_FEATURES, NODE_FEATURE_BLOCKS,
    RELATION_SELF_LOOP, RELATION_VIRTUAL,
};
pub use generate::{generate_random_library, GeneratorParams};
pub use perception::{brute_force_ring_membership, implicit_hydrogens};
pub use smiles::{parse_smiles, write_smiles, write_smiles_with_order};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MolError {
    #[error("syntax error at {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("ring closure {label}: {message}")]
    RingClosure { label: u32, message: String },
    #[error("valence exceeded on atom {atom} ({element}): {message}")]
    Valence {
        atom: usize,
        element: Element,
        message: String,
    },
    #[error("unsupported feature: {0}")]
    UnsupportedFeature(String),
    #[error("graph already carries a virtual node")]
    AlreadyAugmented,
    #[error("graph has no atoms")]
    EmptyGraph,
    #[error("generation failed: {0}")]
    GenerationFailure(String),
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Chirality {
    #[default]
    None,
    Clockwise,
    CounterClockwise,
}

impl Chirality {
    pub fn inverted(self) -> Chirality {
        match self {
            Chirality::None => Chirality::None,
            Chirality::Clockwise => Chirality::CounterClockwise,
            Chirality::CounterClockwise => Chirality::Clockwise,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
    /// Connection between an atom and the virtual node.
    Virtual,
}

impl BondOrder {
    /// Bond order used for valence sums; aromatic bonds count 1.5.
    pub fn valence_contribution(self) -> f64 {
        match self {
            BondOrder::Single => 1.0,
            BondOrder::Double => 2.0,
            BondOrder::Triple => 3.0,
            BondOrder::Aromatic => 1.5,
            BondOrder::Virtual => 0.0,
        }
    }

    /// Relation id consumed by the relational layers.
    pub fn relation(self) -> usize {
        match self {
            BondOrder::Single => 0,
            BondOrder::Double => 1,
            BondOrder::Triple => 2,
            BondOrder::Aromatic => 3,
            BondOrder::Virtual => 4,
        }
    }
}

/// Double-bond configuration. `Z`/`E` refer to the lowest-indexed heavy
/// neighbor on each end of the double bond (not CIP priorities).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BondStereo {
    #[default]
    None,
    Z,
    E,
}

impl BondStereo {
    pub fn flipped(self) -> BondStereo {
        match self {
            BondStereo::None => BondStereo::None,
            BondStereo::Z => BondStereo::E,
            BondStereo::E => BondStereo::Z,
        }
    }
}

/// One atom with the raw attributes the featurizer consumes.
///
/// `chirality` is expressed relative to the neighbor order
/// `[hydrogen (if any), heavy neighbors by ascending index]`, so it does not
/// depend on how the SMILES string happened to list the neighbors.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub element: Element,
    pub formal_charge: i8,
    pub explicit_h: u8,
    pub implicit_h: u8,
    pub is_aromatic: bool,
    pub chirality: Chirality,
    pub radical_electrons: u8,
}

impl Atom {
    pub fn new(element: Element) -> Self {
        Atom {
            element,
            formal_charge: 0,
            explicit_h: 0,
            implicit_h: 0,
            is_aromatic: false,
            chirality: Chirality::None,
            radical_electrons: 0,
        }
    }

    pub fn atomic_number(&self) -> u8 {
        self.element.atomic_number()
    }

    pub fn total_h(&self) -> u8 {
        self.explicit_h + self.implicit_h
    }

    pub fn is_virtual(&self) -> bool {
        self.element == Element::VIRTUAL
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
    pub stereo: BondStereo,
    pub is_conjugated: bool,
}

impl Bond {
    pub fn new(a: usize, b: usize, order: BondOrder) -> Self {
        Bond {
            a,
            b,
            order,
            stereo: BondStereo::None,
            is_conjugated: false,
        }
    }

    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }

    pub fn touches(&self, atom: usize) -> bool {
        self.a == atom || self.b == atom
    }
}

/// Atoms and bonds of one molecule, `m = (V, E)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MolecularGraph {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
    pub ring_membership: Vec<bool>,
    pub has_virtual_node: bool,
    pub virtual_index: Option<usize>,
}

impl MolecularGraph {
    /// Builds a graph from atoms and bonds and runs ring and conjugation
    /// perception. Hydrogen counts are taken as given.
    pub fn from_parts(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Self {
        let mut g = MolecularGraph {
            ring_membership: vec![false; atoms.len()],
            atoms,
            bonds,
            has_virtual_node: false,
            virtual_index: None,
        };
        g.perceive();
        g
    }

    pub(crate) fn perceive(&mut self) {
        self.ring_membership = perception::ring_membership(self);
        perception::assign_conjugation(self);
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    /// Atoms excluding the virtual node.
    pub fn num_heavy_atoms(&self) -> usize {
        self.atoms.iter().filter(|a| !a.is_virtual()).count()
    }

    /// Chemical bonds (virtual connections excluded).
    pub fn chemical_bonds(&self) -> impl Iterator<Item = &Bond> {
        self.bonds.iter().filter(|b| b.order != BondOrder::Virtual)
    }

    /// Neighbor lists over chemical bonds, each ascending.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.atoms.len()];
        for b in self.chemical_bonds() {
            adj[b.a].push(b.b);
            adj[b.b].push(b.a);
        }
        adj.iter_mut().for_each(|n| n.sort_unstable());
        adj
    }

    /// Number of chemical-bond neighbors of `atom`.
    pub fn degree(&self, atom: usize) -> usize {
        self.chemical_bonds().filter(|b| b.touches(atom)).count()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<&Bond> {
        self.bonds
            .iter()
            .find(|x| (x.a == a && x.b == b) || (x.a == b && x.b == a))
    }

    /// Independent cycles of the chemical bond graph (`|E| - |V| + components`).
    pub fn cycle_rank(&self) -> usize {
        let n = self.num_heavy_atoms();
        let e = self.chemical_bonds().count();
        let comps = perception::components(self);
        (e + comps).saturating_sub(n)
    }

    pub fn num_aromatic_atoms(&self) -> usize {
        self.atoms.iter().filter(|a| a.is_aromatic).count()
    }

    pub fn num_hetero_atoms(&self) -> usize {
        self.atoms.iter().filter(|a| a.element.is_hetero()).count()
    }

    pub fn mean_degree(&self) -> f64 {
        let n = self.num_heavy_atoms();
        if n == 0 {
            return 0.0;
        }
        2.0 * self.chemical_bonds().count() as f64 / n as f64
    }
}

/// Appends a node joined to every atom by a `Virtual` connection.
pub fn add_virtual_node(g: &MolecularGraph) -> Result<MolecularGraph, MolError> {
    if g.has_virtual_node {
        return Err(MolError::AlreadyAugmented);
    }
    if g.atoms.is_empty() {
        return Err(MolError::EmptyGraph);
    }
    let mut out = g.clone();
    let v = out.atoms.len();
    out.atoms.push(Atom::new(Element::VIRTUAL));
    out.ring_membership.push(false);
    for i in 0..v {
        out.bonds.push(Bond::new(i, v, BondOrder::Virtual));
    }
    out.has_virtual_node = true;
    out.virtual_index = Some(v);
    Ok(out)
}
