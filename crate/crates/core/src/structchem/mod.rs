//! Atomic structures, interaction potentials and shape descriptors.

pub mod parse;
pub mod potential;
pub mod shape;
pub mod synthetic;
pub mod table;

pub use parse::{parse_structure, AtomRecord, ParseOptions, ParsedStructure};
pub use potential::{
    absorption_potential, electrostatic_potential, electrostatic_potential_on, footprint, molecule_potential,
    MoleculeKind, PotentialMap, PotentialOptions, ICE_ABSORPTION, ICE_POTENTIAL,
};
pub use shape::{shape_descriptors, ShapeDescriptors};
pub use synthetic::{Lobe, SyntheticShape};
pub use table::ScatteringTable;
