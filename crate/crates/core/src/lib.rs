//! Compression of Ising models by learned edge contraction.
//!
//! An Ising Hamiltonian is held as a [`HamiltonianGraph`]. A graph neural
//! network scores every edge with the probability that its endpoints are
//! anti-aligned in the ground state, and the compressor repeatedly contracts
//! the most confident edge with a merge or flip-merge until a target size is
//! reached. Contractions are exact substitutions, so any solution of the
//! reduced model lifts back to the original spins with the same energy.

pub mod compressor;
pub mod contraction;
pub mod datagen;
pub mod error;
pub mod gnn;
pub mod graph;
pub mod io;
pub mod oracle;
pub mod satgen;
pub mod seed;
pub mod solvers;

pub use contraction::{ContractionLog, ContractionRecord};
pub use error::{Error, Result};
pub use graph::{Edge, HamiltonianGraph, NodeId, SpinAssignment, AUX};
pub use oracle::{EdgeLabel, GroundStateSet, Oracle};
