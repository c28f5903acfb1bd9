//! Continuous-time quantum walks on fractal lattices.
//!
//! The crate builds Sierpinski gaskets, carpets and dual carpets (plus the
//! filled triangular and square lattices they are carved from), propagates a
//! single excitation under the tight-binding Hamiltonian, and extracts the
//! transport observables used to classify normal and fractal regimes.

pub mod analysis;
pub mod error;
pub mod evolution;
pub mod hamiltonian;
pub mod io;
pub mod lattice;
pub mod observables;
pub mod render;

pub use error::{Error, Result};
pub use evolution::{
    evolve_classical, evolve_oracle, evolve_quantum, spectral_decompose, ProbabilitySeries,
    Spectrum, WalkKind,
};
pub use hamiltonian::{
    build_classical_generator, build_hamiltonian, ClassicalGenerator, Hamiltonian,
};
pub use lattice::{
    connectivity_histogram, generate, landmark_sites, FractalMeta, InputSelector, Landmarks,
    Lattice, LatticeKind, Site,
};
pub use observables::{polya_number, return_probability, variance, ObservableTable};
