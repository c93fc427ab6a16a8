//! Spin-chain Hamiltonians, product states and exact reduced dynamics.

mod evolution;
mod model;
mod operator;
mod spectral;
mod state;

pub use evolution::{evolve_reduced, Evolver, ReducedMap};
pub use model::{bath_hamiltonian, build_bath_state, build_hamiltonian, Family, SpinModel};
pub use operator::{embed, number, pauli, Operator, Pauli, C64};
pub use spectral::SpectralDecomposition;
pub use state::{
    bloch_from_density, density_from_bloch, initial_product_state, partial_trace_to_system, BlochVector,
    DensityMatrix,
};
