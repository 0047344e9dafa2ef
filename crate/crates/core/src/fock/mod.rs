//! Discretized momentum space, the truncated boson ⊗ fermion Fock space and
//! the regularized Hamiltonian `H_Λ = H0 + H_I` built on it.
//!
//! Integrals become lattice sums with weight `h^d` and `δ(q - q')` becomes a
//! Kronecker delta over `h^d`; the weight is absorbed once into the kernel
//! entries so that every later formula reads like its continuum version.

pub mod basis;
pub mod config;
pub mod grid;
pub mod hamiltonian;
pub mod kernel;
pub mod linalg;
pub mod sparse;

pub use basis::FockBasis;
pub use config::{ChiProfile, GProfile, ModelConfig};
pub use grid::MomentumGrid;
pub use hamiltonian::{build_h0, build_h_lambda, build_hi, build_operators, c_lambda_bound, LadderFamily, Model};
pub use kernel::{build_kernels, dispersion_a, dispersion_b, Kernel, KernelSet, KernelSpecies};
pub use sparse::SparseOperator;
