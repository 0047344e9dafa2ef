//! Signature-string calculus and recursive self-energy renormalization for a
//! boson–fermion model with a UV cutoff, checked numerically on truncated
//! Fock spaces over small momentum grids.
//!
//! - [`signature`]: signatures, counting functions, handedness, splits.
//! - [`tuple`]: tuples of handed blocks, markers, ambidextrous interval sets.
//! - [`fock`]: grid, basis, kernels, `H0`, `H_I`, `H_Λ`.
//! - [`wick`]: contraction patterns and vacuum diagrams, an independent route
//!   to the counter-terms.
//! - [`renorm`]: renormalized blocks, counter-terms, summands and the
//!   reordered resolvent series.
//! - [`experiments`]: the verification suites and sweeps driven by the CLI.

pub mod error;
pub mod experiments;
pub mod fock;
pub mod renorm;
pub mod signature;
pub mod tuple;
pub mod wick;

pub use error::{Error, Result};
pub use fock::{FockBasis, Model, ModelConfig, MomentumGrid, SparseOperator};
pub use num_complex::Complex64;
pub use signature::{Handedness, Signature, SignatureString};
pub use tuple::{PSet, Tuple, TupleMarkers};
