//! Quench dynamics of two-band free-fermion lattices.
//!
//! The crate evaluates the subsystem correlation matrix `C(t)` after a sudden
//! quench, the entanglement spectrum derived from it, the entanglement echo
//! (overlap of the initial and instantaneous entanglement ground states), the
//! Loschmidt echo of the full system, and classifies the resulting dynamical
//! transitions as jumps (entanglement-level crossings at `ξ = 1/2`) or cusps
//! (bulk, Loschmidt-type).
//!
//! Conventions shared by every module:
//!
//! * `ħ = k_B = 1`, hopping amplitude 1, chemical potential 0.
//! * Modes are ordered site-major, `(l, ↑), (l, ↓), (l + 1, ↑), …`. On a torus
//!   the site index is `x * ly + y`, so an x-segment is a contiguous mode range.
//! * `C[(l σ), (m σ')] = ⟨c†_{lσ}(t) c_{mσ'}(t)⟩`, i.e. the transpose of the
//!   one-body density matrix.
//!
//! The [`oracle`] module is an exact many-body reference used to validate the
//! free-fermion formulas at small sizes.

pub mod correlation;
pub mod detect;
pub mod entanglement;
mod error;
pub mod linalg;
pub mod loschmidt;
pub mod models;
pub mod oracle;
pub mod series;

pub use error::{Error, Result};

pub use num_complex::Complex64 as C64;

/// Dense complex matrix used throughout.
pub type CMatrix = nalgebra::DMatrix<C64>;
