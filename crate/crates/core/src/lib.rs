//! Open-system dynamics of a two-polarization-mode cavity field pumped by a
//! Poisson beam of V-type three-level atoms.
//!
//! The crate is `no_std` (with `alloc`) so the numerical core can be embedded
//! anywhere; IO, configuration and the command-line front end live in the
//! `micromaser` crate.
//!
//! Module map:
//!
//! * [`hilbert`]: truncated two-mode Fock space, ladder operators, state checks.
//! * [`atom_field`]: the single-atom collision (propagator blocks, collision map).
//! * [`master_eq`]: matrix-free generators for the field density matrix.
//! * [`evolve`]: adaptive time integration and steady-state probing.
//! * [`entanglement`]: partial transpose, logarithmic negativity, observables.
//! * [`collision`]: stochastic Poisson-arrival trajectories and ensembles.
//!
//! All physical quantities are dimensionless in units of the reference
//! frequency ω₀ (times in units of 1/ω₀).
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod atom_field;
pub mod collision;
pub mod entanglement;
mod error;
pub mod evolve;
pub mod hilbert;
pub mod linalg;
pub mod master_eq;

pub use error::{Error, Invariant, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

/// Dense complex matrix (column-major, as stored by nalgebra).
pub type CMatrix = nalgebra::DMatrix<C64>;
