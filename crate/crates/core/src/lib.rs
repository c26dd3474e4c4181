//! Numerical core for first-order potential mean field games.
//!
//! The crate is `no_std` and only needs an allocator. It covers
//! uniform empirical measures and their quadratic Wasserstein distance,
//! couplings (potentials on measures together with their linear and spatial
//! derivatives), the reduced terminal-cost game on `n` players, discrete path
//! measures, and the scalar Hopf–Lax / Burgers machinery used to select
//! among multiple equilibria.
//!
//! IO, configuration and the command-line interface live in the `mfg` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod checks;
pub mod coupling;
mod error;
pub mod hjb;
pub mod lagrangian;
mod linalg;
pub mod measures;
pub mod reduced;
pub mod simplex;

pub use coupling::{Coupling, CouplingField};
pub use error::{Error, Result};
pub use measures::{DiscreteLaw, EmpiricalMeasure};
pub use reduced::{EquilibriumResult, GameSpec, Method};
