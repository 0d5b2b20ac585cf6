//! Pseudo-spectral simulator for the bosonic sector of four-dimensional
//! N=1 gauge theory with field-dependent gauge couplings, a Kähler sigma
//! model target and a general scalar potential.
//!
//! The state `u = (A, E, φ, π)` lives on a periodic box and evolves as
//! `du/dt = 𝒜u + J(u)`, where `𝒜` is the free wave operator (solved exactly
//! per Fourier mode) and `J` collects every interaction. The longitudinal
//! electric field that enters `dA/dt` is replaced by the curl-free field
//! `E_C` built from the charge density, which keeps the Gauss constraint
//! satisfied along the flow.

// index loops mirror the component formulas; `!(x <= tol)` rejects NaN
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod constraint;
pub mod dynamics;
pub mod error;
pub mod gauge;
pub mod geometry;
pub mod integrator;
pub mod kahler;
pub mod model;
pub mod probe;
pub mod snapshot;
pub mod spectral;
pub mod state;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
