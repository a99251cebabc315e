//! Spectral simulator and verification harness for the two-dimensional
//! chemotaxis–Navier–Stokes system in vorticity form,
//!
//! ```text
//! n_t + u·∇n = Δn − ∇·(n∇c)
//! c_t + u·∇c = Δc − cn
//! ζ_t + ∇·(ζ u) = Δζ + ∇^⊥·(n∇φ),      u = S∗ζ
//! ```
//!
//! with finite Radon measures as initial data. Mild solutions are built by
//! Picard iteration of the Duhamel map in Kato-weighted norms and
//! cross-checked against an independent IMEX stepper.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod biot_savart;
pub mod condition_a;
pub mod config;
pub mod diagnostics;
pub mod duhamel;
pub mod error;
pub mod field;
pub mod io;
pub mod measures;
pub mod oracle;
mod par;
pub mod picard;
pub mod problem;
pub mod spectral;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use field::{lp_norm, lp_norm_vector, GridSpec, ScalarField, VectorField};
pub use spectral::{divergence, gradient, heat_propagate, heat_propagate_pair, perp_div};
