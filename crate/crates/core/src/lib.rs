//! Brownian motion on the compact symplectic group Sp(n), its projection to the
//! quaternionic flag manifold, and the stochastic area and winding functionals
//! attached to that projection, together with the spectral theory of the
//! Jacobi diffusion on the simplex that governs their characteristic functions.

pub mod error;
pub mod quat;
pub mod spn;
pub mod sde;
pub mod flag;
pub mod spectral;
pub mod stats;
pub mod winding;

pub use error::{Error, Result};
