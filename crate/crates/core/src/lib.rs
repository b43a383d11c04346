//! Identification of an unknown contact region from boundary Cauchy data.
//!
//! The state solves `−Δu + μ₀χ_ω u = 0` with the complex Robin condition
//! `∂_ν u + iβu = g + iβf`; its imaginary part vanishes exactly when the
//! trial region matches the data. Detection combines a topological gradient
//! of `J = ∫u_i²`, Monte-Carlo confidence maps under noisy data, and a
//! Sobolev-gradient shape optimization of the region boundary.

pub mod assembly;
pub mod error;
pub mod forward;
pub mod mesh;
pub mod shape;
pub mod stat;
pub mod topograd;

pub use error::{Error, Result};
