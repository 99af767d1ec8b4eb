//! Finite-element laboratory for semilinear problems with a resonant
//! nonlinear Steklov boundary condition
//!
//! ```text
//! −Δu + c(x)u = 0 in Ω,   ∂u/∂ν = μ₁u + f(x, u) on ∂Ω.
//! ```
//!
//! The crate discretizes the problem with piecewise-linear elements, computes
//! the Steklov spectrum, evaluates the energy functional and its derivatives,
//! audits hypotheses on `f`, and locates critical points by constrained
//! minimization and a mountain-pass path method.

pub mod assembly;
pub mod config;
pub mod critical;
pub mod error;
pub mod functional;
pub mod mesh;
pub mod nonlinearity;
pub mod plot;
pub mod report;
pub mod run;
pub mod sparse;
pub mod steklov;

pub use error::{Error, Result};
