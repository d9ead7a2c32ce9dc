//! Weak-noise perturbative spectra of stochastic evolution operators for
//! one-dimensional analytic expanding maps.
//!
//! Given a hyperbolic map `f` with additive noise `x' = f(x) + σξ`, the
//! leading eigenvalue (escape rate) of the noisy evolution operator admits
//! an expansion `ν(σ) = ν₀ + ν₂σ² + ν₄σ⁴ + ...`. This crate computes the
//! coefficients by cycle expansion of the spectral determinant: prime
//! periodic orbits are located, a polynomial-basis matrix of the operator
//! is built around each orbit point as a truncated series in σ, traces are
//! assembled into determinant cumulants, and the determinant's smallest
//! zero is continued in powers of σ² by formal-series Newton iteration.
//!
//! An independent direct solver discretizes the same operator at finite σ
//! (quadrature in a monomial basis, kernel collocation, and a bin-transition
//! lattice) so the perturbative curve can be cross-checked against finite-σ
//! truth from a second code path.

pub mod config;
pub mod cycles;
pub mod direct;
pub mod error;
pub mod local_op;
pub mod maps;
pub mod output;
pub mod pipeline;
pub mod series;

pub use error::{Error, Result};
