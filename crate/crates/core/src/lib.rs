//! Numerical core for Cox-Ingersoll-Ross diffusions modulated by a fast,
//! state-dependent Markov chain.
//!
//! The slow component follows
//!
//! ```text
//! dX = η(μ(Λ) − X) dt + θ √(X/n) dW,
//! P(Λ(t+Δ) = j | Λ(t) = i, X(t) = x) = n q_ij(x) Δ + o(Δ),
//! ```
//!
//! and as `n → ∞` the pair satisfies an averaging principle and a path large
//! deviation principle whose rate is an action integral. This crate provides
//!
//! - [`model`]: problem data and the parametric rate-matrix field `q(x)`,
//! - [`sim`]: a full-truncation Euler / thinning simulator,
//! - [`spectral`]: the Hamiltonian `H(x, p)` as a principal eigenvalue, the
//!   Donsker-Varadhan functional and a brute-force simplex oracle,
//! - [`lagrangian`]: the Legendre dual `L(x, v)`,
//! - [`averaging`]: stationary laws of the frozen chain and the limit ODE,
//! - [`action`]: discrete action functionals, minimum-action paths and the
//!   variational (Nisio) semigroup.
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]
#![deny(missing_debug_implementations)]

extern crate alloc;

pub mod action;
pub mod averaging;
mod error;
pub mod lagrangian;
pub mod linalg;
pub mod model;
pub mod optim;
pub mod sim;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use model::{ModelSpec, RateMatrixField, ValidationReport};
pub use spectral::SimplexMeasure;
