//! Randomized dimensionality reduction for regularized empirical risk
//! minimization.
//!
//! The crate is organized bottom-up:
//!
//! * [`matcore`] holds dense/sparse containers and the numerical kernels
//!   (thin SVD, symmetric eigendecomposition, power iteration, fast
//!   Walsh-Hadamard transform, Gram products).
//! * [`sketch`] builds the four randomized operators (random sampling,
//!   Gaussian, SRHT, random hashing) and applies them along the feature or
//!   the sample axis.
//! * [`subspace`] turns a sample sketch `Y = XΩ` into an orthonormal basis,
//!   measures the residual `‖X − ÛÛᵀX‖₂` and evaluates the matching
//!   theoretical bounds.
//! * [`erm`] solves the regularized problems (dual coordinate ascent for the
//!   hinge loss, L-BFGS on the primal) and trains the full, non-oblivious and
//!   oblivious models.
//! * [`datagen`] produces the synthetic decay datasets and reads libsvm files.

pub mod datagen;
pub mod erm;
mod error;
pub mod matcore;
pub mod rng;
pub mod sketch;
pub mod subspace;

pub use error::{Error, Result};
