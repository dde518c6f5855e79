//! Numerical toolkit for quantized Hamiltonian dynamics on the two-sphere.
//!
//! The crate quantizes `S² = CP¹` with the line bundles `O(k)`, propagates
//! states under Toeplitz and Kostant–Souriau generators while tracking the
//! lifted determinant, and computes the classical side: Calabi invariant,
//! Hermitian scalar curvature and the Shelukhin quasimorphism. Distances on
//! `U(N)` and its universal cover live in [`unimetric`].

pub mod error;
pub mod flow;
pub mod harness;
pub mod invariants;
pub mod lincx;
pub mod propagate;
pub mod quantize;
pub mod sphere;
pub mod unimetric;

pub use error::{Error, Result};
