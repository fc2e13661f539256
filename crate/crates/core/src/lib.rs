//! Numerical core for the normalized Kähler-Ricci flow on U(n)-invariant
//! metrics of P¹ and P².
//!
//! Metrics are encoded by a momentum profile θ(τ) on the moment interval
//! `[0, 1]`. The crate computes curvature (in closed form and through an
//! independent chart-based finite-difference oracle), certifies Griffiths and
//! Nakano positivity, computes the smallest positive eigenvalues of the
//! ∂̄-Laplacians on vector fields, integrates the flow and evaluates the
//! functionals Y, Z, Futaki and K-energy.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod error;
pub mod flow;
pub mod functionals;
pub mod geometry;
pub mod linalg;
pub mod numerics;
pub mod positivity;
pub mod spectral;

pub use error::{Error, Result};
pub use linalg::C64;
