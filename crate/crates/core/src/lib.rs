//! One-body Møller–Plesset downfolding with sample-based diagonalization.
//!
//! Integrals come in through FCIDUMP files ([`integrals`]). [`obmp2`] builds
//! correlated orbitals and the one-body correlation potential, [`downfold`]
//! turns them into active-space Hamiltonians, and [`sqd`] diagonalizes those
//! in subspaces spanned by simulated measurement samples from [`sampler`].
//! [`ci`] provides the determinant machinery and exact reference energies.

pub mod cc;
pub mod ci;
pub mod downfold;
pub mod error;
pub mod integrals;
mod linalg;
pub mod obmp2;
pub mod pipeline;
pub mod rng;
pub mod sampler;
pub mod sqd;

pub use error::{Error, Result};
pub use linalg::eigh;
