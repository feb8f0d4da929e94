//! Stochastic simulation of open bosonic systems with two-particle
//! interactions, together with an exact quantum reference on the symmetric
//! n-boson Fock subspace.
//!
//! The library has two halves that are built to agree with each other:
//!
//! * a classical half that integrates the Itô SDE
//!   `dr = F(r) dt + sqrt(2 D⁺_⊥(r)) dW` for the 2N real coordinates of a
//!   single-particle amplitude vector `z`, where the drift `F` and the
//!   diffusion matrix `D` are assembled from a one-body Hamiltonian `H⁰`, a
//!   two-body coupling tensor `H_{jklm}` and a set of Hermitian coupling
//!   matrices `X_m` ([`dynamics`], [`diffusion`], [`sde`]);
//! * a quantum half that lifts the same operators to the occupation-number
//!   basis of `n` bosons in `N` modes, integrates the Lindblad master
//!   equation `ρ̇ = -i[Ĥ, ρ] - Σ_m [X̂_m, [X̂_m, ρ]]`, unravels it as a
//!   random-walk of stochastic unitaries, and reconstructs density matrices
//!   from SDE ensembles ([`oracle`], [`observables`]).
//!
//! [`dnse`] packages the stochastic discrete nonlinear Schrödinger equation
//! as a ready-made system with closed-form diffusion blocks, and the
//! `boson-sde` binary (see [`config`], [`runner`], [`output`]) drives
//! mean-field, SDE, Lindblad, random-walk and verification runs from a
//! config file.

pub mod config;
pub mod diffusion;
pub mod dnse;
pub mod dynamics;
mod error;
pub mod linalg;
pub(crate) mod mix;
pub mod observables;
pub mod oracle;
pub mod output;
pub mod runner;
pub mod sde;
pub mod tol;

#[cfg(test)]
pub(crate) mod test_support;

pub use error::{Error, Result};
