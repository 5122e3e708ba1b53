//! Pseudospectral simulation of the one-dimensional time-dependent
//! Hartree-Fock equation for finite-rank density matrices, together with the
//! diagnostics needed to tell plain scattering apart from long-range
//! (log-phase) scattering.
//!
//! The state is an [`OrbitalEnsemble`]: nonnegative weights `α_n` and complex
//! orbitals `u_n`. It is at once the density operator `γ = Σ α_n |u_n⟩⟨u_n|`
//! and the Gaussian random field `X = Σ √α_n g_n u_n`, so every expectation
//! over the probability space collapses to an exact weighted orbital sum.
//!
//! Layout:
//!
//! * [`grid`]: periodic grid, continuum-scaled transforms, free flow, convolution.
//! * [`potential`]: even finite-measure interactions with closed-form transforms.
//! * [`ensemble`]: density, covariance, weighted traces, trace-norm distances, sampling.
//! * [`nonlinearity`]: direct and exchange terms (low-rank and dense oracle).
//! * [`integrator`]: initial data, integrating-factor RK4 / Strang, Duhamel residual.
//! * [`diagnostics`]: profiles, norms, fits, scattering detectors, remainder algebra.
//! * [`config`], [`io`], [`commands`], [`verify`]: run orchestration and artifacts.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod diagnostics;
pub mod ensemble;
pub mod grid;
pub mod integrator;
pub mod io;
pub mod nonlinearity;
pub mod potential;
pub mod verify;

mod error;

pub use error::{Error, Result};

pub use ensemble::{GaussianSample, OrbitalEnsemble};
pub use grid::{ComplexField, Grid, SpectralField};
pub use integrator::{IntegratorConfig, Scheme, Trajectory};
pub use nonlinearity::RhsMode;
pub use potential::Potential;

pub use num_complex::Complex64;

/// Version string embedded in every output artifact.
pub const ARTIFACT_VERSION: &str = concat!("hfscat/", env!("CARGO_PKG_VERSION"));
