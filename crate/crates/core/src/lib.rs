//! Numerical laboratory for families of holomorphic disks in CP^1 x CP^1 with
//! boundary on a perturbed totally real sphere, and for the indefinite
//! Einstein-Weyl geometry the family induces on S^2 x R.
//!
//! Layering, bottom up:
//! - [`cp1`]: exact Riemann-sphere / Mobius / circle arithmetic;
//! - [`standard`]: the closed-form unperturbed disk family (the oracle);
//! - [`embedding`]: the perturbed totally real submanifold N and its
//!   transported local graph functions;
//! - [`fourier`]: truncated Fourier series on the boundary circle;
//! - [`solver`]: the spectral Newton solver for single disks and their
//!   first variations;
//! - [`family`]: disk families over the parameter space S^2 x R;
//! - [`reconstruct`]: null cone, orthonormal frames, horizontal-lift fitting
//!   and the Weyl connection;
//! - [`geodesic`]: geodesic integration, incidence sets and cross-validation;
//! - [`config`] / [`report`]: run configuration and deterministic exports.

pub mod config;
pub mod cp1;
pub mod embedding;
pub mod error;
pub mod family;
pub mod fourier;
pub mod geodesic;
pub mod reconstruct;
pub mod report;
pub mod solver;
pub mod standard;

pub use error::{GeodesicError, GeomError, ReconstructError, SolveError};
