//! Scaled-kernel quasi-interpolation on the unit sphere.
//!
//! This crate builds approximants of the form
//! `Q f(x) = sum_j alpha_j f(x_j) phi_rho(x . x_j)` from scattered samples on
//! S^2, where `phi_rho` is a scaled, integral-normalized zonal kernel. It
//! provides:
//!
//! - point-set generation and loading, plus exact-degree product quadrature
//!   ([`sphere`]),
//! - real orthonormal spherical harmonics and Legendre polynomials
//!   ([`harmonics`]),
//! - Gaussian and compactly supported Wendland kernel families, their
//!   Fourier-Legendre spectra, and higher-order vanishing-moment variants
//!   ([`kernel`]),
//! - equal-weight and weighted quasi-interpolants on deterministic or random
//!   sites, with optional additive sample noise ([`quasi`]),
//! - a multilevel residual-correction scheme over nested level schedules
//!   ([`multilevel`]),
//! - hyperinterpolation and filtered hyperinterpolation baselines
//!   ([`baselines`]),
//! - error metrics and an experiment harness with CSV artifacts ([`metrics`],
//!   [`harness`]).
//!
//! All integrals, norms, and random sampling use the normalized uniform
//! probability measure on the sphere; quadrature weights sum to 1 and the
//! harmonic basis is orthonormal in that measure.

pub mod baselines;
pub mod error;
pub mod harmonics;
pub mod harness;
pub mod kernel;
pub mod metrics;
pub mod multilevel;
pub mod quasi;
pub mod sphere;

pub use error::{Error, Result};
