//! Polar-domain dictionaries for near-field channel estimation with an
//! elevated uniform linear array.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: array layout, scene points, distances and steering vectors.
//! - [`channel`]: deterministic line-of-sight near-field channels.
//! - [`dictionary`]: baseline and level-curve grids, dictionary assembly,
//!   coherence and the correlation analysis toolkit (Fresnel and Dirichlet
//!   approximations).
//! - [`design`]: optimal-NMSE grid scoring and the `(N_Γ, β)` search.
//! - [`estimation`]: hybrid combiners, pilot synthesis and P-SOMP.
//! - [`evaluation`]: MR/MMSE combining, the use-and-then-forget SE bound and
//!   Monte-Carlo orchestration.
//! - [`config`] and [`experiments`]: configuration files and the named
//!   figure-data experiments driven by the `nearfield-polar` binary.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod design;
pub mod dictionary;
pub mod error;
pub mod estimation;
pub mod evaluation;
pub mod experiments;
pub mod geometry;
pub mod linalg;
pub mod report;
pub mod rng;
pub mod units;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
