//! Multilevel-correction multigrid solver for the ground state of the
//! two-dimensional Gross–Pitaevskii equation
//!
//! ```text
//! −Δu + W u + ζ |u|² u = λ u  in Ω,   u = 0 on ∂Ω,   ‖u‖_{L²} = 1,
//! ```
//!
//! discretized with conforming P1 finite elements on nested triangular
//! meshes. The crate provides the mesh hierarchy, assembly, geometric
//! multigrid, nonlinear eigensolvers, the correction scheme and an
//! experiment harness driven by the `gpe-mlc` binary.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod assembly;
pub mod eigen;
pub mod error;
pub mod harness;
pub mod mesh;
pub mod mlc;
pub mod multigrid;
pub mod sparse;

pub use error::{Error, Result};
