//! Geometry toolkit for semantic-aware Gaussian splatting.
//!
//! The crate is organized by pipeline stage:
//!
//! - [`splat_model`]: splat records, 3DGS binary PLY I/O, activation and camera projection.
//! - [`semantics`]: mask loading, Canny edges, per-group perplexity and shape targets,
//!   projection-based label assignment.
//! - [`spectrum`]: 2D DFT and the spectral statistics that tie high-pass energy to edge counts.
//! - [`shape_training`]: geometric-complexity loss, image losses, pruning schedule and a
//!   scale-only shape fitter.
//! - [`extraction`]: opacity-weighted hierarchical point sampling, cropping and Chamfer
//!   evaluation.

pub mod extraction;
pub mod grid;
pub mod semantics;
pub mod shape_training;
pub mod spectrum;
pub mod splat_model;

mod reduce;

pub use grid::{Grid, RgbImage};
