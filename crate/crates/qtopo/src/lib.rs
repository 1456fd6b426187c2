//! Quaternion-based classification of two-dimensional Chern insulators.
//!
//! The crate covers the full pipeline at desk scale:
//!
//! - [`quaternion`]: Hamilton algebra and its 4x4 real representation;
//! - [`spin`]: spin-texture families over the Brillouin zone plus the
//!   translate/rotate/noise augmentation pipeline;
//! - [`chern`]: exact lattice Chern numbers from oriented solid angles,
//!   used as the labeling oracle everywhere;
//! - [`eigen`] / [`fmap`]: gauge-fixed eigenstates, their quaternion
//!   encoding, and the real-valued autocorrelation map fed to PCA;
//! - [`pca`]: from-scratch principal component analysis with cluster
//!   diagnostics;
//! - [`nn`]: a minimal deterministic network engine with a quaternion
//!   convolution layer, plain convolutions, and a seeded training loop;
//! - [`dataset`]: corpus assembly, labeling, splits, and the bit-exact
//!   binary container.

pub mod chern;
pub mod dataset;
pub mod eigen;
pub mod error;
pub mod fmap;
pub mod grid;
pub mod nn;
pub mod pca;
pub mod quaternion;
pub mod rng;
pub mod spin;

pub use error::{Error, Result};
pub use quaternion::Quaternion;
