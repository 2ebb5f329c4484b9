//! Spectral variance-map image loss with exact gradients, and a small
//! parallel-beam CT toolkit for exercising it.
//!
//! The loss compares two images through their Scharr gradient maps: each
//! map is cut into `n`×`n` patches, the patch variances form a coarse grid,
//! and the high-pass weighted DFT magnitudes of those grids are compared
//! with an L1 norm. [`eagle`] provides the value and its exact gradient;
//! [`tomo`] and [`tffilter`] use it as a regularizer and as a training
//! objective.

pub mod eagle;
pub mod error;
pub mod gradcheck;
pub mod image;
pub mod io;
pub mod metrics;
pub mod phantom;
pub mod spectral;
pub mod tffilter;
pub mod tomo;

pub use eagle::{EagleConfig, LossBreakdown};
pub use error::{Error, Result};
pub use image::{Image, Kernel3, VarianceMap};
