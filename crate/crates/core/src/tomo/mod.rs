//! Parallel-beam CT: sampled-line projector, filtered backprojection, and
//! regularized ART.
//!
//! Image coordinates put pixel `(r, c)` of an `N`×`N` image at
//! `x = c − (N−1)/2`, `y = (N−1)/2 − r` in pixel units. The ray at angle `θ`
//! and detector offset `s` is the line `{ s·(cos θ, sin θ) + t·(−sin θ, cos θ) }`.

mod art;
mod fbp;
mod projector;

pub use art::{art_reconstruct, art_with_matrix, kaczmarz_sweep, ArtConfig, ArtResult, RegKind, SweepLog};
pub use fbp::{
    backproject, fbp_reconstruct, filter_sinogram, ramp_response, FrequencyGrid,
};
pub use projector::{radon_forward, ray_footprint, Ray, SparseRow, SystemMatrix, SAMPLE_STEP};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    num_angles: usize,
    num_detectors: usize,
    detector_spacing: f64,
    angles: Vec<f64>,
}

impl Geometry {
    /// `num_angles` evenly spaced over `[0, π)`.
    pub fn new(num_angles: usize, num_detectors: usize, detector_spacing: f64) -> Result<Self> {
        if num_angles == 0 || num_detectors == 0 {
            return Err(Error::Parameter(format!(
                "geometry needs at least one angle and detector, got {num_angles}x{num_detectors}"
            )));
        }
        if !(detector_spacing > 0.0) || !detector_spacing.is_finite() {
            return Err(Error::Parameter(format!(
                "detector spacing must be positive, got {detector_spacing}"
            )));
        }
        let step = std::f64::consts::PI / num_angles as f64;
        Ok(Self {
            num_angles,
            num_detectors,
            detector_spacing,
            angles: (0..num_angles).map(|k| k as f64 * step).collect(),
        })
    }

    /// Unit-spaced detector just wide enough for the image diagonal, with an
    /// odd count so the central detector sits on the rotation axis.
    pub fn for_image(size: usize, num_angles: usize) -> Result<Self> {
        Self::new(num_angles, default_detector_count(size), 1.0)
    }

    pub fn num_angles(&self) -> usize {
        self.num_angles
    }

    pub fn num_detectors(&self) -> usize {
        self.num_detectors
    }

    pub fn detector_spacing(&self) -> f64 {
        self.detector_spacing
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// Signed offset of detector `j` from the rotation axis.
    #[inline]
    pub fn detector_offset(&self, j: usize) -> f64 {
        (j as f64 - (self.num_detectors as f64 - 1.0) / 2.0) * self.detector_spacing
    }

    pub fn num_rays(&self) -> usize {
        self.num_angles * self.num_detectors
    }

    /// All rays in angle-major order.
    pub fn rays(&self) -> impl Iterator<Item = Ray> + '_ {
        self.angles.iter().flat_map(move |&angle| {
            (0..self.num_detectors).map(move |j| Ray {
                angle,
                offset: self.detector_offset(j),
            })
        })
    }

    pub(crate) fn check_covers(&self, size: usize) -> Result<()> {
        let span = self.num_detectors as f64 * self.detector_spacing;
        let diagonal = size as f64 * std::f64::consts::SQRT_2;
        if span + 1e-9 < diagonal {
            return Err(Error::Dimension(format!(
                "detector span {span} does not cover the {size}x{size} image diagonal {diagonal:.3}"
            )));
        }
        Ok(())
    }
}

pub fn default_detector_count(size: usize) -> usize {
    let mut d = (size as f64 * std::f64::consts::SQRT_2).ceil() as usize;
    if d % 2 == 0 {
        d += 1;
    }
    d + 2
}

/// Line integrals indexed by `(angle, detector)`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    geometry: Geometry,
    values: Vec<f64>,
}

impl Sinogram {
    pub fn new(geometry: Geometry, values: Vec<f64>) -> Result<Self> {
        if values.len() != geometry.num_rays() {
            return Err(Error::Dimension(format!(
                "sinogram needs {}x{} values, got {}",
                geometry.num_angles,
                geometry.num_detectors,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("sinogram values must be finite".into()));
        }
        Ok(Self { geometry, values })
    }

    /// Reinterprets an angles×detectors image (detectors along the width).
    pub fn from_image(geometry: Geometry, image: &Image) -> Result<Self> {
        if image.width() != geometry.num_detectors || image.height() != geometry.num_angles {
            return Err(Error::Dimension(format!(
                "sinogram image is {}x{}, geometry expects {} detectors x {} angles",
                image.width(),
                image.height(),
                geometry.num_detectors,
                geometry.num_angles
            )));
        }
        Self::new(geometry, image.samples().to_vec())
    }

    pub fn to_image(&self) -> Image {
        Image::new(
            self.geometry.num_detectors,
            self.geometry.num_angles,
            self.values.clone(),
        )
        .expect("sinogram values are finite and sized to the geometry")
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, angle_index: usize) -> &[f64] {
        let d = self.geometry.num_detectors;
        &self.values[angle_index * d..(angle_index + 1) * d]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub(crate) fn check_geometry(&self, geom: &Geometry) -> Result<()> {
        if &self.geometry != geom {
            return Err(Error::Dimension(
                "sinogram was acquired with a different geometry".into(),
            ));
        }
        Ok(())
    }
}
