//! Ellipse phantoms: modified Shepp-Logan and seeded random variants.
//!
//! Ellipses live in normalized coordinates `[−1, 1]²` with `y` pointing up.
//! Pixel `(r, c)` of an `N`×`N` phantom is evaluated at its centre.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseSpec {
    pub center_x: f64,
    pub center_y: f64,
    pub semi_axis_a: f64,
    pub semi_axis_b: f64,
    /// Counter-clockwise rotation in radians.
    pub rotation: f64,
    pub intensity_delta: f64,
}

impl EllipseSpec {
    const fn new(cx: f64, cy: f64, a: f64, b: f64, rotation_deg: f64, delta: f64) -> Self {
        Self {
            center_x: cx,
            center_y: cy,
            semi_axis_a: a,
            semi_axis_b: b,
            rotation: rotation_deg * std::f64::consts::PI / 180.0,
            intensity_delta: delta,
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.center_x, y - self.center_y);
        let (sin, cos) = self.rotation.sin_cos();
        let u = dx * cos + dy * sin;
        let v = -dx * sin + dy * cos;
        (u / self.semi_axis_a).powi(2) + (v / self.semi_axis_b).powi(2) <= 1.0
    }
}

/// The ten ellipses of the modified (Toft) Shepp-Logan phantom.
pub const SHEPP_LOGAN: [EllipseSpec; 10] = [
    EllipseSpec::new(0.0, 0.0, 0.69, 0.92, 0.0, 1.0),
    EllipseSpec::new(0.0, -0.0184, 0.6624, 0.874, 0.0, -0.8),
    EllipseSpec::new(0.22, 0.0, 0.11, 0.31, -18.0, -0.2),
    EllipseSpec::new(-0.22, 0.0, 0.16, 0.41, 18.0, -0.2),
    EllipseSpec::new(0.0, 0.35, 0.21, 0.25, 0.0, 0.1),
    EllipseSpec::new(0.0, 0.1, 0.046, 0.046, 0.0, 0.1),
    EllipseSpec::new(0.0, -0.1, 0.046, 0.046, 0.0, 0.1),
    EllipseSpec::new(-0.08, -0.605, 0.046, 0.023, 0.0, 0.1),
    EllipseSpec::new(0.0, -0.606, 0.023, 0.023, 0.0, 0.1),
    EllipseSpec::new(0.06, -0.605, 0.023, 0.046, 0.0, 0.1),
];

/// Normalized coordinate of pixel index `i` along an axis of length `n`.
/// Integer arithmetic before the division keeps mirrored pixels exactly
/// opposite.
#[inline]
pub fn pixel_coordinate(i: usize, n: usize) -> f64 {
    (2.0 * i as f64 + 1.0 - n as f64) / n as f64
}

/// Sums ellipse deltas at every pixel centre and clamps to `[0, 1]`.
pub fn render_ellipses(size: usize, ellipses: &[EllipseSpec]) -> Image {
    Image::from_fn(size, size, |r, c| {
        let x = pixel_coordinate(c, size);
        let y = -pixel_coordinate(r, size);
        ellipses
            .iter()
            .filter(|e| e.contains(x, y))
            .map(|e| e.intensity_delta)
            .sum::<f64>()
            .clamp(0.0, 1.0)
    })
}

pub fn shepp_logan(size: usize) -> Result<Image> {
    if size < 32 {
        return Err(Error::Parameter(format!(
            "Shepp-Logan phantom needs size >= 32, got {size}"
        )));
    }
    Ok(render_ellipses(size, &SHEPP_LOGAN))
}

/// A body ellipse plus `num_ellipses − 1` interior features, all inside the
/// unit disc, deterministic in `seed`.
pub fn random_ellipses(num_ellipses: usize, seed: u64) -> Result<Vec<EllipseSpec>> {
    if num_ellipses == 0 {
        return Err(Error::Parameter("random phantom needs at least one ellipse".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pi = std::f64::consts::PI;
    let mut out = Vec::with_capacity(num_ellipses);
    out.push(EllipseSpec {
        center_x: rng.gen_range(-0.05..0.05),
        center_y: rng.gen_range(-0.05..0.05),
        semi_axis_a: rng.gen_range(0.55..0.8),
        semi_axis_b: rng.gen_range(0.55..0.8),
        rotation: rng.gen_range(0.0..pi),
        intensity_delta: rng.gen_range(0.3..0.6),
    });
    for _ in 1..num_ellipses {
        let radius = 0.45 * rng.gen::<f64>().sqrt();
        let theta = rng.gen_range(0.0..2.0 * pi);
        out.push(EllipseSpec {
            center_x: radius * theta.cos(),
            center_y: radius * theta.sin(),
            semi_axis_a: rng.gen_range(0.03..0.25),
            semi_axis_b: rng.gen_range(0.03..0.25),
            rotation: rng.gen_range(0.0..pi),
            intensity_delta: rng.gen_range(-0.3..0.5),
        });
    }
    Ok(out)
}

pub fn random_phantom(size: usize, num_ellipses: usize, seed: u64) -> Result<Image> {
    if size == 0 {
        return Err(Error::Parameter("phantom size must be positive".into()));
    }
    Ok(render_ellipses(size, &random_ellipses(num_ellipses, seed)?))
}
