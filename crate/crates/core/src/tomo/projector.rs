use rayon::prelude::*;

use super::{Geometry, Sinogram};
use crate::error::{Error, Result};
use crate::image::Image;

/// Spacing of the sample points along each ray, in pixels.
pub const SAMPLE_STEP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub angle: f64,
    pub offset: f64,
}

/// One row of the system matrix: pixel indices in ascending order and their
/// weights.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseRow {
    pub indices: Vec<u32>,
    pub weights: Vec<f64>,
}

impl SparseRow {
    #[inline]
    pub fn dot(&self, x: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(&self.weights)
            .map(|(&i, &w)| w * x[i as usize])
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }

    /// Total weight, which approximates the ray's chord length through the
    /// image in pixels.
    pub fn length(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Reusable dense accumulator so footprints can be merged without hashing.
struct Scratch {
    dense: Vec<f64>,
    touched: Vec<u32>,
}

impl Scratch {
    fn new(pixels: usize) -> Self {
        Self {
            dense: vec![0.0; pixels],
            touched: Vec::new(),
        }
    }

    /// `w` must be positive; a zero entry marks an untouched pixel.
    #[inline]
    fn add(&mut self, idx: usize, w: f64) {
        if self.dense[idx] == 0.0 {
            self.touched.push(idx as u32);
        }
        self.dense[idx] += w;
    }

    fn drain(&mut self) -> SparseRow {
        self.touched.sort_unstable();
        let mut row = SparseRow {
            indices: Vec::with_capacity(self.touched.len()),
            weights: Vec::with_capacity(self.touched.len()),
        };
        for &i in &self.touched {
            let w = std::mem::take(&mut self.dense[i as usize]);
            row.indices.push(i);
            row.weights.push(w);
        }
        self.touched.clear();
        row
    }
}

fn footprint_into(size: usize, ray: Ray, scratch: &mut Scratch) {
    let n = size as f64;
    let half = (n - 1.0) / 2.0;
    let (sin, cos) = ray.angle.sin_cos();
    // Samples sit on a fixed lattice along the ray so that every ray is
    // discretized the same way regardless of where it meets the image.
    let reach = n * std::f64::consts::FRAC_1_SQRT_2 + 1.0;
    let count = (2.0 * reach / SAMPLE_STEP).ceil() as usize;
    for k in 0..count {
        let t = -reach + (k as f64 + 0.5) * SAMPLE_STEP;
        let x = ray.offset * cos - t * sin;
        let y = ray.offset * sin + t * cos;
        let col = x + half;
        let row = half - y;
        if col <= -1.0 || row <= -1.0 || col >= n || row >= n {
            continue;
        }
        let c0 = col.floor();
        let r0 = row.floor();
        let fc = col - c0;
        let fr = row - r0;
        let (c0, r0) = (c0 as isize, r0 as isize);
        let taps = [
            (r0, c0, (1.0 - fr) * (1.0 - fc)),
            (r0, c0 + 1, (1.0 - fr) * fc),
            (r0 + 1, c0, fr * (1.0 - fc)),
            (r0 + 1, c0 + 1, fr * fc),
        ];
        for (r, c, w) in taps {
            if w > 0.0 && r >= 0 && c >= 0 && (r as usize) < size && (c as usize) < size {
                scratch.add(r as usize * size + c as usize, w * SAMPLE_STEP);
            }
        }
    }
}

/// Bilinear sampled-line weights of one ray through a `size`×`size` image.
pub fn ray_footprint(size: usize, ray: Ray) -> SparseRow {
    let mut scratch = Scratch::new(size * size);
    footprint_into(size, ray, &mut scratch);
    scratch.drain()
}

/// Explicit ray-by-pixel matrix, rows in the order the rays were given.
#[derive(Debug, Clone)]
pub struct SystemMatrix {
    size: usize,
    rows: Vec<SparseRow>,
}

impl SystemMatrix {
    pub fn from_rays(size: usize, rays: &[Ray]) -> Self {
        let rows = rays
            .par_iter()
            .map_init(|| Scratch::new(size * size), |scratch, &ray| {
                footprint_into(size, ray, scratch);
                scratch.drain()
            })
            .collect();
        Self { size, rows }
    }

    pub fn from_geometry(size: usize, geom: &Geometry) -> Result<Self> {
        geom.check_covers(size)?;
        let rays: Vec<Ray> = geom.rays().collect();
        Ok(Self::from_rays(size, &rays))
    }

    /// Builds a matrix from explicit rows, for hand-made systems.
    pub fn from_rows(size: usize, rows: Vec<SparseRow>) -> Result<Self> {
        let pixels = size * size;
        for row in &rows {
            if row.indices.len() != row.weights.len()
                || row.indices.iter().any(|&i| i as usize >= pixels)
            {
                return Err(Error::Dimension(format!(
                    "row references pixels outside a {size}x{size} image"
                )));
            }
        }
        Ok(Self { size, rows })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.size * self.size);
        self.rows.par_iter().map(|row| row.dot(x)).collect()
    }

    /// `‖A x − b‖²`.
    pub fn residual_sq(&self, x: &[f64], b: &[f64]) -> f64 {
        assert_eq!(b.len(), self.rows.len());
        self.apply(x)
            .iter()
            .zip(b)
            .map(|(ax, b)| (ax - b) * (ax - b))
            .sum()
    }
}

/// Forward projection of a square image.
pub fn radon_forward(image: &Image, geom: &Geometry) -> Result<Sinogram> {
    if image.width() != image.height() {
        return Err(Error::Dimension(format!(
            "projector needs a square image, got {}x{}",
            image.width(),
            image.height()
        )));
    }
    let size = image.width();
    geom.check_covers(size)?;
    let rays: Vec<Ray> = geom.rays().collect();
    let x = image.samples();
    let values = rays
        .par_iter()
        .map_init(|| Scratch::new(size * size), |scratch, &ray| {
            footprint_into(size, ray, scratch);
            scratch.drain().dot(x)
        })
        .collect();
    Sinogram::new(geom.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disc(size: usize, radius: f64) -> Image {
        let half = (size as f64 - 1.0) / 2.0;
        // 4x4 supersampling for a smooth edge.
        Image::from_fn(size, size, |r, c| {
            let mut inside = 0;
            for i in 0..4 {
                for j in 0..4 {
                    let y = r as f64 - half + (i as f64 - 1.5) / 4.0;
                    let x = c as f64 - half + (j as f64 - 1.5) / 4.0;
                    if x * x + y * y <= radius * radius {
                        inside += 1;
                    }
                }
            }
            inside as f64 / 16.0
        })
    }

    #[test]
    fn zero_image_projects_to_zero() {
        let g = Geometry::for_image(16, 8).unwrap();
        let s = radon_forward(&Image::zeros(16, 16), &g).unwrap();
        assert!(s.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn non_square_is_rejected() {
        let g = Geometry::for_image(16, 8).unwrap();
        assert!(matches!(
            radon_forward(&Image::zeros(16, 12), &g),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn disc_central_chord_is_diameter() {
        let size = 48;
        let r = 12.0;
        let g = Geometry::for_image(size, 16).unwrap();
        let s = radon_forward(&disc(size, r), &g).unwrap();
        let centre = g.num_detectors() / 2;
        let mut rows = Vec::new();
        for a in 0..g.num_angles() {
            let v = s.row(a)[centre];
            assert!((v - 2.0 * r).abs() / (2.0 * r) < 0.02, "angle {a}: {v}");
            rows.push(s.row(a).to_vec());
        }
        // Rotational symmetry: every angle sees the same profile.
        let total: f64 = rows[0].iter().map(|v| v.abs()).sum();
        for row in &rows[1..] {
            let diff: f64 = row.iter().zip(&rows[0]).map(|(a, b)| (a - b).abs()).sum();
            assert!(diff / total < 0.01);
        }
    }

    #[test]
    fn matrix_and_matrix_free_agree() {
        let size = 12;
        let g = Geometry::for_image(size, 7).unwrap();
        let img = Image::from_fn(size, size, |r, c| ((r * 3 + c * 5) % 7) as f64 / 7.0);
        let s = radon_forward(&img, &g).unwrap();
        let a = SystemMatrix::from_geometry(size, &g).unwrap();
        assert_eq!(a.apply(img.samples()), s.values());
    }

    #[test]
    fn footprint_is_sorted_and_positive() {
        let row = ray_footprint(10, Ray { angle: 0.7, offset: 1.3 });
        assert!(row.indices.windows(2).all(|w| w[0] < w[1]));
        assert!(row.weights.iter().all(|&w| w > 0.0));
        // A horizontal line across the full width integrates to its length.
        let across = ray_footprint(10, Ray { angle: std::f64::consts::FRAC_PI_2, offset: 0.5 });
        let ones = vec![1.0; 100];
        assert!((across.dot(&ones) - 10.0).abs() < 0.6);
    }
}
