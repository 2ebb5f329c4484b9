use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::{Geometry, Sinogram};
use crate::error::{Error, Result};
use crate::image::Image;

/// Zero-padded detector-frequency grid used for row filtering.
///
/// Rows are padded to a power of two at least twice the detector count so
/// the circular convolution equals the linear one on the detector range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    padded_len: usize,
    spacing: f64,
}

impl FrequencyGrid {
    pub fn new(num_detectors: usize, detector_spacing: f64) -> Self {
        Self {
            padded_len: (2 * num_detectors.max(1)).next_power_of_two(),
            spacing: detector_spacing,
        }
    }

    pub fn for_geometry(geom: &Geometry) -> Self {
        Self::new(geom.num_detectors(), geom.detector_spacing())
    }

    pub fn padded_len(&self) -> usize {
        self.padded_len
    }

    /// Number of nonnegative-frequency bins, `L/2 + 1`.
    pub fn num_bins(&self) -> usize {
        self.padded_len / 2 + 1
    }

    /// Nyquist frequency in cycles per pixel.
    pub fn nyquist(&self) -> f64 {
        0.5 / self.spacing
    }

    /// `|f|` of each nonnegative bin, in cycles per pixel.
    pub fn frequencies(&self) -> Vec<f64> {
        let l = self.padded_len as f64;
        (0..self.num_bins())
            .map(|j| j as f64 / (l * self.spacing))
            .collect()
    }

    /// Index into the nonnegative half for full-spectrum bin `j`.
    #[inline]
    fn fold(&self, j: usize) -> usize {
        j.min(self.padded_len - j)
    }
}

/// Frequency response of the discrete Ram-Lak kernel
/// (`h[0] = 1/(4τ²)`, `h[k odd] = −1/(π² k² τ²)`), scaled by the detector
/// spacing. Approaches `|f|` away from DC without the zero at DC that
/// sampling `|f|` directly would give.
pub fn ramp_response(grid: &FrequencyGrid) -> Vec<f64> {
    let l = grid.padded_len;
    let tau = grid.spacing;
    let mut kernel: Vec<Complex64> = (0..l)
        .map(|k| {
            let m = if k <= l / 2 { k as f64 } else { k as f64 - l as f64 };
            let mi = m as i64;
            let h = if mi == 0 {
                1.0 / (4.0 * tau * tau)
            } else if mi % 2 == 0 {
                0.0
            } else {
                -1.0 / (std::f64::consts::PI.powi(2) * m * m * tau * tau)
            };
            Complex64::new(h, 0.0)
        })
        .collect();
    FftPlanner::<f64>::new().plan_fft_forward(l).process(&mut kernel);
    kernel[..grid.num_bins()].iter().map(|z| z.re * tau).collect()
}

/// Filters every angle-row with the even response `half_response`, given on
/// the nonnegative bins of `grid`.
pub fn filter_sinogram(sino: &Sinogram, grid: &FrequencyGrid, half_response: &[f64]) -> Result<Vec<f64>> {
    if half_response.len() != grid.num_bins() {
        return Err(Error::Dimension(format!(
            "filter response has {} bins, grid has {}",
            half_response.len(),
            grid.num_bins()
        )));
    }
    let d = sino.geometry().num_detectors();
    let l = grid.padded_len;
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(l);
    let inv = planner.plan_fft_inverse(l);
    let mut out = vec![0.0; sino.values().len()];
    out.par_chunks_mut(d)
        .enumerate()
        .for_each_init(
            || vec![Complex64::new(0.0, 0.0); l],
            |buf, (a, dst)| {
                for (slot, &v) in buf.iter_mut().zip(sino.row(a)) {
                    *slot = Complex64::new(v, 0.0);
                }
                buf[d..].fill(Complex64::new(0.0, 0.0));
                fwd.process(buf);
                for (j, z) in buf.iter_mut().enumerate() {
                    *z *= half_response[grid.fold(j)];
                }
                inv.process(buf);
                for (o, z) in dst.iter_mut().zip(buf.iter()) {
                    *o = z.re / l as f64;
                }
            },
        );
    Ok(out)
}

/// Linear-interpolated backprojection of filtered rows, scaled by `π / A`.
pub fn backproject(filtered: &[f64], geom: &Geometry, out_size: usize) -> Result<Image> {
    if out_size == 0 {
        return Err(Error::Parameter("output size must be positive".into()));
    }
    let d = geom.num_detectors();
    if filtered.len() != geom.num_rays() {
        return Err(Error::Dimension(format!(
            "filtered sinogram has {} values, geometry has {} rays",
            filtered.len(),
            geom.num_rays()
        )));
    }
    let trig: Vec<(f64, f64)> = geom.angles().iter().map(|a| a.sin_cos()).collect();
    let half = (out_size as f64 - 1.0) / 2.0;
    let centre = (d as f64 - 1.0) / 2.0;
    let inv_spacing = 1.0 / geom.detector_spacing();
    let scale = std::f64::consts::PI / geom.num_angles() as f64;
    let mut samples = vec![0.0; out_size * out_size];
    samples
        .par_chunks_mut(out_size)
        .enumerate()
        .for_each(|(r, row)| {
            let y = half - r as f64;
            for (c, out) in row.iter_mut().enumerate() {
                let x = c as f64 - half;
                let mut acc = 0.0;
                for (a, &(sin, cos)) in trig.iter().enumerate() {
                    let pos = (x * cos + y * sin) * inv_spacing + centre;
                    if pos < 0.0 || pos > (d - 1) as f64 {
                        continue;
                    }
                    let j0 = (pos.floor() as usize).min(d.saturating_sub(2));
                    let frac = pos - j0 as f64;
                    let base = a * d + j0;
                    acc += if d == 1 {
                        filtered[base]
                    } else {
                        (1.0 - frac) * filtered[base] + frac * filtered[base + 1]
                    };
                }
                *out = acc * scale;
            }
        });
    Image::new(out_size, out_size, samples)
}

/// Ramp-filtered backprojection.
pub fn fbp_reconstruct(sino: &Sinogram, geom: &Geometry, out_size: usize) -> Result<Image> {
    sino.check_geometry(geom)?;
    let grid = FrequencyGrid::for_geometry(geom);
    let filtered = filter_sinogram(sino, &grid, &ramp_response(&grid))?;
    backproject(&filtered, geom, out_size)
}
