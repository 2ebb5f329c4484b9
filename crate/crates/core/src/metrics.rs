//! PSNR, SSIM, and a spectral sharpness measure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::spectral::{dft2_real, wrapped_frequency};

/// Side length of the uniform SSIM window.
pub const SSIM_WINDOW: usize = 7;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub psnr_db: f64,
    pub ssim: f64,
    pub data_range: f64,
}

impl MetricReport {
    /// Both metrics of `rec` against `gt`, with the data range taken from
    /// `gt` unless given.
    pub fn compute(rec: &Image, gt: &Image, data_range: Option<f64>) -> Result<Self> {
        let data_range = match data_range {
            Some(r) => r,
            None => default_data_range(gt)?,
        };
        Ok(Self {
            psnr_db: psnr(rec, gt, data_range)?,
            ssim: ssim(rec, gt, data_range)?,
            data_range,
        })
    }
}

/// `max(gt) − min(gt)`.
pub fn default_data_range(gt: &Image) -> Result<f64> {
    let range = gt.max() - gt.min();
    if range > 0.0 {
        Ok(range)
    } else {
        Err(Error::Parameter(
            "ground truth is constant; pass an explicit data range".into(),
        ))
    }
}

fn check_range(data_range: f64) -> Result<()> {
    if data_range > 0.0 && data_range.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "data range must be positive, got {data_range}"
        )))
    }
}

fn psnr_from_mse(mse: f64, data_range: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (data_range * data_range / mse).log10()
    }
}

/// `10 log10(range² / MSE)`, `+∞` for identical images.
pub fn psnr(a: &Image, b: &Image, data_range: f64) -> Result<f64> {
    check_range(data_range)?;
    a.check_same_shape(b, "psnr operands differ in shape")?;
    let mse = a
        .samples()
        .iter()
        .zip(b.samples())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.len() as f64;
    Ok(psnr_from_mse(mse, data_range))
}

/// PSNR restricted to pixels where `mask` is true.
pub fn psnr_masked(a: &Image, b: &Image, mask: &[bool], data_range: f64) -> Result<f64> {
    check_range(data_range)?;
    a.check_same_shape(b, "psnr operands differ in shape")?;
    if mask.len() != a.len() {
        return Err(Error::Dimension(format!(
            "mask has {} entries, image has {}",
            mask.len(),
            a.len()
        )));
    }
    let (sum, count) = a
        .samples()
        .iter()
        .zip(b.samples())
        .zip(mask)
        .filter(|(_, &m)| m)
        .fold((0.0, 0usize), |(s, n), ((x, y), _)| (s + (x - y) * (x - y), n + 1));
    if count == 0 {
        return Err(Error::Parameter("mask selects no pixels".into()));
    }
    Ok(psnr_from_mse(sum / count as f64, data_range))
}

/// Pixels whose centres lie inside the circle inscribed in a square image.
pub fn inscribed_circle_mask(size: usize) -> Vec<bool> {
    let half = (size as f64 - 1.0) / 2.0;
    let radius = size as f64 / 2.0;
    let mut mask = Vec::with_capacity(size * size);
    for r in 0..size {
        for c in 0..size {
            let (y, x) = (r as f64 - half, c as f64 - half);
            mask.push(x * x + y * y <= radius * radius);
        }
    }
    mask
}

/// Summed-area table with a zero top row and left column.
struct Integral {
    width: usize,
    sums: Vec<f64>,
}

impl Integral {
    fn new(width: usize, height: usize, value: impl Fn(usize) -> f64) -> Self {
        let stride = width + 1;
        let mut sums = vec![0.0; stride * (height + 1)];
        for r in 0..height {
            let mut row = 0.0;
            for c in 0..width {
                row += value(r * width + c);
                sums[(r + 1) * stride + c + 1] = sums[r * stride + c + 1] + row;
            }
        }
        Self { width, sums }
    }

    #[inline]
    fn window(&self, top: usize, left: usize, size: usize) -> f64 {
        let s = self.width + 1;
        let (b, r) = (top + size, left + size);
        self.sums[b * s + r] - self.sums[top * s + r] - self.sums[b * s + left]
            + self.sums[top * s + left]
    }
}

/// Mean SSIM over every fully contained 7×7 window, with population
/// statistics and `C1 = (0.01 R)²`, `C2 = (0.03 R)²`.
pub fn ssim(a: &Image, b: &Image, data_range: f64) -> Result<f64> {
    check_range(data_range)?;
    a.check_same_shape(b, "ssim operands differ in shape")?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::Dimension(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {w}x{h}"
        )));
    }
    let (xa, xb) = (a.samples(), b.samples());
    let sa = Integral::new(w, h, |i| xa[i]);
    let sb = Integral::new(w, h, |i| xb[i]);
    let saa = Integral::new(w, h, |i| xa[i] * xa[i]);
    let sbb = Integral::new(w, h, |i| xb[i] * xb[i]);
    let sab = Integral::new(w, h, |i| xa[i] * xb[i]);

    let c1 = (K1 * data_range).powi(2);
    let c2 = (K2 * data_range).powi(2);
    let n = (SSIM_WINDOW * SSIM_WINDOW) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for top in 0..=h - SSIM_WINDOW {
        for left in 0..=w - SSIM_WINDOW {
            let mu_a = sa.window(top, left, SSIM_WINDOW) / n;
            let mu_b = sb.window(top, left, SSIM_WINDOW) / n;
            let var_a = saa.window(top, left, SSIM_WINDOW) / n - mu_a * mu_a;
            let var_b = sbb.window(top, left, SSIM_WINDOW) / n - mu_b * mu_b;
            let cov = sab.window(top, left, SSIM_WINDOW) / n - mu_a * mu_b;
            total += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
                / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Radial frequency, in cycles per pixel, above which energy counts as high
/// frequency: half the Nyquist frequency.
pub const HALF_NYQUIST: f64 = 0.25;

/// Fraction of spectral energy `Σ|X|²` at radial frequencies above
/// [`HALF_NYQUIST`].
pub fn high_frequency_fraction(image: &Image) -> f64 {
    let (w, h) = (image.width(), image.height());
    let spectrum =
        dft2_real(w, h, image.samples()).expect("image dimensions are always consistent");
    let mut high = 0.0;
    let mut total = 0.0;
    for u in 0..h {
        let fy = wrapped_frequency(u, h);
        for v in 0..w {
            let fx = wrapped_frequency(v, w);
            let e = spectrum.get(u, v).norm_sqr();
            total += e;
            if (fx * fx + fy * fy).sqrt() > HALF_NYQUIST {
                high += e;
            }
        }
    }
    if total == 0.0 {
        0.0
    } else {
        high / total
    }
}
