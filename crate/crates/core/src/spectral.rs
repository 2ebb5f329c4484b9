//! 2D DFT, Gaussian high-pass weighting, and filtered magnitude spectra.
//!
//! Spectra are kept in the unshifted layout (DC at index 0). The forward
//! transform is unnormalized:
//! `X[u,v] = Σ x[r,c] · exp(−2πi (u r / H + v c / W))`.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::image::VarianceMap;

/// Complex spectrum of a real grid, row-major, unshifted.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    width: usize,
    height: usize,
    values: Vec<Complex64>,
}

impl ComplexSpectrum {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> Complex64 {
        self.values[u * self.width + v]
    }
}

/// In-place 2D transform of a row-major complex grid. `inverse` selects the
/// `+2πi` kernel; neither direction is normalized.
pub(crate) fn fft2_in_place(width: usize, height: usize, data: &mut [Complex64], inverse: bool) {
    debug_assert_eq!(data.len(), width * height);
    let mut planner = FftPlanner::<f64>::new();
    let row_fft = if inverse {
        planner.plan_fft_inverse(width)
    } else {
        planner.plan_fft_forward(width)
    };
    row_fft.process(data);

    let col_fft = if inverse {
        planner.plan_fft_inverse(height)
    } else {
        planner.plan_fft_forward(height)
    };
    let mut column = vec![Complex64::new(0.0, 0.0); height];
    for c in 0..width {
        for r in 0..height {
            column[r] = data[r * width + c];
        }
        col_fft.process(&mut column);
        for r in 0..height {
            data[r * width + c] = column[r];
        }
    }
}

/// Forward DFT of an arbitrary real row-major grid.
pub fn dft2_real(width: usize, height: usize, values: &[f64]) -> Result<ComplexSpectrum> {
    if width == 0 || height == 0 || values.len() != width * height {
        return Err(Error::Dimension(format!(
            "{width}x{height} grid with {} values",
            values.len()
        )));
    }
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2_in_place(width, height, &mut data, false);
    Ok(ComplexSpectrum {
        width,
        height,
        values: data,
    })
}

/// Forward DFT of a variance map.
pub fn dft2(grid: &VarianceMap) -> ComplexSpectrum {
    dft2_real(grid.width(), grid.height(), grid.values())
        .expect("variance map dimensions are always consistent")
}

/// Real part of the unnormalized inverse DFT (the adjoint of [`dft2`] on
/// real inputs).
pub(crate) fn dft2_adjoint_real(width: usize, height: usize, values: &[Complex64]) -> Vec<f64> {
    let mut data = values.to_vec();
    fft2_in_place(width, height, &mut data, true);
    data.into_iter().map(|z| z.re).collect()
}

/// Signed cyclic frequency of bin `k` in an `len`-point transform, in cycles
/// per sample. Bins in the upper half wrap to negative frequencies.
#[inline]
pub fn wrapped_frequency(k: usize, len: usize) -> f64 {
    if 2 * k < len {
        k as f64 / len as f64
    } else {
        (k as f64 - len as f64) / len as f64
    }
}

/// Gaussian high-pass weights `1 − exp(−(|f| − κ)² / 2)` laid out like the
/// unshifted spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct HighPassWeights {
    width: usize,
    height: usize,
    kappa: f64,
    weights: Vec<f64>,
}

impl HighPassWeights {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.weights[u * self.width + v]
    }
}

pub fn gaussian_highpass(width: usize, height: usize, kappa: f64) -> Result<HighPassWeights> {
    if width == 0 || height == 0 {
        return Err(Error::Dimension(format!(
            "high-pass grid must be nonempty, got {width}x{height}"
        )));
    }
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(Error::Parameter(format!(
            "cutoff kappa must be finite and >= 0, got {kappa}"
        )));
    }
    let mut weights = Vec::with_capacity(width * height);
    for u in 0..height {
        let fy = wrapped_frequency(u, height);
        for v in 0..width {
            let fx = wrapped_frequency(v, width);
            let d = (fx * fx + fy * fy).sqrt() - kappa;
            weights.push(1.0 - (-d * d / 2.0).exp());
        }
    }
    Ok(HighPassWeights {
        width,
        height,
        kappa,
        weights,
    })
}

/// High-pass weighted DFT modulus of a variance map.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeSpectrum {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl MagnitudeSpectrum {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

pub fn magnitude_spectrum(grid: &VarianceMap, weights: &HighPassWeights) -> Result<MagnitudeSpectrum> {
    if grid.width() != weights.width || grid.height() != weights.height {
        return Err(Error::Dimension(format!(
            "variance map {}x{} vs weights {}x{}",
            grid.width(),
            grid.height(),
            weights.width,
            weights.height
        )));
    }
    let spectrum = dft2(grid);
    Ok(weighted_modulus(&spectrum, weights))
}

pub(crate) fn weighted_modulus(spectrum: &ComplexSpectrum, weights: &HighPassWeights) -> MagnitudeSpectrum {
    MagnitudeSpectrum {
        width: spectrum.width,
        height: spectrum.height,
        values: spectrum
            .values
            .iter()
            .zip(&weights.weights)
            .map(|(z, w)| w * z.norm())
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(width: usize, height: usize, x: &[f64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); width * height];
        for u in 0..height {
            for v in 0..width {
                let mut acc = Complex64::new(0.0, 0.0);
                for r in 0..height {
                    for c in 0..width {
                        let phase = -2.0
                            * std::f64::consts::PI
                            * ((u * r) as f64 / height as f64 + (v * c) as f64 / width as f64);
                        acc += x[r * width + c] * Complex64::from_polar(1.0, phase);
                    }
                }
                out[u * width + v] = acc;
            }
        }
        out
    }

    fn lcg_grid(n: usize, seed: u64) -> Vec<f64> {
        let mut s = seed;
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 11) as f64 / (1u64 << 53) as f64
            })
            .collect()
    }

    #[test]
    fn zero_and_constant_grids() {
        let z = dft2(&VarianceMap::new(3, 5, vec![0.0; 15]).unwrap());
        assert!(z.values().iter().all(|c| c.norm() == 0.0));

        let c = dft2(&VarianceMap::new(4, 3, vec![2.5; 12]).unwrap());
        assert!((c.get(0, 0).re - 30.0).abs() < 1e-12);
        for (i, z) in c.values().iter().enumerate().skip(1) {
            assert!(z.norm() < 1e-12, "bin {i} = {z}");
        }
    }

    #[test]
    fn random_grid_matches_double_sum() {
        for (w, h, seed) in [(4, 4, 1), (5, 3, 2), (7, 6, 3)] {
            let x = lcg_grid(w * h, seed);
            let fast = dft2(&VarianceMap::new(w, h, x.clone()).unwrap());
            let slow = naive_dft(w, h, &x);
            for (a, b) in fast.values().iter().zip(&slow) {
                assert!((a - b).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn adjoint_inverse_round_trip() {
        let x = lcg_grid(20, 9);
        let spec = dft2_real(5, 4, &x).unwrap();
        let back = dft2_adjoint_real(5, 4, spec.values());
        for (a, b) in back.iter().zip(&x) {
            assert!((a / 20.0 - b).abs() < 1e-12);
        }
    }

    #[test]
    fn highpass_values() {
        let w = gaussian_highpass(8, 8, 0.25).unwrap();
        assert!((w.get(0, 0) - (1.0 - (-0.03125f64).exp())).abs() < 1e-15);
        assert!((w.get(0, 0) - 0.030767).abs() < 1e-6);
        // (0, 2) sits at fx = 0.25 exactly.
        assert_eq!(w.get(0, 2), 0.0);
        assert_eq!(w.get(2, 0), 0.0);
        assert_eq!(w.get(6, 0), 0.0);

        let dc = gaussian_highpass(4, 4, 0.0).unwrap();
        assert_eq!(dc.get(0, 0), 0.0);
        assert!(dc.weights().iter().all(|&v| (0.0..1.0).contains(&v)));
    }

    #[test]
    fn highpass_rejects_negative_kappa() {
        assert!(matches!(gaussian_highpass(4, 4, -0.1), Err(Error::Parameter(_))));
        assert!(gaussian_highpass(4, 4, f64::NAN).is_err());
    }

    #[test]
    fn wrapped_frequencies() {
        assert_eq!(wrapped_frequency(1, 4), 0.25);
        assert_eq!(wrapped_frequency(2, 4), -0.5);
        assert_eq!(wrapped_frequency(2, 5), 0.4);
        assert_eq!(wrapped_frequency(3, 5), -0.4);
    }

    #[test]
    fn magnitude_of_constant_is_dc_only() {
        let grid = VarianceMap::new(4, 4, vec![1.5; 16]).unwrap();
        let w = gaussian_highpass(4, 4, 0.3).unwrap();
        let m = magnitude_spectrum(&grid, &w).unwrap();
        assert!((m.values()[0] - 24.0 * w.get(0, 0)).abs() < 1e-12);
        assert!(m.values()[1..].iter().all(|&v| v < 1e-12));
    }

    #[test]
    fn magnitude_matches_composed_oracle() {
        let x = lcg_grid(16, 77);
        let grid = VarianceMap::new(4, 4, x.clone()).unwrap();
        let w = gaussian_highpass(4, 4, 0.3).unwrap();
        let m = magnitude_spectrum(&grid, &w).unwrap();
        let slow = naive_dft(4, 4, &x);
        for (i, (a, z)) in m.values().iter().zip(&slow).enumerate() {
            let fy = wrapped_frequency(i / 4, 4);
            let fx = wrapped_frequency(i % 4, 4);
            let d = (fx * fx + fy * fy).sqrt() - 0.3;
            let expect = (1.0 - (-d * d / 2.0).exp()) * z.norm();
            assert!((a - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn magnitude_dimension_mismatch() {
        let grid = VarianceMap::new(4, 4, vec![0.0; 16]).unwrap();
        let w = gaussian_highpass(4, 5, 0.3).unwrap();
        assert!(matches!(magnitude_spectrum(&grid, &w), Err(Error::Dimension(_))));
    }
}
