//! The spectral variance-map loss, its analytic gradient, and the MSE and
//! total-variation terms it is combined or compared with.
//!
//! Forward pass for one image and one axis:
//! Scharr gradient → `n`×`n` patch variances → unnormalized DFT →
//! high-pass weighted modulus. The loss is the mean absolute difference of
//! those weighted moduli between the two images, summed over both axes.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{
    center_crop_window, convolve_same, convolve_same_adjoint, unfold_variance,
    unfold_variance_backward, Image, Kernel3, VarianceMap,
};
use crate::spectral::{dft2, dft2_adjoint_real, gaussian_highpass, ComplexSpectrum, HighPassWeights};

pub const DEFAULT_PATCH_SIZE: usize = 3;
pub const DEFAULT_LAMBDA: f64 = 1e-3;
pub const DEFAULT_KAPPA: f64 = 0.5;

/// Relative size below which two spectral moduli are treated as equal when
/// taking the L1 subgradient.
const TIE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EagleConfig {
    pub patch_size: usize,
    pub kappa: f64,
    /// Weight of the spectral term in [`combined_loss`].
    pub lambda_weight: f64,
}

impl Default for EagleConfig {
    fn default() -> Self {
        Self {
            patch_size: DEFAULT_PATCH_SIZE,
            kappa: DEFAULT_KAPPA,
            lambda_weight: DEFAULT_LAMBDA,
        }
    }
}

impl EagleConfig {
    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn with_lambda(mut self, lambda_weight: f64) -> Self {
        self.lambda_weight = lambda_weight;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_size == 0 {
            return Err(Error::Parameter("patch size must be at least 1".into()));
        }
        if !self.kappa.is_finite() || self.kappa < 0.0 {
            return Err(Error::Parameter(format!("kappa must be >= 0, got {}", self.kappa)));
        }
        if !self.lambda_weight.is_finite() || self.lambda_weight < 0.0 {
            return Err(Error::Parameter(format!(
                "lambda must be >= 0, got {}",
                self.lambda_weight
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub mse_term: f64,
    pub eagle_term: f64,
}

/// Intermediate results of the forward pass for one image.
struct AxisPass {
    gradient: Image,
    spectrum: ComplexSpectrum,
}

struct ForwardPass {
    axes: [AxisPass; 2],
}

fn kernels() -> [Kernel3; 2] {
    [Kernel3::scharr_x(), Kernel3::scharr_y()]
}

fn forward(image: &Image, n: usize) -> Result<ForwardPass> {
    let [kx, ky] = kernels();
    let run = |k: &Kernel3| -> Result<AxisPass> {
        let gradient = convolve_same(image, k)?;
        let variance: VarianceMap = unfold_variance(&gradient, n)?;
        Ok(AxisPass {
            spectrum: dft2(&variance),
            gradient,
        })
    };
    Ok(ForwardPass {
        axes: [run(&kx)?, run(&ky)?],
    })
}

fn check_pair(rec: &Image, gt: &Image, cfg: &EagleConfig) -> Result<()> {
    cfg.validate()?;
    rec.check_same_shape(gt, "reconstruction and ground truth differ in shape")?;
    let n = cfg.patch_size;
    if rec.width() % n != 0 || rec.height() % n != 0 {
        return Err(Error::Dimension(format!(
            "{}x{} image is not divisible by patch size {n}",
            rec.width(),
            rec.height()
        )));
    }
    Ok(())
}

fn weights_for(spec: &ComplexSpectrum, kappa: f64) -> Result<HighPassWeights> {
    gaussian_highpass(spec.width(), spec.height(), kappa)
}

/// Mean absolute difference of weighted moduli, summed over both axes.
fn spectral_l1(rec: &ForwardPass, gt: &ForwardPass, weights: &HighPassWeights) -> f64 {
    let count = weights.weights().len() as f64;
    let mut total = 0.0;
    for (a, b) in rec.axes.iter().zip(&gt.axes) {
        let mut sum = 0.0;
        for ((za, zb), w) in a
            .spectrum
            .values()
            .iter()
            .zip(b.spectrum.values())
            .zip(weights.weights())
        {
            sum += (w * za.norm() - w * zb.norm()).abs();
        }
        total += sum / count;
    }
    total
}

/// Spectral variance-map loss between a reconstruction and its target.
pub fn eagle_loss(rec: &Image, gt: &Image, cfg: &EagleConfig) -> Result<f64> {
    check_pair(rec, gt, cfg)?;
    let a = forward(rec, cfg.patch_size)?;
    let b = forward(gt, cfg.patch_size)?;
    let weights = weights_for(&a.axes[0].spectrum, cfg.kappa)?;
    Ok(spectral_l1(&a, &b, &weights))
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `∂ eagle_loss / ∂ rec` for every pixel of `rec`.
///
/// Subgradients: the L1 sign is 0 where the two weighted moduli coincide
/// (up to rounding), and the modulus derivative `z / |z|` is 0 where `z = 0`.
pub fn eagle_loss_gradient(rec: &Image, gt: &Image, cfg: &EagleConfig) -> Result<Image> {
    Ok(eagle_value_and_gradient(rec, gt, cfg)?.1)
}

/// Loss value and gradient from a single forward pass.
pub fn eagle_value_and_gradient(rec: &Image, gt: &Image, cfg: &EagleConfig) -> Result<(f64, Image)> {
    check_pair(rec, gt, cfg)?;
    let n = cfg.patch_size;
    let a = forward(rec, n)?;
    let b = forward(gt, n)?;
    let weights = weights_for(&a.axes[0].spectrum, cfg.kappa)?;
    let value = spectral_l1(&a, &b, &weights);
    let (vw, vh) = (weights.width(), weights.height());
    let count = (vw * vh) as f64;

    let mut grad = Image::zeros(rec.width(), rec.height());
    for ((pa, pb), kernel) in a.axes.iter().zip(&b.axes).zip(kernels()) {
        // ∂L/∂z for each bin, conjugate-free form: g · w · z/|z|.
        // Differences at rounding level count as exact ties. The DC bins
        // hold the summed variances and bound every other modulus.
        let tie = TIE_TOLERANCE * (pa.spectrum.values()[0].norm() + pb.spectrum.values()[0].norm());
        let mut upstream = Vec::with_capacity(vw * vh);
        for ((za, zb), &w) in pa
            .spectrum
            .values()
            .iter()
            .zip(pb.spectrum.values())
            .zip(weights.weights())
        {
            let ma = za.norm();
            let diff = w * ma - w * zb.norm();
            if diff.abs() <= w * tie || ma == 0.0 {
                upstream.push(Complex64::new(0.0, 0.0));
            } else {
                upstream.push(za * (sign(diff) * w / (count * ma)));
            }
        }
        let d_variance = dft2_adjoint_real(vw, vh, &upstream);
        let d_gradient = unfold_variance_backward(&pa.gradient, n, &d_variance)?;
        grad.axpy(1.0, &convolve_same_adjoint(&d_gradient, &kernel)?);
    }
    Ok((value, grad))
}

/// Mean squared pixel difference.
pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    a.check_same_shape(b, "mse operands differ in shape")?;
    let sum: f64 = a
        .samples()
        .iter()
        .zip(b.samples())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / a.len() as f64)
}

/// `2 (rec − gt) / (w h)`.
pub fn mse_gradient(rec: &Image, gt: &Image) -> Result<Image> {
    rec.check_same_shape(gt, "mse operands differ in shape")?;
    let scale = 2.0 / rec.len() as f64;
    Ok(rec.zip_map(gt, |a, b| scale * (a - b)))
}

/// `mse + λ · eagle`.
pub fn combined_loss(rec: &Image, gt: &Image, cfg: &EagleConfig) -> Result<LossBreakdown> {
    let eagle_term = eagle_loss(rec, gt, cfg)?;
    let mse_term = mse(rec, gt)?;
    Ok(LossBreakdown {
        total: mse_term + cfg.lambda_weight * eagle_term,
        mse_term,
        eagle_term,
    })
}

pub fn combined_loss_gradient(rec: &Image, gt: &Image, cfg: &EagleConfig) -> Result<Image> {
    Ok(combined_value_and_gradient(rec, gt, cfg)?.1)
}

pub fn combined_value_and_gradient(
    rec: &Image,
    gt: &Image,
    cfg: &EagleConfig,
) -> Result<(LossBreakdown, Image)> {
    let (eagle_term, eagle_grad) = eagle_value_and_gradient(rec, gt, cfg)?;
    let mse_term = mse(rec, gt)?;
    let mut grad = mse_gradient(rec, gt)?;
    if cfg.lambda_weight != 0.0 {
        grad.axpy(cfg.lambda_weight, &eagle_grad);
    }
    Ok((
        LossBreakdown {
            total: mse_term + cfg.lambda_weight * eagle_term,
            mse_term,
            eagle_term,
        },
        grad,
    ))
}

/// Evaluates `f` on the largest centred crop divisible by the patch size and
/// scatters the gradient back into a full-size image with zeros outside.
pub fn on_center_crop<T>(
    rec: &Image,
    gt: &Image,
    cfg: &EagleConfig,
    f: impl Fn(&Image, &Image, &EagleConfig) -> Result<(T, Image)>,
) -> Result<(T, Image)> {
    rec.check_same_shape(gt, "reconstruction and ground truth differ in shape")?;
    let (top, left, w, h) = center_crop_window(rec.width(), rec.height(), cfg.patch_size)?;
    if w == rec.width() && h == rec.height() {
        return f(rec, gt, cfg);
    }
    let (value, grad) = f(&rec.crop(top, left, w, h)?, &gt.crop(top, left, w, h)?, cfg)?;
    Ok((value, grad.embed(top, left, rec.width(), rec.height())))
}

fn check_tv_size(image: &Image) -> Result<()> {
    if image.width() < 2 || image.height() < 2 {
        return Err(Error::Dimension(format!(
            "total variation needs at least 2x2, got {}x{}",
            image.width(),
            image.height()
        )));
    }
    Ok(())
}

/// Anisotropic total variation from forward differences.
pub fn tv_value(image: &Image) -> Result<f64> {
    check_tv_size(image)?;
    let (w, h) = (image.width(), image.height());
    let mut total = 0.0;
    for r in 0..h {
        for c in 0..w {
            let v = image.get(r, c);
            if c + 1 < w {
                total += (image.get(r, c + 1) - v).abs();
            }
            if r + 1 < h {
                total += (image.get(r + 1, c) - v).abs();
            }
        }
    }
    Ok(total)
}

/// Subgradient of [`tv_value`] with `sign(0) = 0`.
pub fn tv_gradient(image: &Image) -> Result<Image> {
    check_tv_size(image)?;
    let (w, h) = (image.width(), image.height());
    let mut grad = Image::zeros(w, h);
    let g = grad.samples_mut();
    for r in 0..h {
        for c in 0..w {
            let v = image.get(r, c);
            if c + 1 < w {
                let s = sign(image.get(r, c + 1) - v);
                g[r * w + c + 1] += s;
                g[r * w + c] -= s;
            }
            if r + 1 < h {
                let s = sign(image.get(r + 1, c) - v);
                g[(r + 1) * w + c] += s;
                g[r * w + c] -= s;
            }
        }
    }
    Ok(grad)
}
