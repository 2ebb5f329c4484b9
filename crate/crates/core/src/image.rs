//! Image grids, 3×3 convolution, and patch-variance maps.
//!
//! Everything here works on row-major `f64` grids. Convolution is a true
//! convolution (kernel flipped) with reflect padding that mirrors about the
//! border pixel without repeating it, so `[a b c | b a]` on the right edge.

use crate::error::{Error, Result};

/// A 2D grid of real intensity samples, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    samples: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, samples: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if samples.len() != width * height {
            return Err(Error::Dimension(format!(
                "{width}x{height} image needs {} samples, got {}",
                width * height,
                samples.len()
            )));
        }
        if let Some(pos) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!(
                "non-finite sample {} at index {pos}",
                samples[pos]
            )));
        }
        Ok(Self {
            width,
            height,
            samples,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self {
            width,
            height,
            samples: vec![value; width * height],
        }
    }

    /// Builds an image by evaluating `f(row, col)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut samples = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                samples.push(f(r, c));
            }
        }
        Self {
            width,
            height,
            samples,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.samples[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.samples[row * self.width + col] = value;
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn check_same_shape(&self, other: &Image, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "{what}: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }

    pub fn transpose(&self) -> Image {
        Image::from_fn(self.height, self.width, |r, c| self.get(c, r))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image {
            width: self.width,
            height: self.height,
            samples: self.samples.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise `f(self, other)`. Panics on shape mismatch.
    pub fn zip_map(&self, other: &Image, f: impl Fn(f64, f64) -> f64) -> Image {
        assert!(self.same_shape(other), "zip_map on mismatched shapes");
        Image {
            width: self.width,
            height: self.height,
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add_scalar(&self, c: f64) -> Image {
        self.map(|v| v + c)
    }

    pub fn scale(&self, c: f64) -> Image {
        self.map(|v| v * c)
    }

    /// `self += alpha * other`. Panics on shape mismatch.
    pub fn axpy(&mut self, alpha: f64, other: &Image) {
        assert!(self.same_shape(other), "axpy on mismatched shapes");
        for (a, b) in self.samples.iter_mut().zip(&other.samples) {
            *a += alpha * b;
        }
    }

    pub fn dot(&self, other: &Image) -> f64 {
        assert!(self.same_shape(other), "dot on mismatched shapes");
        self.samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// The `width`×`height` window whose top-left corner is `(top, left)`.
    pub fn crop(&self, top: usize, left: usize, width: usize, height: usize) -> Result<Image> {
        if width == 0 || height == 0 || top + height > self.height || left + width > self.width {
            return Err(Error::Dimension(format!(
                "crop {width}x{height} at ({top},{left}) does not fit in {}x{}",
                self.width, self.height
            )));
        }
        Ok(Image::from_fn(width, height, |r, c| self.get(top + r, left + c)))
    }

    /// Largest centred crop whose sides are multiples of `n`.
    pub fn center_crop_to_multiple(&self, n: usize) -> Result<Image> {
        let (top, left, w, h) = center_crop_window(self.width, self.height, n)?;
        self.crop(top, left, w, h)
    }

    /// Inverse of [`Image::crop`] for gradients: places `self` into a zero
    /// image of the given size at `(top, left)`.
    pub fn embed(&self, top: usize, left: usize, width: usize, height: usize) -> Image {
        assert!(top + self.height <= height && left + self.width <= width);
        let mut out = Image::zeros(width, height);
        for r in 0..self.height {
            let dst = (top + r) * width + left;
            out.samples[dst..dst + self.width]
                .copy_from_slice(&self.samples[r * self.width..(r + 1) * self.width]);
        }
        out
    }
}

/// `(top, left, width, height)` of the largest centred window with sides
/// divisible by `n`.
pub fn center_crop_window(width: usize, height: usize, n: usize) -> Result<(usize, usize, usize, usize)> {
    if n == 0 {
        return Err(Error::Parameter("patch size must be at least 1".into()));
    }
    let w = width - width % n;
    let h = height - height % n;
    if w == 0 || h == 0 {
        return Err(Error::Dimension(format!(
            "{width}x{height} image is smaller than one {n}x{n} patch"
        )));
    }
    Ok(((height - h) / 2, (width - w) / 2, w, h))
}

/// A 3×3 convolution kernel, `taps[row][col]` with the centre at `[1][1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel3 {
    taps: [[f64; 3]; 3],
}

impl Kernel3 {
    pub fn new(taps: [[f64; 3]; 3]) -> Result<Self> {
        if taps.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("kernel taps must be finite".into()));
        }
        Ok(Self { taps })
    }

    pub fn identity() -> Self {
        Self {
            taps: [[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]],
        }
    }

    /// Horizontal Scharr derivative stencil.
    pub fn scharr_x() -> Self {
        Self {
            taps: [[-3.0, 0.0, 3.0], [-10.0, 0.0, 10.0], [-3.0, 0.0, 3.0]],
        }
    }

    /// Vertical Scharr derivative stencil, the transpose of [`Kernel3::scharr_x`].
    pub fn scharr_y() -> Self {
        Self::scharr_x().transpose()
    }

    pub fn taps(&self) -> &[[f64; 3]; 3] {
        &self.taps
    }

    pub fn transpose(&self) -> Self {
        let t = &self.taps;
        Self {
            taps: [
                [t[0][0], t[1][0], t[2][0]],
                [t[0][1], t[1][1], t[2][1]],
                [t[0][2], t[1][2], t[2][2]],
            ],
        }
    }
}

/// Mirror an out-of-range index back into `0..len` without repeating the
/// border sample. Only valid for offsets of at most `len - 1`.
#[inline]
pub(crate) fn reflect(i: isize, len: usize) -> usize {
    let n = len as isize;
    let j = if i < 0 {
        -i
    } else if i >= n {
        2 * (n - 1) - i
    } else {
        i
    };
    j as usize
}

fn check_conv_size(image: &Image) -> Result<()> {
    if image.width < 3 || image.height < 3 {
        return Err(Error::Dimension(format!(
            "convolution needs at least a 3x3 image, got {}x{}",
            image.width, image.height
        )));
    }
    Ok(())
}

/// Same-size true convolution with reflect padding.
pub fn convolve_same(image: &Image, kernel: &Kernel3) -> Result<Image> {
    check_conv_size(image)?;
    let (w, h) = (image.width, image.height);
    let mut out = vec![0.0; w * h];
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for (a, row) in kernel.taps.iter().enumerate() {
                let rr = reflect(r as isize - (a as isize - 1), h);
                for (b, &k) in row.iter().enumerate() {
                    if k == 0.0 {
                        continue;
                    }
                    let cc = reflect(c as isize - (b as isize - 1), w);
                    acc += k * image.samples[rr * w + cc];
                }
            }
            out[r * w + c] = acc;
        }
    }
    Ok(Image {
        width: w,
        height: h,
        samples: out,
    })
}

/// Adjoint of [`convolve_same`]: given `∂L/∂output`, returns `∂L/∂input`.
/// Reflected taps scatter back onto the pixels they were read from.
pub fn convolve_same_adjoint(upstream: &Image, kernel: &Kernel3) -> Result<Image> {
    check_conv_size(upstream)?;
    let (w, h) = (upstream.width, upstream.height);
    let mut out = vec![0.0; w * h];
    for r in 0..h {
        for c in 0..w {
            let g = upstream.samples[r * w + c];
            if g == 0.0 {
                continue;
            }
            for (a, row) in kernel.taps.iter().enumerate() {
                let rr = reflect(r as isize - (a as isize - 1), h);
                for (b, &k) in row.iter().enumerate() {
                    if k == 0.0 {
                        continue;
                    }
                    let cc = reflect(c as isize - (b as isize - 1), w);
                    out[rr * w + cc] += k * g;
                }
            }
        }
    }
    Ok(Image {
        width: w,
        height: h,
        samples: out,
    })
}

/// Horizontal and vertical Scharr gradient maps `(G_x, G_y)`.
pub fn scharr_gradients(image: &Image) -> Result<(Image, Image)> {
    let gx = convolve_same(image, &Kernel3::scharr_x())?;
    let gy = convolve_same(image, &Kernel3::scharr_y())?;
    Ok((gx, gy))
}

/// Per-patch population variances of a gradient map.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl VarianceMap {
    /// Wraps an arbitrary nonnegative grid, mostly for spectral tests.
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::Dimension(format!(
                "{width}x{height} variance map with {} values",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Parameter(
                "variance map values must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }
}

fn check_divisible(map: &Image, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Parameter("patch size must be at least 1".into()));
    }
    if map.width % n != 0 {
        return Err(Error::Dimension(format!(
            "width {} is not divisible by patch size {n}",
            map.width
        )));
    }
    if map.height % n != 0 {
        return Err(Error::Dimension(format!(
            "height {} is not divisible by patch size {n}",
            map.height
        )));
    }
    Ok(())
}

/// Splits `gradient_map` into non-overlapping `n`×`n` patches and returns
/// the population variance of each.
pub fn unfold_variance(gradient_map: &Image, n: usize) -> Result<VarianceMap> {
    check_divisible(gradient_map, n)?;
    let (bw, bh) = (gradient_map.width / n, gradient_map.height / n);
    let count = (n * n) as f64;
    let mut values = Vec::with_capacity(bw * bh);
    for i in 0..bh {
        for j in 0..bw {
            let mut sum = 0.0;
            for r in i * n..(i + 1) * n {
                for c in j * n..(j + 1) * n {
                    sum += gradient_map.get(r, c);
                }
            }
            let mean = sum / count;
            let mut ss = 0.0;
            for r in i * n..(i + 1) * n {
                for c in j * n..(j + 1) * n {
                    let d = gradient_map.get(r, c) - mean;
                    ss += d * d;
                }
            }
            values.push(ss / count);
        }
    }
    Ok(VarianceMap {
        width: bw,
        height: bh,
        values,
    })
}

/// Chains `∂L/∂variance` back to `∂L/∂gradient_map` using
/// `∂v/∂x = 2 (x − patch mean) / n²`.
pub fn unfold_variance_backward(
    gradient_map: &Image,
    n: usize,
    upstream: &[f64],
) -> Result<Image> {
    check_divisible(gradient_map, n)?;
    let (bw, bh) = (gradient_map.width / n, gradient_map.height / n);
    if upstream.len() != bw * bh {
        return Err(Error::Dimension(format!(
            "upstream has {} values, variance map has {}",
            upstream.len(),
            bw * bh
        )));
    }
    let count = (n * n) as f64;
    let mut out = Image::zeros(gradient_map.width, gradient_map.height);
    for i in 0..bh {
        for j in 0..bw {
            let g = upstream[i * bw + j];
            if g == 0.0 {
                continue;
            }
            let mut sum = 0.0;
            for r in i * n..(i + 1) * n {
                for c in j * n..(j + 1) * n {
                    sum += gradient_map.get(r, c);
                }
            }
            let mean = sum / count;
            for r in i * n..(i + 1) * n {
                for c in j * n..(j + 1) * n {
                    out.set(r, c, g * 2.0 * (gradient_map.get(r, c) - mean) / count);
                }
            }
        }
    }
    Ok(out)
}
