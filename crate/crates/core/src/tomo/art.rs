use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Geometry, Sinogram, SystemMatrix};
use crate::eagle::{eagle_value_and_gradient, on_center_crop, tv_gradient, tv_value, EagleConfig};
use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegKind {
    None,
    Tv,
    Eagle,
}

impl std::str::FromStr for RegKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(RegKind::None),
            "tv" => Ok(RegKind::Tv),
            "eagle" => Ok(RegKind::Eagle),
            other => Err(Error::Parameter(format!("unknown regularizer '{other}'"))),
        }
    }
}

impl std::fmt::Display for RegKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RegKind::None => "none",
            RegKind::Tv => "tv",
            RegKind::Eagle => "eagle",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtConfig {
    pub num_sweeps: usize,
    pub relaxation: f64,
    pub reg_kind: RegKind,
    pub reg_weight: f64,
    pub reg_step: f64,
    pub eagle: EagleConfig,
    pub nonnegativity: bool,
    /// Visit rays in a seeded random order instead of angle-major order.
    pub shuffle_seed: Option<u64>,
    /// Rays whose chord through the image is shorter than this many pixels
    /// are skipped. A ray grazing a corner touches a pixel or two with tiny
    /// weights, and the Kaczmarz update divides its noise by those weights.
    pub min_ray_length: f64,
}

impl Default for ArtConfig {
    fn default() -> Self {
        Self {
            num_sweeps: 20,
            relaxation: 0.25,
            reg_kind: RegKind::None,
            reg_weight: 0.0,
            reg_step: 1.0,
            eagle: EagleConfig::default(),
            nonnegativity: false,
            shuffle_seed: None,
            min_ray_length: 1.0,
        }
    }
}

impl ArtConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_sweeps == 0 {
            return Err(Error::Parameter("ART needs at least one sweep".into()));
        }
        if !(self.relaxation > 0.0 && self.relaxation < 2.0) {
            return Err(Error::Parameter(format!(
                "relaxation must lie in (0, 2), got {}",
                self.relaxation
            )));
        }
        if !(self.reg_weight >= 0.0) || !self.reg_weight.is_finite() {
            return Err(Error::Parameter(format!(
                "regularization weight must be >= 0, got {}",
                self.reg_weight
            )));
        }
        if !(self.reg_step > 0.0) || !self.reg_step.is_finite() {
            return Err(Error::Parameter(format!(
                "regularization step must be > 0, got {}",
                self.reg_step
            )));
        }
        if !(self.min_ray_length >= 0.0) || !self.min_ray_length.is_finite() {
            return Err(Error::Parameter(format!(
                "minimum ray length must be >= 0, got {}",
                self.min_ray_length
            )));
        }
        self.eagle.validate()
    }

    /// Regularizer actually applied; a zero weight disables it.
    pub fn effective_reg(&self) -> RegKind {
        if self.reg_weight == 0.0 {
            RegKind::None
        } else {
            self.reg_kind
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepLog {
    pub sweep: usize,
    /// `‖A x − b‖²` after the sweep.
    pub residual_sq: f64,
    /// Regularizer value after the sweep, 0 when unregularized.
    pub regularizer: f64,
}

#[derive(Debug, Clone)]
pub struct ArtResult {
    pub image: Image,
    pub log: Vec<SweepLog>,
}

/// One relaxed Kaczmarz pass over the rows of `a` in `order`.
pub fn kaczmarz_sweep(a: &SystemMatrix, b: &[f64], x: &mut [f64], relaxation: f64, order: &[usize]) {
    for &i in order {
        let row = &a.rows()[i];
        let norm_sq = row.norm_sq();
        if norm_sq == 0.0 {
            continue;
        }
        let step = relaxation * (b[i] - row.dot(x)) / norm_sq;
        for (&p, &w) in row.indices.iter().zip(&row.weights) {
            x[p as usize] += step * w;
        }
    }
}

fn regularizer(
    kind: RegKind,
    x: &Image,
    reference: Option<&Image>,
    eagle: &EagleConfig,
) -> Result<Option<(f64, Image)>> {
    match kind {
        RegKind::None => Ok(None),
        RegKind::Tv => Ok(Some((tv_value(x)?, tv_gradient(x)?))),
        RegKind::Eagle => {
            let reference = reference.ok_or_else(|| {
                Error::Config("eagle regularization needs a reference image".into())
            })?;
            Ok(Some(on_center_crop(x, reference, eagle, eagle_value_and_gradient)?))
        }
    }
}

/// ART on an explicit system, starting from zero.
pub fn art_with_matrix(
    a: &SystemMatrix,
    b: &[f64],
    cfg: &ArtConfig,
    reference: Option<&Image>,
) -> Result<ArtResult> {
    cfg.validate()?;
    let size = a.size();
    if b.len() != a.rows().len() {
        return Err(Error::Dimension(format!(
            "{} measurements for {} rays",
            b.len(),
            a.rows().len()
        )));
    }
    let kind = cfg.effective_reg();
    if kind == RegKind::Eagle {
        match reference {
            None => {
                return Err(Error::Config(
                    "eagle regularization needs a reference image".into(),
                ))
            }
            Some(r) if r.width() != size || r.height() != size => {
                return Err(Error::Dimension(format!(
                    "reference is {}x{}, reconstruction is {size}x{size}",
                    r.width(),
                    r.height()
                )))
            }
            _ => {}
        }
    }

    let mut order: Vec<usize> = (0..a.rows().len())
        .filter(|&i| a.rows()[i].length() >= cfg.min_ray_length)
        .collect();
    let mut rng = cfg.shuffle_seed.map(ChaCha8Rng::seed_from_u64);
    let mut x = Image::zeros(size, size);
    let mut log = Vec::with_capacity(cfg.num_sweeps);
    for sweep in 0..cfg.num_sweeps {
        if let Some(rng) = rng.as_mut() {
            order.shuffle(rng);
        }
        kaczmarz_sweep(a, b, x.samples_mut(), cfg.relaxation, &order);
        if let Some((_, grad)) = regularizer(kind, &x, reference, &cfg.eagle)? {
            x.axpy(-cfg.reg_step * cfg.reg_weight, &grad);
        }
        if cfg.nonnegativity {
            x.samples_mut().iter_mut().for_each(|v| *v = v.max(0.0));
        }
        let reg_value = regularizer(kind, &x, reference, &cfg.eagle)?.map_or(0.0, |(v, _)| v);
        log.push(SweepLog {
            sweep: sweep + 1,
            residual_sq: a.residual_sq(x.samples(), b),
            regularizer: reg_value,
        });
    }
    Ok(ArtResult { image: x, log })
}

/// Kaczmarz sweeps over every ray of `geom` with an optional regularizer
/// step after each sweep. `reference` is required for
/// [`RegKind::Eagle`], which penalizes spectral distance to it.
pub fn art_reconstruct(
    sino: &Sinogram,
    geom: &Geometry,
    cfg: &ArtConfig,
    out_size: usize,
    reference: Option<&Image>,
) -> Result<ArtResult> {
    sino.check_geometry(geom)?;
    cfg.validate()?;
    if cfg.effective_reg() == RegKind::Eagle && reference.is_none() {
        return Err(Error::Config(
            "eagle regularization needs a reference image".into(),
        ));
    }
    let a = SystemMatrix::from_geometry(out_size, geom)?;
    art_with_matrix(&a, sino.values(), cfg, reference)
}
