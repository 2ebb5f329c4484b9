//! Central finite-difference checks of the analytic loss gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eagle::{combined_loss, combined_loss_gradient, eagle_loss, eagle_loss_gradient, EagleConfig};
use crate::error::Result;
use crate::image::Image;

/// Finite-difference step on unit-scaled images.
pub const DEFAULT_STEP: f64 = 1e-4;
/// Largest accepted relative error per component.
pub const DEFAULT_TOLERANCE: f64 = 1e-4;
/// Components with smaller analytic magnitude are not compared.
pub const MAGNITUDE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Eagle,
    Combined,
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Objective::Eagle => "eagle",
            Objective::Combined => "combined",
        })
    }
}

impl Objective {
    pub fn value(&self, rec: &Image, gt: &Image, cfg: &EagleConfig) -> Result<f64> {
        match self {
            Objective::Eagle => eagle_loss(rec, gt, cfg),
            Objective::Combined => Ok(combined_loss(rec, gt, cfg)?.total),
        }
    }

    pub fn gradient(&self, rec: &Image, gt: &Image, cfg: &EagleConfig) -> Result<Image> {
        match self {
            Objective::Eagle => eagle_loss_gradient(rec, gt, cfg),
            Objective::Combined => combined_loss_gradient(rec, gt, cfg),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub objective: Objective,
    pub kappa: f64,
    /// Largest `|analytic − fd| / max(|analytic|, |fd|)` over compared pixels.
    pub max_rel_error: f64,
    pub compared: usize,
    pub passed: bool,
}

/// Fourth-order central differences of `objective` at every pixel of `rec`.
///
/// The two-point stencil's `h²` truncation term alone can exceed the
/// tolerance where a spectral bin sits near zero modulus, so the five-point
/// stencil is used at the same step.
pub fn finite_difference_gradient(
    objective: Objective,
    rec: &Image,
    gt: &Image,
    cfg: &EagleConfig,
    step: f64,
) -> Result<Image> {
    let mut probe = rec.clone();
    let mut out = Image::zeros(rec.width(), rec.height());
    for i in 0..rec.len() {
        let x = rec.samples()[i];
        let mut at = |offset: f64| -> Result<f64> {
            probe.samples_mut()[i] = x + offset;
            objective.value(&probe, gt, cfg)
        };
        let (p2, p1, m1, m2) = (at(2.0 * step)?, at(step)?, at(-step)?, at(-2.0 * step)?);
        probe.samples_mut()[i] = x;
        out.samples_mut()[i] = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * step);
    }
    Ok(out)
}

pub fn check_gradient(
    objective: Objective,
    rec: &Image,
    gt: &Image,
    cfg: &EagleConfig,
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let analytic = objective.gradient(rec, gt, cfg)?;
    let numeric = finite_difference_gradient(objective, rec, gt, cfg, step)?;
    let mut max_rel_error: f64 = 0.0;
    let mut compared = 0;
    for (&a, &f) in analytic.samples().iter().zip(numeric.samples()) {
        if a.abs() <= MAGNITUDE_FLOOR {
            continue;
        }
        compared += 1;
        max_rel_error = max_rel_error.max((a - f).abs() / a.abs().max(f.abs()));
    }
    Ok(GradCheckReport {
        objective,
        kappa: cfg.kappa,
        max_rel_error,
        compared,
        passed: max_rel_error < tolerance,
    })
}

/// Image with independent uniform `[0, 1)` samples.
pub fn random_unit_image(width: usize, height: usize, rng: &mut impl Rng) -> Image {
    Image::from_fn(width, height, |_, _| rng.gen::<f64>())
}

/// Random `(rec, gt)` pairs for trial `0..trials`, deterministic in `seed`.
pub fn random_pairs(size: usize, trials: usize, seed: u64) -> Vec<(Image, Image)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials)
        .map(|_| {
            let rec = random_unit_image(size, size, &mut rng);
            let gt = random_unit_image(size, size, &mut rng);
            (rec, gt)
        })
        .collect()
}
