//! Filtered backprojection with a trainable cosine-series filter.
//!
//! The filter response on the nonnegative detector-frequency bins is
//! `H(f) = Σ_k c_k cos(π k f / f_max)`, even in `f` by construction. Every
//! stage of the reconstruction is linear in `H`, hence in the coefficients,
//! so a reconstruction is `Σ_k c_k B_k` where `B_k` is the reconstruction
//! with the `k`-th unit coefficient vector. Training precomputes the `B_k`
//! for each sample and gets exact coefficient gradients from inner products.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eagle::{combined_value_and_gradient, on_center_crop, EagleConfig, LossBreakdown};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::metrics::{default_data_range, high_frequency_fraction, psnr, ssim};
use crate::tomo::{backproject, filter_sinogram, ramp_response, FrequencyGrid, Geometry, Sinogram};

/// Coefficient count used at desk scale.
pub const DEFAULT_NUM_COEFFS: usize = 63;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterCoefficients {
    pub coeffs: Vec<f64>,
    pub num_detectors: usize,
}

impl FilterCoefficients {
    pub fn new(coeffs: Vec<f64>, num_detectors: usize) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Parameter("filter needs at least one coefficient".into()));
        }
        if num_detectors == 0 {
            return Err(Error::Parameter("filter needs at least one detector".into()));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Parameter("filter coefficients must be finite".into()));
        }
        Ok(Self {
            coeffs,
            num_detectors,
        })
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Unit vector selecting basis function `k`.
    pub fn unit(num_coeffs: usize, k: usize, num_detectors: usize) -> Self {
        let mut coeffs = vec![0.0; num_coeffs];
        coeffs[k] = 1.0;
        Self {
            coeffs,
            num_detectors,
        }
    }

    fn grid(&self, spacing: f64) -> FrequencyGrid {
        FrequencyGrid::new(self.num_detectors, spacing)
    }

    fn check_geometry(&self, geom: &Geometry) -> Result<()> {
        if self.num_detectors != geom.num_detectors() {
            return Err(Error::Dimension(format!(
                "filter was built for {} detectors, geometry has {}",
                self.num_detectors,
                geom.num_detectors()
            )));
        }
        Ok(())
    }
}

/// Basis function `k` on the `bins` nonnegative bins of the padded grid.
fn cosine_basis(k: usize, bins: usize) -> impl Iterator<Item = f64> {
    let last = (bins - 1) as f64;
    (0..bins).map(move |j| (std::f64::consts::PI * k as f64 * j as f64 / last).cos())
}

/// Frequency response on the nonnegative detector-frequency bins.
pub fn filter_response(fc: &FilterCoefficients) -> Vec<f64> {
    // The normalized frequency f / f_max does not depend on the spacing.
    let bins = fc.grid(1.0).num_bins();
    let mut h = vec![0.0; bins];
    for (k, &c) in fc.coeffs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        for (hj, b) in h.iter_mut().zip(cosine_basis(k, bins)) {
            *hj += c * b;
        }
    }
    h
}

/// Least-squares fit of `target` (given on the nonnegative bins) by the
/// first `num_coeffs` cosine basis functions.
pub fn cosine_fit(target: &[f64], num_coeffs: usize) -> Result<Vec<f64>> {
    let bins = target.len();
    if num_coeffs == 0 || num_coeffs > bins {
        return Err(Error::Parameter(format!(
            "cannot fit {num_coeffs} coefficients to {bins} bins"
        )));
    }
    let mut basis = DMatrix::<f64>::zeros(bins, num_coeffs);
    for k in 0..num_coeffs {
        for (j, b) in cosine_basis(k, bins).enumerate() {
            basis[(j, k)] = b;
        }
    }
    let rhs = DVector::from_column_slice(target);
    let solution = basis
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::Parameter(format!("cosine fit failed: {e}")))?;
    Ok(solution.iter().copied().collect())
}

/// Cosine-series projection of the ramp filter for `geom`.
pub fn ramp_projection(geom: &Geometry, num_coeffs: usize) -> Result<FilterCoefficients> {
    let ramp = ramp_response(&FrequencyGrid::for_geometry(geom));
    FilterCoefficients::new(cosine_fit(&ramp, num_coeffs)?, geom.num_detectors())
}

/// FBP with the learned response in place of the ramp.
pub fn tf_fbp_reconstruct(
    sino: &Sinogram,
    geom: &Geometry,
    fc: &FilterCoefficients,
    out_size: usize,
) -> Result<Image> {
    sino.check_geometry(geom)?;
    fc.check_geometry(geom)?;
    let grid = fc.grid(geom.detector_spacing());
    let filtered = filter_sinogram(sino, &grid, &filter_response(fc))?;
    backproject(&filtered, geom, out_size)
}

#[derive(Debug, Clone)]
pub struct TrainingSample {
    pub sinogram: Sinogram,
    pub ground_truth: Image,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    /// 0 is the loss at the initial coefficients.
    pub epoch: usize,
    pub total: f64,
    pub mse: f64,
    pub eagle: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub coefficients: FilterCoefficients,
    pub log: Vec<EpochLog>,
}

/// Learning-rate halvings tried before an epoch gives up and keeps the
/// current coefficients.
const MAX_BACKTRACKS: usize = 40;
const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Optimizer {
    /// Steps along the negative gradient.
    GradientDescent,
    /// Bias-corrected moment estimates scale each coefficient's step.
    Adam { beta1: f64, beta2: f64 },
}

impl Optimizer {
    pub const ADAM: Optimizer = Optimizer::Adam {
        beta1: 0.9,
        beta2: 0.99,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
}

impl TrainSettings {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Parameter("training needs at least one epoch".into()));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Parameter(format!(
                "learning rate must be >= 0, got {}",
                self.learning_rate
            )));
        }
        if let Optimizer::Adam { beta1, beta2 } = self.optimizer {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) {
                return Err(Error::Parameter(format!(
                    "Adam decay rates must lie in [0, 1), got {beta1} and {beta2}"
                )));
            }
        }
        Ok(())
    }
}

/// Per-sample basis reconstructions, shared across training runs.
pub struct FilterTrainer {
    geometry: Geometry,
    num_coeffs: usize,
    samples: Vec<(Vec<Image>, Image)>,
}

impl FilterTrainer {
    pub fn new(dataset: &[TrainingSample], geom: &Geometry, num_coeffs: usize) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::Config("training dataset is empty".into()));
        }
        if num_coeffs == 0 {
            return Err(Error::Parameter("filter needs at least one coefficient".into()));
        }
        let size = dataset[0].ground_truth.width();
        for s in dataset {
            s.sinogram.check_geometry(geom)?;
            let gt = &s.ground_truth;
            if gt.width() != size || gt.height() != size {
                return Err(Error::Config(
                    "training images must all be square and the same size".into(),
                ));
            }
        }
        let grid = FrequencyGrid::for_geometry(geom);
        if num_coeffs > grid.num_bins() {
            return Err(Error::Parameter(format!(
                "{num_coeffs} coefficients exceed the {} frequency bins",
                grid.num_bins()
            )));
        }
        let samples = dataset
            .iter()
            .map(|s| -> Result<(Vec<Image>, Image)> {
                let bases = (0..num_coeffs)
                    .into_par_iter()
                    .map(|k| {
                        let unit = FilterCoefficients::unit(num_coeffs, k, geom.num_detectors());
                        tf_fbp_reconstruct(&s.sinogram, geom, &unit, size)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((bases, s.ground_truth.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            geometry: geom.clone(),
            num_coeffs,
            samples,
        })
    }

    pub fn num_coeffs(&self) -> usize {
        self.num_coeffs
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn num_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn ground_truth(&self, i: usize) -> &Image {
        &self.samples[i].1
    }

    fn combine(bases: &[Image], coeffs: &[f64]) -> Image {
        let mut out = Image::zeros(bases[0].width(), bases[0].height());
        for (b, &c) in bases.iter().zip(coeffs) {
            if c != 0.0 {
                out.axpy(c, b);
            }
        }
        out
    }

    /// Reconstruction of training sample `i` from its basis images.
    pub fn reconstruct(&self, i: usize, coeffs: &[f64]) -> Image {
        Self::combine(&self.samples[i].0, coeffs)
    }

    /// Mean combined loss over the dataset and its coefficient gradient.
    /// The loss is evaluated on the largest centred crop divisible by the
    /// patch size.
    pub fn loss_and_gradient(&self, coeffs: &[f64], cfg: &EagleConfig) -> Result<(LossBreakdown, Vec<f64>)> {
        assert_eq!(coeffs.len(), self.num_coeffs);
        let per_sample = self
            .samples
            .par_iter()
            .map(|(bases, gt)| -> Result<(LossBreakdown, Vec<f64>)> {
                let rec = Self::combine(bases, coeffs);
                let (loss, grad) = on_center_crop(&rec, gt, cfg, combined_value_and_gradient)?;
                Ok((loss, bases.iter().map(|b| b.dot(&grad)).collect()))
            })
            .collect::<Result<Vec<_>>>()?;
        let n = per_sample.len() as f64;
        let mut mean = LossBreakdown {
            total: 0.0,
            mse_term: 0.0,
            eagle_term: 0.0,
        };
        let mut grad = vec![0.0; self.num_coeffs];
        for (loss, g) in &per_sample {
            mean.total += loss.total / n;
            mean.mse_term += loss.mse_term / n;
            mean.eagle_term += loss.eagle_term / n;
            for (acc, v) in grad.iter_mut().zip(g) {
                *acc += v / n;
            }
        }
        Ok((mean, grad))
    }

    pub fn loss(&self, coeffs: &[f64], cfg: &EagleConfig) -> Result<LossBreakdown> {
        Ok(self.loss_and_gradient(coeffs, cfg)?.0)
    }

    /// Descends from `init`. A step that raises the loss is retried with
    /// half the learning rate, so the logged loss never increases; an
    /// accepted step doubles the rate again, up to the configured one.
    pub fn train(
        &self,
        init: &FilterCoefficients,
        cfg: &EagleConfig,
        settings: &TrainSettings,
    ) -> Result<TrainResult> {
        cfg.validate()?;
        settings.validate()?;
        if init.len() != self.num_coeffs {
            return Err(Error::Dimension(format!(
                "initial filter has {} coefficients, trainer expects {}",
                init.len(),
                self.num_coeffs
            )));
        }
        init.check_geometry(&self.geometry)?;

        let base_lr = settings.learning_rate;
        let mut coeffs = init.coeffs.clone();
        let mut lr = base_lr;
        let (mut loss, mut grad) = self.loss_and_gradient(&coeffs, cfg)?;
        let mut log = vec![EpochLog {
            epoch: 0,
            total: loss.total,
            mse: loss.mse_term,
            eagle: loss.eagle_term,
            learning_rate: lr,
        }];
        let mut first = vec![0.0; self.num_coeffs];
        let mut second = vec![0.0; self.num_coeffs];
        for epoch in 1..=settings.epochs {
            let direction: Vec<f64> = match settings.optimizer {
                Optimizer::GradientDescent => grad.clone(),
                Optimizer::Adam { beta1, beta2 } => {
                    let t = epoch as i32;
                    let (c1, c2) = (1.0 - beta1.powi(t), 1.0 - beta2.powi(t));
                    grad.iter()
                        .zip(first.iter_mut().zip(second.iter_mut()))
                        .map(|(&g, (m, v))| {
                            *m = beta1 * *m + (1.0 - beta1) * g;
                            *v = beta2 * *v + (1.0 - beta2) * g * g;
                            (*m / c1) / ((*v / c2).sqrt() + ADAM_EPSILON)
                        })
                        .collect()
                }
            };
            let mut accepted = false;
            for _ in 0..MAX_BACKTRACKS {
                let trial: Vec<f64> = coeffs.iter().zip(&direction).map(|(c, d)| c - lr * d).collect();
                let (trial_loss, trial_grad) = self.loss_and_gradient(&trial, cfg)?;
                if trial_loss.total <= loss.total {
                    coeffs = trial;
                    loss = trial_loss;
                    grad = trial_grad;
                    accepted = true;
                    break;
                }
                lr *= 0.5;
            }
            log.push(EpochLog {
                epoch,
                total: loss.total,
                mse: loss.mse_term,
                eagle: loss.eagle_term,
                learning_rate: lr,
            });
            if accepted {
                lr = (2.0 * lr).min(base_lr);
            }
        }
        Ok(TrainResult {
            coefficients: FilterCoefficients::new(coeffs, self.geometry.num_detectors())?,
            log,
        })
    }
}

/// Trains a filter on `dataset` starting from the ramp projection.
pub fn train_filter(
    dataset: &[TrainingSample],
    geom: &Geometry,
    cfg: &EagleConfig,
    num_coeffs: usize,
    settings: &TrainSettings,
) -> Result<TrainResult> {
    let trainer = FilterTrainer::new(dataset, geom, num_coeffs)?;
    let init = ramp_projection(geom, num_coeffs)?;
    trainer.train(&init, cfg, settings)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub kappa: f64,
    pub coefficients: FilterCoefficients,
    pub response: Vec<f64>,
    /// Dataset means.
    pub psnr: f64,
    pub ssim: f64,
    pub high_frequency_energy: f64,
    pub final_loss: LossBreakdown,
}

/// Trains one filter per cutoff with identical data and initialization and
/// scores the resulting reconstructions of the training set.
pub fn kappa_ablation(
    trainer: &FilterTrainer,
    base: &EagleConfig,
    kappas: &[f64],
    settings: &TrainSettings,
) -> Result<Vec<AblationRow>> {
    if kappas.is_empty() {
        return Err(Error::Config("ablation needs at least one kappa".into()));
    }
    let init = ramp_projection(trainer.geometry(), trainer.num_coeffs())?;
    kappas
        .iter()
        .map(|&kappa| {
            let cfg = base.with_kappa(kappa);
            let result = trainer.train(&init, &cfg, settings)?;
            let coeffs = &result.coefficients.coeffs;
            let n = trainer.samples.len() as f64;
            let (mut p, mut s, mut hf) = (0.0, 0.0, 0.0);
            for (i, (_, gt)) in trainer.samples.iter().enumerate() {
                let rec = trainer.reconstruct(i, coeffs);
                let range = default_data_range(gt)?;
                p += psnr(&rec, gt, range)? / n;
                s += ssim(&rec, gt, range)? / n;
                hf += high_frequency_fraction(&rec) / n;
            }
            Ok(AblationRow {
                kappa,
                response: filter_response(&result.coefficients),
                final_loss: result.log.last().map(|l| LossBreakdown {
                    total: l.total,
                    mse_term: l.mse,
                    eagle_term: l.eagle,
                }).expect("log has the initial entry"),
                coefficients: result.coefficients,
                psnr: p,
                ssim: s,
                high_frequency_energy: hf,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tomo::{fbp_reconstruct, radon_forward};

    #[test]
    fn dc_coefficient_is_all_pass() {
        let fc = FilterCoefficients::new(vec![1.0, 0.0, 0.0], 10).unwrap();
        assert!(filter_response(&fc).iter().all(|&h| h == 1.0));
        let zero = FilterCoefficients::new(vec![0.0; 4], 10).unwrap();
        assert!(filter_response(&zero).iter().all(|&h| h == 0.0));
        assert!(FilterCoefficients::new(vec![], 10).is_err());
    }

    #[test]
    fn response_length_matches_grid() {
        let fc = FilterCoefficients::new(vec![0.5, 0.25], 185).unwrap();
        assert_eq!(filter_response(&fc).len(), 257);
    }

    #[test]
    fn ramp_fit_improves_with_more_terms() {
        let g = Geometry::for_image(64, 30).unwrap();
        let ramp = ramp_response(&FrequencyGrid::for_geometry(&g));
        let mut last = f64::INFINITY;
        for p in [4, 16, 63] {
            let fc = ramp_projection(&g, p).unwrap();
            let err = filter_response(&fc)
                .iter()
                .zip(&ramp)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < last, "P={p}: {err} >= {last}");
            last = err;
        }
        assert!(last < 0.01);
    }

    #[test]
    fn zero_filter_gives_zero_image() {
        let g = Geometry::for_image(24, 12).unwrap();
        let img = Image::from_fn(24, 24, |r, c| ((r + c) % 5) as f64);
        let s = radon_forward(&img, &g).unwrap();
        let zero = FilterCoefficients::new(vec![0.0; 5], g.num_detectors()).unwrap();
        let rec = tf_fbp_reconstruct(&s, &g, &zero, 24).unwrap();
        assert!(rec.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ramp_projection_reproduces_fbp() {
        let g = Geometry::for_image(32, 24).unwrap();
        let img = crate::phantom::render_ellipses(32, &crate::phantom::SHEPP_LOGAN);
        let s = radon_forward(&img, &g).unwrap();
        let fbp = fbp_reconstruct(&s, &g, 32).unwrap();
        let tf = tf_fbp_reconstruct(&s, &g, &ramp_projection(&g, 63).unwrap(), 32).unwrap();
        let diff = fbp
            .samples()
            .iter()
            .zip(tf.samples())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 0.05, "{diff}");
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let g = Geometry::for_image(16, 8).unwrap();
        assert!(matches!(FilterTrainer::new(&[], &g, 4), Err(Error::Config(_))));
    }
}
