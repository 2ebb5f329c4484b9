//! Data synthesis shared by the subcommands: noisy sinograms, training sets,
//! and the geometry tag stored in sinogram file headers.

use anyhow::{anyhow, bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use eagle_core::phantom::{random_phantom, shepp_logan};
use eagle_core::tffilter::TrainingSample;
use eagle_core::tomo::{radon_forward, Geometry, Sinogram};
use eagle_core::Image;

/// Additive Gaussian noise settings for simulated sinograms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub sigma: f64,
    /// Interpret `sigma` as a fraction of the sinogram maximum.
    pub relative: bool,
}

impl NoiseModel {
    pub const NONE: NoiseModel = NoiseModel {
        sigma: 0.0,
        relative: false,
    };

    pub fn absolute_sigma(&self, sino: &Sinogram) -> f64 {
        if self.relative {
            self.sigma * sino.max().abs()
        } else {
            self.sigma
        }
    }
}

/// Adds seeded i.i.d. Gaussian noise to every sinogram value.
pub fn add_noise(sino: &mut Sinogram, noise: NoiseModel, seed: u64) -> Result<()> {
    let sigma = noise.absolute_sigma(sino);
    if sigma == 0.0 {
        return Ok(());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| anyhow!("invalid noise sigma {sigma}: {e}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in sino.values_mut() {
        *v += normal.sample(&mut rng);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PhantomKind {
    Shepp,
    Random,
}

pub fn make_phantom(kind: PhantomKind, size: usize, ellipses: usize, seed: u64) -> Result<Image> {
    Ok(match kind {
        PhantomKind::Shepp => shepp_logan(size)?,
        PhantomKind::Random => random_phantom(size, ellipses, seed)?,
    })
}

/// Projects `phantom` and adds noise.
pub fn simulate(phantom: &Image, geom: &Geometry, noise: NoiseModel, seed: u64) -> Result<Sinogram> {
    let mut sino = radon_forward(phantom, geom)?;
    add_noise(&mut sino, noise, seed)?;
    Ok(sino)
}

/// Settings for a synthetic training set of random phantoms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetSpec {
    pub samples: usize,
    pub size: usize,
    pub angles: usize,
    pub ellipses: usize,
    pub noise: NoiseModel,
    pub seed: u64,
}

/// Sample `i` uses phantom seed `seed + 2i` and noise seed `seed + 2i + 1`.
pub fn make_dataset(spec: &DatasetSpec) -> Result<(Geometry, Vec<TrainingSample>)> {
    if spec.samples == 0 {
        bail!("dataset needs at least one sample");
    }
    let geom = Geometry::for_image(spec.size, spec.angles)?;
    let mut out = Vec::with_capacity(spec.samples);
    for i in 0..spec.samples as u64 {
        let phantom = random_phantom(spec.size, spec.ellipses, spec.seed.wrapping_add(2 * i))?;
        let sinogram = simulate(&phantom, &geom, spec.noise, spec.seed.wrapping_add(2 * i + 1))?;
        out.push(TrainingSample {
            sinogram,
            ground_truth: phantom,
        });
    }
    Ok((geom, out))
}

/// Header description for a sinogram of a `size`×`size` image, parsed back
/// by [`parse_geometry_tag`].
pub fn geometry_tag(geom: &Geometry, size: usize) -> String {
    format!(
        "sinogram angles={} detectors={} spacing={} size={size}",
        geom.num_angles(),
        geom.num_detectors(),
        geom.detector_spacing()
    )
}

/// Geometry and, when recorded, the image size of a sinogram header.
pub fn parse_geometry_tag(description: &str) -> Result<(Geometry, Option<usize>)> {
    let mut words = description.split_whitespace();
    if words.next() != Some("sinogram") {
        bail!("header description '{description}' does not describe a sinogram");
    }
    let (mut angles, mut detectors, mut spacing, mut size) = (None, None, None, None);
    for word in words {
        let (key, value) = word
            .split_once('=')
            .with_context(|| format!("malformed geometry field '{word}'"))?;
        match key {
            "angles" => angles = Some(value.parse::<usize>()?),
            "detectors" => detectors = Some(value.parse::<usize>()?),
            "spacing" => spacing = Some(value.parse::<f64>()?),
            "size" => size = Some(value.parse::<usize>()?),
            _ => {}
        }
    }
    match (angles, detectors, spacing) {
        (Some(a), Some(d), Some(s)) => Ok((Geometry::new(a, d, s)?, size)),
        _ => bail!("sinogram header is missing angles, detectors or spacing"),
    }
}
