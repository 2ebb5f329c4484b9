use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use eagle_core::eagle::{combined_loss, on_center_crop, DEFAULT_KAPPA, DEFAULT_LAMBDA, DEFAULT_PATCH_SIZE};
use eagle_core::gradcheck::{check_gradient, random_pairs, Objective, DEFAULT_STEP, DEFAULT_TOLERANCE};
use eagle_core::io::{export_pgm, format_f64, read_image, write_image, CsvTable};
use eagle_core::metrics::{
    default_data_range, high_frequency_fraction, inscribed_circle_mask, psnr_masked, MetricReport,
};
use eagle_core::tffilter::{
    filter_response, kappa_ablation, ramp_projection, FilterCoefficients, FilterTrainer, Optimizer, TrainSettings,
};
use eagle_core::tomo::{art_reconstruct, fbp_reconstruct, ArtConfig, FrequencyGrid, Geometry, RegKind, Sinogram};
use eagle_core::{EagleConfig, Image, LossBreakdown};

use crate::experiment::{
    geometry_tag, make_dataset, make_phantom, parse_geometry_tag, simulate, DatasetSpec, NoiseModel, PhantomKind,
};
use crate::UsageError;

#[derive(Debug, Parser)]
#[command(name = "eagle", version, about = "Spectral variance-map loss and CT reconstruction experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the combined loss between two image files.
    Loss(LossArgs),
    /// Compare analytic loss gradients with finite differences.
    Gradcheck(GradcheckArgs),
    /// Project a phantom into a noisy sinogram.
    Simulate(SimulateArgs),
    /// Reconstruct an image from a sinogram file.
    Reconstruct(ReconstructArgs),
    /// Train a Fourier-series FBP filter on random phantoms.
    TrainFilter(TrainArgs),
    /// Train one filter per cutoff and compare the reconstructions.
    AblateKappa(AblateArgs),
}

impl Cli {
    pub fn run(&self) -> Result<i32> {
        match &self.command {
            Command::Loss(a) => run_loss(a),
            Command::Gradcheck(a) => run_gradcheck(a),
            Command::Simulate(a) => run_simulate(a),
            Command::Reconstruct(a) => run_reconstruct(a),
            Command::TrainFilter(a) => run_train(a),
            Command::AblateKappa(a) => run_ablate(a),
        }
    }
}

fn finite(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("'{s}' is not finite"))
    }
}

fn nonneg_f64(s: &str) -> Result<f64, String> {
    let v = finite(s)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} must be >= 0"))
    }
}

fn positive_f64(s: &str) -> Result<f64, String> {
    let v = finite(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} must be > 0"))
    }
}

fn relaxation(s: &str) -> Result<f64, String> {
    let v = finite(s)?;
    if v > 0.0 && v < 2.0 {
        Ok(v)
    } else {
        Err(format!("{v} must lie in (0, 2)"))
    }
}

fn positive_usize(s: &str) -> Result<usize, String> {
    match s.trim().parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(format!("'{s}' is not a positive integer")),
    }
}

#[derive(Debug, Clone, Copy, Args)]
pub struct LossParams {
    /// Variance patch size.
    #[arg(long = "n", default_value_t = DEFAULT_PATCH_SIZE, value_parser = positive_usize)]
    pub patch_size: usize,
    /// High-pass cutoff in cycles per sample.
    #[arg(long, default_value_t = DEFAULT_KAPPA, value_parser = nonneg_f64)]
    pub kappa: f64,
    /// Weight of the spectral term.
    #[arg(long = "lambda", default_value_t = DEFAULT_LAMBDA, value_parser = nonneg_f64)]
    pub lambda: f64,
}

impl LossParams {
    fn config(&self) -> EagleConfig {
        EagleConfig {
            patch_size: self.patch_size,
            kappa: self.kappa,
            lambda_weight: self.lambda,
        }
    }
}

#[derive(Debug, Args)]
pub struct LossArgs {
    #[arg(long)]
    pub rec: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[command(flatten)]
    pub loss: LossParams,
    /// Evaluate on the largest centred crop divisible by the patch size.
    #[arg(long)]
    pub center_crop: bool,
}

fn breakdown_table(rows: &[LossBreakdown]) -> CsvTable {
    let mut t = CsvTable::new(["total", "mse", "eagle"]);
    for b in rows {
        t.push(vec![format_f64(b.total), format_f64(b.mse_term), format_f64(b.eagle_term)]);
    }
    t
}

fn run_loss(args: &LossArgs) -> Result<i32> {
    let cfg = args.loss.config();
    let (rec, _) = read_image(&args.rec)?;
    let (gt, _) = read_image(&args.gt)?;
    let n = cfg.patch_size;
    if !args.center_crop && (rec.width() % n != 0 || rec.height() % n != 0) {
        return Err(UsageError(format!(
            "{}x{} image is not divisible by --n {n}; pass --center-crop to score the largest divisible crop",
            rec.width(),
            rec.height()
        ))
        .into());
    }
    let breakdown = if args.center_crop {
        on_center_crop(&rec, &gt, &cfg, |a, b, c| {
            Ok((combined_loss(a, b, c)?, Image::zeros(a.width(), a.height())))
        })?
        .0
    } else {
        combined_loss(&rec, &gt, &cfg)?
    };
    breakdown_table(&[breakdown]).write_to(std::io::stdout().lock())?;
    Ok(0)
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 9, value_parser = positive_usize)]
    pub size: usize,
    #[arg(long, default_value_t = 20, value_parser = positive_usize)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Cutoffs to check, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.3", value_parser = nonneg_f64)]
    pub kappas: Vec<f64>,
    #[arg(long = "n", default_value_t = DEFAULT_PATCH_SIZE, value_parser = positive_usize)]
    pub patch_size: usize,
    #[arg(long = "lambda", default_value_t = DEFAULT_LAMBDA, value_parser = nonneg_f64)]
    pub lambda: f64,
    #[arg(long, default_value_t = DEFAULT_STEP, value_parser = positive_f64)]
    pub step: f64,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE, value_parser = positive_f64)]
    pub tolerance: f64,
}

fn run_gradcheck(args: &GradcheckArgs) -> Result<i32> {
    if args.size % args.patch_size != 0 {
        return Err(UsageError(format!(
            "--size {} is not divisible by --n {}",
            args.size, args.patch_size
        ))
        .into());
    }
    let pairs = random_pairs(args.size, args.trials, args.seed);
    let mut table = CsvTable::new(["trial", "objective", "kappa", "max_rel_error", "compared", "passed"]);
    let mut failures = 0;
    for &kappa in &args.kappas {
        let cfg = EagleConfig {
            patch_size: args.patch_size,
            kappa,
            lambda_weight: args.lambda,
        };
        for (trial, (rec, gt)) in pairs.iter().enumerate() {
            for objective in [Objective::Eagle, Objective::Combined] {
                let r = check_gradient(objective, rec, gt, &cfg, args.step, args.tolerance)?;
                if !r.passed {
                    failures += 1;
                }
                table.push(vec![
                    trial.to_string(),
                    objective.to_string(),
                    format_f64(kappa),
                    format_f64(r.max_rel_error),
                    r.compared.to_string(),
                    r.passed.to_string(),
                ]);
            }
        }
    }
    table.write_to(std::io::stdout().lock())?;
    if failures > 0 {
        eprintln!("error: {failures} of {} gradient checks failed", table.rows.len());
        return Ok(1);
    }
    Ok(0)
}

/// `dir/name.ext` becomes `dir/name.gt.ext`.
pub fn default_gt_path(sino: &Path) -> PathBuf {
    let stem = sino.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match sino.extension() {
        Some(ext) => format!("{stem}.gt.{}", ext.to_string_lossy()),
        None => format!("{stem}.gt"),
    };
    sino.with_file_name(name)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

#[derive(Debug, Clone, Copy, Args)]
pub struct NoiseArgs {
    /// Standard deviation of additive Gaussian sinogram noise.
    #[arg(long, default_value_t = 0.0, value_parser = nonneg_f64)]
    pub noise_sigma: f64,
    /// Read --noise-sigma as a fraction of the sinogram maximum.
    #[arg(long)]
    pub noise_relative: bool,
}

impl NoiseArgs {
    fn model(&self) -> NoiseModel {
        NoiseModel {
            sigma: self.noise_sigma,
            relative: self.noise_relative,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = PhantomKind::Shepp)]
    pub phantom: PhantomKind,
    #[arg(long, default_value_t = 128, value_parser = positive_usize)]
    pub size: usize,
    #[arg(long, default_value_t = 180, value_parser = positive_usize)]
    pub angles: usize,
    /// Feature ellipses in a random phantom.
    #[arg(long, default_value_t = 8)]
    pub ellipses: usize,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sinogram output (rows are angles, columns detectors).
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth phantom output; defaults to `<out stem>.gt.<ext>`.
    #[arg(long)]
    pub gt_out: Option<PathBuf>,
}

fn run_simulate(args: &SimulateArgs) -> Result<i32> {
    if args.phantom == PhantomKind::Shepp && args.size < 32 {
        return Err(UsageError(format!("--size {} is below the Shepp-Logan minimum of 32", args.size)).into());
    }
    let geom = Geometry::for_image(args.size, args.angles)?;
    let phantom = make_phantom(args.phantom, args.size, args.ellipses, args.seed)?;
    let sino = simulate(&phantom, &geom, args.noise.model(), args.seed.wrapping_add(1))?;
    write_image(&args.out, &sino.to_image(), &geometry_tag(&geom, args.size))?;
    let gt_path = args.gt_out.clone().unwrap_or_else(|| default_gt_path(&args.out));
    write_image(&gt_path, &phantom, "phantom")?;
    Ok(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Fbp,
    Art,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegArg {
    None,
    Tv,
    Eagle,
}

impl From<RegArg> for RegKind {
    fn from(r: RegArg) -> Self {
        match r {
            RegArg::None => RegKind::None,
            RegArg::Tv => RegKind::Tv,
            RegArg::Eagle => RegKind::Eagle,
        }
    }
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub sino: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Fbp)]
    pub method: Method,
    #[arg(long, value_enum, default_value_t = RegArg::None)]
    pub reg: RegArg,
    /// Regularizer weight; 0 disables the regularizer.
    #[arg(long, default_value_t = 0.0, value_parser = nonneg_f64)]
    pub reg_weight: f64,
    /// Step length of the regularizer gradient step after each sweep.
    #[arg(long, default_value_t = 1.0, value_parser = positive_f64)]
    pub reg_step: f64,
    #[arg(long, default_value_t = 20, value_parser = positive_usize)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 0.25, value_parser = relaxation)]
    pub relaxation: f64,
    /// Clamp negative pixels to zero after each sweep.
    #[arg(long)]
    pub nonneg: bool,
    /// Visit rays in a seeded random order.
    #[arg(long)]
    pub shuffle_seed: Option<u64>,
    /// Skip rays whose chord through the image is shorter than this (pixels).
    #[arg(long, default_value_t = 1.0, value_parser = nonneg_f64)]
    pub min_ray_length: f64,
    /// Output size; defaults to the ground truth or the size in the sinogram header.
    #[arg(long, value_parser = positive_usize)]
    pub size: Option<usize>,
    /// Reference image for the eagle regularizer; FBP of the input when absent.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Ground truth for metrics; defaults to `<sino stem>.gt.<ext>` if it exists.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[command(flatten)]
    pub loss: LossParams,
    #[arg(long)]
    pub out: PathBuf,
    /// Metrics CSV; defaults to `<out stem>.metrics.csv`.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// ART sweep log CSV; defaults to `<out stem>.log.csv`.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Also export an 8-bit PGM, windowed to the ground-truth range when known.
    #[arg(long)]
    pub pgm: Option<PathBuf>,
}

fn read_sinogram(path: &Path) -> Result<(Sinogram, Option<usize>)> {
    let (img, header) = read_image(path)?;
    let (geom, size) = parse_geometry_tag(&header.description).with_context(|| format!("{}", path.display()))?;
    if img.width() != geom.num_detectors() || img.height() != geom.num_angles() {
        bail!(
            "{}: {}x{} payload does not match {} detectors x {} angles",
            path.display(),
            img.width(),
            img.height(),
            geom.num_detectors(),
            geom.num_angles()
        );
    }
    Ok((Sinogram::from_image(geom, &img)?, size))
}

fn run_reconstruct(args: &ReconstructArgs) -> Result<i32> {
    let art_cfg = ArtConfig {
        num_sweeps: args.sweeps,
        relaxation: args.relaxation,
        reg_kind: args.reg.into(),
        reg_weight: args.reg_weight,
        reg_step: args.reg_step,
        eagle: args.loss.config(),
        nonnegativity: args.nonneg,
        shuffle_seed: args.shuffle_seed,
        min_ray_length: args.min_ray_length,
    };
    art_cfg.validate().map_err(|e| UsageError(e.to_string()))?;
    if args.method == Method::Fbp && args.reg != RegArg::None {
        return Err(UsageError("--reg applies to --method art only".into()).into());
    }

    let (sino, tagged_size) = read_sinogram(&args.sino)?;
    let geom = sino.geometry().clone();
    let gt_path = args.gt.clone().or_else(|| {
        let p = default_gt_path(&args.sino);
        p.exists().then_some(p)
    });
    let gt = gt_path.as_deref().map(read_image).transpose()?.map(|(img, _)| img);
    let size = match (args.size, &gt, tagged_size) {
        (Some(s), _, _) => s,
        (None, Some(gt), _) => gt.width(),
        (None, None, Some(s)) => s,
        (None, None, None) => bail!("cannot infer the output size; pass --size"),
    };

    let (image, log) = match args.method {
        Method::Fbp => (fbp_reconstruct(&sino, &geom, size)?, None),
        Method::Art => {
            let reference = if art_cfg.effective_reg() == RegKind::Eagle {
                Some(match &args.reference {
                    Some(p) => read_image(p)?.0,
                    None => fbp_reconstruct(&sino, &geom, size)?,
                })
            } else {
                None
            };
            let result = art_reconstruct(&sino, &geom, &art_cfg, size, reference.as_ref())?;
            (result.image, Some(result.log))
        }
    };

    write_image(&args.out, &image, &format!("reconstruction method={:?} reg={}", args.method, art_cfg.effective_reg()).to_lowercase())?;
    if let Some(log) = log {
        let mut t = CsvTable::new(["sweep", "residual_sq", "regularizer"]);
        for l in &log {
            t.push(vec![l.sweep.to_string(), format_f64(l.residual_sq), format_f64(l.regularizer)]);
        }
        t.write_path(&args.log.clone().unwrap_or_else(|| sibling(&args.out, ".log.csv")))?;
    }

    if let Some(gt) = &gt {
        let report = MetricReport::compute(&image, gt, None)?;
        let circle = psnr_masked(&image, gt, &inscribed_circle_mask(size), report.data_range)?;
        let mut t = CsvTable::new([
            "method", "reg", "reg_weight", "sweeps", "psnr_db", "psnr_circle_db", "ssim", "data_range", "hf_energy",
        ]);
        t.push(vec![
            format!("{:?}", args.method).to_lowercase(),
            art_cfg.effective_reg().to_string(),
            format_f64(args.reg_weight),
            if args.method == Method::Art { args.sweeps.to_string() } else { "0".into() },
            format_f64(report.psnr_db),
            format_f64(circle),
            format_f64(report.ssim),
            format_f64(report.data_range),
            format_f64(high_frequency_fraction(&image)),
        ]);
        t.write_path(&args.metrics.clone().unwrap_or_else(|| sibling(&args.out, ".metrics.csv")))?;
        t.write_to(std::io::stdout().lock())?;
    } else {
        eprintln!("note: no ground truth found, metrics not written");
    }

    if let Some(pgm) = &args.pgm {
        let (lo, hi) = match &gt {
            Some(gt) => (gt.min(), gt.max()),
            None => (image.min(), image.max()),
        };
        export_pgm(pgm, &image, lo, hi)?;
    }
    Ok(0)
}

#[derive(Debug, Clone, Copy, Args)]
pub struct DatasetArgs {
    #[arg(long, default_value_t = 4, value_parser = positive_usize)]
    pub samples: usize,
    #[arg(long, default_value_t = 128, value_parser = positive_usize)]
    pub size: usize,
    #[arg(long, default_value_t = 180, value_parser = positive_usize)]
    pub angles: usize,
    #[arg(long, default_value_t = 8)]
    pub ellipses: usize,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl DatasetArgs {
    fn spec(&self) -> DatasetSpec {
        DatasetSpec {
            samples: self.samples,
            size: self.size,
            angles: self.angles,
            ellipses: self.ellipses,
            noise: self.noise.model(),
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, Args)]
pub struct TrainParams {
    #[arg(long, default_value_t = 100, value_parser = positive_usize)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3, value_parser = nonneg_f64)]
    pub lr: f64,
    /// Update rule; Adam uses decay rates 0.9 and 0.99.
    #[arg(long, value_enum, default_value_t = OptimizerArg::Adam)]
    pub optimizer: OptimizerArg,
    /// Fourier-series coefficients of the filter.
    #[arg(long, default_value_t = eagle_core::tffilter::DEFAULT_NUM_COEFFS, value_parser = positive_usize)]
    pub coeffs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerArg {
    Gd,
    Adam,
}

impl TrainParams {
    fn settings(&self) -> TrainSettings {
        TrainSettings {
            epochs: self.epochs,
            learning_rate: self.lr,
            optimizer: match self.optimizer {
                OptimizerArg::Gd => Optimizer::GradientDescent,
                OptimizerArg::Adam => Optimizer::ADAM,
            },
        }
    }

    fn validate(&self, geom: &Geometry) -> Result<()> {
        let bins = FrequencyGrid::for_geometry(geom).num_bins();
        if self.coeffs > bins {
            return Err(UsageError(format!("--coeffs {} exceeds the {bins} frequency bins", self.coeffs)).into());
        }
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[command(flatten)]
    pub train: TrainParams,
    #[command(flatten)]
    pub loss: LossParams,
    /// Directory for coefficients.csv, loss_log.csv and response.csv.
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn coefficient_table(fc: &FilterCoefficients) -> CsvTable {
    let mut t = CsvTable::new(["index", "coefficient"]);
    for (k, c) in fc.coeffs.iter().enumerate() {
        t.push(vec![k.to_string(), format_f64(*c)]);
    }
    t
}

fn response_table(geom: &Geometry, fc: &FilterCoefficients) -> CsvTable {
    let freqs = FrequencyGrid::for_geometry(geom).frequencies();
    let mut t = CsvTable::new(["frequency", "response"]);
    for (f, h) in freqs.iter().zip(filter_response(fc)) {
        t.push(vec![format_f64(*f), format_f64(h)]);
    }
    t
}

fn prepare_dataset(data: &DatasetArgs, train: &TrainParams, loss: &LossParams) -> Result<FilterTrainer> {
    loss.config().validate().map_err(|e| UsageError(e.to_string()))?;
    let geom = Geometry::for_image(data.size, data.angles)?;
    train.validate(&geom)?;
    if data.size < loss.patch_size {
        return Err(UsageError(format!("--size {} is smaller than --n {}", data.size, loss.patch_size)).into());
    }
    let (geom, dataset) = make_dataset(&data.spec())?;
    Ok(FilterTrainer::new(&dataset, &geom, train.coeffs)?)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn run_train(args: &TrainArgs) -> Result<i32> {
    let trainer = prepare_dataset(&args.data, &args.train, &args.loss)?;
    create_dir(&args.out_dir)?;
    let geom = trainer.geometry().clone();
    let init = ramp_projection(&geom, args.train.coeffs)?;
    let result = trainer.train(&init, &args.loss.config(), &args.train.settings())?;

    coefficient_table(&result.coefficients).write_path(&args.out_dir.join("coefficients.csv"))?;
    response_table(&geom, &result.coefficients).write_path(&args.out_dir.join("response.csv"))?;
    let mut log = CsvTable::new(["epoch", "total", "mse", "eagle", "learning_rate"]);
    for l in &result.log {
        log.push(vec![
            l.epoch.to_string(),
            format_f64(l.total),
            format_f64(l.mse),
            format_f64(l.eagle),
            format_f64(l.learning_rate),
        ]);
    }
    log.write_path(&args.out_dir.join("loss_log.csv"))?;
    let (first, last) = (result.log[0], result.log[result.log.len() - 1]);
    let mut out = std::io::stdout().lock();
    writeln!(out, "initial_total,final_total")?;
    writeln!(out, "{},{}", format_f64(first.total), format_f64(last.total))?;
    Ok(0)
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[command(flatten)]
    pub train: TrainParams,
    /// Cutoffs to compare, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4", value_parser = nonneg_f64)]
    pub kappas: Vec<f64>,
    #[command(flatten)]
    pub loss: LossParams,
    /// Directory for ablation.csv and per-cutoff responses and reconstructions.
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn run_ablate(args: &AblateArgs) -> Result<i32> {
    let trainer = prepare_dataset(&args.data, &args.train, &args.loss)?;
    create_dir(&args.out_dir)?;
    let rows = kappa_ablation(
        &trainer,
        &args.loss.config(),
        &args.kappas,
        &args.train.settings(),
    )?;
    let mut table = CsvTable::new(["kappa", "psnr_db", "ssim", "hf_energy", "total", "mse", "eagle"]);
    let geom = trainer.geometry().clone();
    for (i, row) in rows.iter().enumerate() {
        table.push(vec![
            format_f64(row.kappa),
            format_f64(row.psnr),
            format_f64(row.ssim),
            format_f64(row.high_frequency_energy),
            format_f64(row.final_loss.total),
            format_f64(row.final_loss.mse_term),
            format_f64(row.final_loss.eagle_term),
        ]);
        let tag = format!("kappa_{i}_{}", format_f64(row.kappa));
        response_table(&geom, &row.coefficients).write_path(&args.out_dir.join(format!("response_{tag}.csv")))?;
        let rec = trainer.reconstruct(0, &row.coefficients.coeffs);
        write_image(
            &args.out_dir.join(format!("recon_{tag}.raw")),
            &rec,
            &format!("tf-fbp sample=0 kappa={}", format_f64(row.kappa)),
        )?;
        let range = default_data_range(trainer.ground_truth(0))?;
        let lo = trainer.ground_truth(0).min();
        export_pgm(&args.out_dir.join(format!("recon_{tag}.pgm")), &rec, lo, lo + range)?;
    }
    table.write_path(&args.out_dir.join("ablation.csv"))?;
    table.write_to(std::io::stdout().lock())?;
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ground_truth_sits_next_to_the_sinogram() {
        assert_eq!(default_gt_path(Path::new("runs/x.raw")), PathBuf::from("runs/x.gt.raw"));
        assert_eq!(default_gt_path(Path::new("plain")), PathBuf::from("plain.gt"));
        assert_eq!(sibling(Path::new("out/r.raw"), ".log.csv"), PathBuf::from("out/r.log.csv"));
    }

    #[test]
    fn numeric_parsers_enforce_ranges() {
        assert_eq!(finite(" 2.5 "), Ok(2.5));
        assert!(finite("inf").is_err() && finite("NaN").is_err() && finite("x").is_err());
        assert!(nonneg_f64("0").is_ok() && nonneg_f64("-1e-9").is_err());
        assert!(positive_f64("0").is_err());
        assert!(relaxation("1.99").is_ok() && relaxation("2").is_err() && relaxation("0").is_err());
        assert_eq!(positive_usize("7"), Ok(7));
        assert!(positive_usize("0").is_err() && positive_usize("-3").is_err());
    }

    #[test]
    fn kappa_lists_are_comma_separated() {
        let cli = Cli::try_parse_from(["eagle", "gradcheck", "--kappas", "0.1,0.25"]).unwrap();
        match cli.command {
            Command::Gradcheck(args) => assert_eq!(args.kappas, vec![0.1, 0.25]),
            other => panic!("parsed as {other:?}"),
        }
        assert!(Cli::try_parse_from(["eagle", "gradcheck", "--kappas", "0.1,-2"]).is_err());
    }
}
