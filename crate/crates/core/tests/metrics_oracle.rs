use std::f64::consts::PI;

use eagle_core::metrics::{high_frequency_fraction, inscribed_circle_mask, psnr, psnr_masked, ssim, MetricReport};
use eagle_core::Image;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_image(w: usize, h: usize, rng: &mut impl Rng) -> Image {
    Image::from_fn(w, h, |_, _| rng.gen::<f64>())
}

/// Mean over every fully contained 7×7 window, statistics recomputed from
/// scratch per window.
fn brute_ssim(a: &Image, b: &Image, range: f64) -> f64 {
    let (c1, c2) = ((0.01 * range).powi(2), (0.03 * range).powi(2));
    let mut total = 0.0;
    let mut count = 0;
    for top in 0..=a.height() - 7 {
        for left in 0..=a.width() - 7 {
            let xs: Vec<f64> = (0..49).map(|k| a.get(top + k / 7, left + k % 7)).collect();
            let ys: Vec<f64> = (0..49).map(|k| b.get(top + k / 7, left + k % 7)).collect();
            let mx = xs.iter().sum::<f64>() / 49.0;
            let my = ys.iter().sum::<f64>() / 49.0;
            let vx = xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>() / 49.0;
            let vy = ys.iter().map(|y| (y - my).powi(2)).sum::<f64>() / 49.0;
            let cov = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / 49.0;
            total += (2.0 * mx * my + c1) * (2.0 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    total / count as f64
}

#[test]
fn ssim_matches_window_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for (w, h) in [(16, 16), (7, 7), (12, 9), (20, 16)] {
        let a = random_image(w, h, &mut rng);
        let noise = random_image(w, h, &mut rng);
        let b = a.zip_map(&noise, |x, n| 0.7 * x + 0.3 * n);
        for range in [1.0, 2.5] {
            let got = ssim(&a, &b, range).unwrap();
            let want = brute_ssim(&a, &b, range);
            assert!((got - want).abs() <= 1e-10, "{w}x{h}: {got} vs {want}");
        }
    }
}

#[test]
fn psnr_matches_direct_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = random_image(16, 16, &mut rng);
    let b = random_image(16, 16, &mut rng);
    let mse = a.samples().iter().zip(b.samples()).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / 256.0;
    let want = 10.0 * (1.0 / mse).log10();
    assert!((psnr(&a, &b, 1.0).unwrap() - want).abs() <= 1e-10);

    let mask = inscribed_circle_mask(16);
    let (mut sum, mut n) = (0.0, 0);
    for r in 0..16 {
        for c in 0..16 {
            let (y, x) = (r as f64 - 7.5, c as f64 - 7.5);
            let inside = x * x + y * y <= 8.0 * 8.0;
            assert_eq!(mask[r * 16 + c], inside, "({r},{c})");
            if inside {
                sum += (a.get(r, c) - b.get(r, c)).powi(2);
                n += 1;
            }
        }
    }
    let want = 10.0 * (4.0 / (sum / n as f64)).log10();
    assert!((psnr_masked(&a, &b, &mask, 2.0).unwrap() - want).abs() <= 1e-10);
}

#[test]
fn identical_images_score_perfectly() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let a = random_image(16, 16, &mut rng);
    let report = MetricReport::compute(&a, &a, None).unwrap();
    assert_eq!(report.psnr_db, f64::INFINITY);
    assert_eq!(report.ssim, 1.0);
}

#[test]
fn high_frequency_fraction_matches_naive_dft() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for (w, h) in [(8, 8), (9, 6)] {
        let img = random_image(w, h, &mut rng);
        let (mut high, mut total) = (0.0, 0.0);
        for u in 0..h {
            for v in 0..w {
                let (mut re, mut im) = (0.0, 0.0);
                for r in 0..h {
                    for c in 0..w {
                        let p = -2.0 * PI * ((u * r) as f64 / h as f64 + (v * c) as f64 / w as f64);
                        re += img.get(r, c) * p.cos();
                        im += img.get(r, c) * p.sin();
                    }
                }
                let f = |k: usize, n: usize| {
                    if 2 * k < n { k as f64 / n as f64 } else { (k as f64 - n as f64) / n as f64 }
                };
                let e = re * re + im * im;
                total += e;
                if f(u, h).hypot(f(v, w)) > 0.25 {
                    high += e;
                }
            }
        }
        let got = high_frequency_fraction(&img);
        assert!((got - high / total).abs() <= 1e-10, "{got} vs {}", high / total);
    }
}
