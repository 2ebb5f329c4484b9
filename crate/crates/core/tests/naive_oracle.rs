//! The loss pipeline checked against a from-scratch reference that shares no
//! code with the library: nested-loop convolution, per-block variance, and a
//! double-sum DFT.

use std::f64::consts::PI;

use eagle_core::eagle::eagle_loss;
use eagle_core::image::{convolve_same, unfold_variance, Kernel3};
use eagle_core::spectral::{dft2, gaussian_highpass, magnitude_spectrum};
use eagle_core::{EagleConfig, Image, VarianceMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Grid = Vec<Vec<f64>>;

const KX: [[f64; 3]; 3] = [[-3.0, 0.0, 3.0], [-10.0, 0.0, 10.0], [-3.0, 0.0, 3.0]];

fn transpose3(k: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut t = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = k[j][i];
        }
    }
    t
}

fn mirror(i: i64, n: i64) -> usize {
    let mut i = i;
    while i < 0 || i >= n {
        i = if i < 0 { -i } else { 2 * n - 2 - i };
    }
    i as usize
}

/// out[r][c] = Σ_{dr,dc ∈ {-1,0,1}} k[1+dr][1+dc] · img[r−dr][c−dc].
fn naive_convolve(img: &Grid, k: [[f64; 3]; 3]) -> Grid {
    let (h, w) = (img.len() as i64, img[0].len() as i64);
    let mut out = vec![vec![0.0; w as usize]; h as usize];
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for dr in -1..=1i64 {
                for dc in -1..=1i64 {
                    let v = img[mirror(r - dr, h)][mirror(c - dc, w)];
                    acc += k[(1 + dr) as usize][(1 + dc) as usize] * v;
                }
            }
            out[r as usize][c as usize] = acc;
        }
    }
    out
}

fn naive_variance(g: &Grid, n: usize) -> Grid {
    let (bh, bw) = (g.len() / n, g[0].len() / n);
    let mut out = vec![vec![0.0; bw]; bh];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            let vals: Vec<f64> = (0..n * n).map(|k| g[i * n + k / n][j * n + k % n]).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            *cell = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
        }
    }
    out
}

fn naive_dft_moduli(x: &Grid) -> Grid {
    let (h, w) = (x.len(), x[0].len());
    let mut out = vec![vec![0.0; w]; h];
    for u in 0..h {
        for v in 0..w {
            let (mut re, mut im) = (0.0, 0.0);
            for r in 0..h {
                for c in 0..w {
                    let phase = -2.0 * PI * ((u * r) as f64 / h as f64 + (v * c) as f64 / w as f64);
                    re += x[r][c] * phase.cos();
                    im += x[r][c] * phase.sin();
                }
            }
            out[u][v] = (re * re + im * im).sqrt();
        }
    }
    out
}

fn signed_frequency(k: usize, len: usize) -> f64 {
    if (k as f64) < len as f64 / 2.0 {
        k as f64 / len as f64
    } else {
        (k as f64 - len as f64) / len as f64
    }
}

fn naive_weight(u: usize, v: usize, h: usize, w: usize, kappa: f64) -> f64 {
    let (fy, fx) = (signed_frequency(u, h), signed_frequency(v, w));
    let d = (fx * fx + fy * fy).sqrt() - kappa;
    1.0 - (-d * d / 2.0).exp()
}

fn naive_eagle(rec: &Grid, gt: &Grid, n: usize, kappa: f64) -> f64 {
    let mut total = 0.0;
    for k in [KX, transpose3(KX)] {
        let ma = naive_dft_moduli(&naive_variance(&naive_convolve(rec, k), n));
        let mb = naive_dft_moduli(&naive_variance(&naive_convolve(gt, k), n));
        let (h, w) = (ma.len(), ma[0].len());
        let mut sum = 0.0;
        for u in 0..h {
            for v in 0..w {
                let wt = naive_weight(u, v, h, w, kappa);
                sum += (wt * ma[u][v] - wt * mb[u][v]).abs();
            }
        }
        total += sum / (h * w) as f64;
    }
    total
}

fn random_grid(h: usize, w: usize, rng: &mut impl Rng) -> Grid {
    (0..h).map(|_| (0..w).map(|_| rng.gen::<f64>()).collect()).collect()
}

fn to_image(g: &Grid) -> Image {
    Image::from_fn(g[0].len(), g.len(), |r, c| g[r][c])
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn eagle_loss_matches_naive_pipeline_on_12x12_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..12 {
        let kappa = [0.0, 0.1, 0.3, 0.5][case % 4];
        let rec = random_grid(12, 12, &mut rng);
        let gt = random_grid(12, 12, &mut rng);
        let cfg = EagleConfig::default().with_kappa(kappa);
        let got = eagle_loss(&to_image(&rec), &to_image(&gt), &cfg).unwrap();
        let want = naive_eagle(&rec, &gt, 3, kappa);
        assert!(rel(got, want) < 1e-10, "case {case}: {got} vs {want}");
    }
}

#[test]
fn non_square_and_larger_patches_match_naive_pipeline() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (w, h, n) in [(12, 8, 4), (6, 9, 3), (10, 10, 5), (8, 4, 2)] {
        let rec = random_grid(h, w, &mut rng);
        let gt = random_grid(h, w, &mut rng);
        let cfg = EagleConfig {
            patch_size: n,
            kappa: 0.3,
            lambda_weight: 1e-3,
        };
        let got = eagle_loss(&to_image(&rec), &to_image(&gt), &cfg).unwrap();
        let want = naive_eagle(&rec, &gt, n, 0.3);
        assert!(rel(got, want) < 1e-10, "{w}x{h} n={n}: {got} vs {want}");
    }
}

#[test]
fn convolution_and_variance_match_nested_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for (w, h) in [(3, 3), (5, 7), (12, 12), (9, 6)] {
        let g = random_grid(h, w, &mut rng);
        let img = to_image(&g);
        for k in [KX, transpose3(KX)] {
            let got = convolve_same(&img, &Kernel3::new(k).unwrap()).unwrap();
            let want = naive_convolve(&g, k);
            for r in 0..h {
                for c in 0..w {
                    let (a, b) = (got.get(r, c), want[r][c]);
                    assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "({r},{c}) {a} vs {b}");
                }
            }
        }
        if w % 3 == 0 && h % 3 == 0 {
            let got = unfold_variance(&img, 3).unwrap();
            let want = naive_variance(&g, 3);
            for (i, row) in want.iter().enumerate() {
                for (j, &b) in row.iter().enumerate() {
                    let a = got.get(i, j);
                    assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "block ({i},{j}) {a} vs {b}");
                }
            }
        }
    }
}

#[test]
fn weighted_magnitude_matches_naive_dft() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for (w, h) in [(4, 4), (5, 3), (7, 6)] {
        let g = random_grid(h, w, &mut rng);
        let map = VarianceMap::new(w, h, g.iter().flatten().copied().collect()).unwrap();
        let weights = gaussian_highpass(w, h, 0.3).unwrap();
        let got = magnitude_spectrum(&map, &weights).unwrap();
        let moduli = naive_dft_moduli(&g);
        for u in 0..h {
            for v in 0..w {
                let want = naive_weight(u, v, h, w, 0.3) * moduli[u][v];
                let a = got.values()[u * w + v];
                assert!((a - want).abs() <= 1e-10 * want.max(1.0), "({u},{v}) {a} vs {want}");
            }
        }
        let spec = dft2(&map);
        let sum: f64 = g.iter().flatten().sum();
        assert!((spec.get(0, 0).re - sum).abs() <= 1e-9 * sum);
    }
}
