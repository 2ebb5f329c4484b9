use eagle_core::eagle::{combined_loss, eagle_loss, eagle_loss_gradient};
use eagle_core::image::{scharr_gradients, unfold_variance};
use eagle_core::metrics::{psnr, ssim};
use eagle_core::spectral::{dft2_real, gaussian_highpass, wrapped_frequency};
use eagle_core::tomo::{radon_forward, Geometry};
use eagle_core::{EagleConfig, Image};
use proptest::prelude::*;

fn image(w: usize, h: usize) -> impl Strategy<Value = Image> {
    prop::collection::vec(-1.0f64..1.0, w * h).prop_map(move |v| Image::new(w, h, v).unwrap())
}

fn any_image(max: usize) -> impl Strategy<Value = Image> {
    (1..=max, 1..=max).prop_flat_map(|(w, h)| image(w, h))
}

/// Two same-shape images whose sides are multiples of 3.
fn loss_pair() -> impl Strategy<Value = (Image, Image)> {
    (1usize..=4, 1usize..=4).prop_flat_map(|(bw, bh)| (image(3 * bw, 3 * bh), image(3 * bw, 3 * bh)))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn variance_is_shift_invariant_and_scale_covariant(
        (g, c, s) in (1usize..=4, 1usize..=4).prop_flat_map(|(bw, bh)| (image(3 * bw, 3 * bh), -5.0f64..5.0, -4.0f64..4.0))
    ) {
        let base = unfold_variance(&g, 3).unwrap();
        let shifted = unfold_variance(&g.add_scalar(c), 3).unwrap();
        let scaled = unfold_variance(&g.scale(s), 3).unwrap();
        for ((b, sh), sc) in base.values().iter().zip(shifted.values()).zip(scaled.values()) {
            prop_assert!((b - sh).abs() <= 1e-9 * (1.0 + c * c));
            prop_assert!((sc - s * s * b).abs() <= 1e-12 * (1.0 + s * s));
        }
    }

    #[test]
    fn scharr_pair_is_transpose_symmetric(img in (3usize..=10, 3usize..=10).prop_flat_map(|(w, h)| image(w, h))) {
        let (gx, gy) = scharr_gradients(&img).unwrap();
        let (tx, ty) = scharr_gradients(&img.transpose()).unwrap();
        // Equal up to the order in which the taps are summed.
        for (a, b) in [(tx, gy.transpose()), (ty, gx.transpose())] {
            for (p, q) in a.samples().iter().zip(b.samples()) {
                prop_assert!((p - q).abs() <= 1e-12 * (1.0 + q.abs()));
            }
        }
    }

    #[test]
    fn dft_satisfies_parseval(x in any_image(16)) {
        let spec = dft2_real(x.width(), x.height(), x.samples()).unwrap();
        let energy: f64 = x.samples().iter().map(|v| v * v).sum();
        let spectral: f64 = spec.values().iter().map(|z| z.norm_sqr()).sum::<f64>() / x.len() as f64;
        prop_assert!(close(energy, spectral, 1e-9), "{} vs {}", energy, spectral);
    }

    #[test]
    fn dft_of_real_input_is_conjugate_symmetric(x in any_image(12)) {
        let (w, h) = (x.width(), x.height());
        let spec = dft2_real(w, h, x.samples()).unwrap();
        for u in 0..h {
            for v in 0..w {
                let a = spec.get(u, v);
                let b = spec.get((h - u) % h, (w - v) % w).conj();
                prop_assert!((a - b).norm() <= 1e-9 * (1.0 + a.norm()));
            }
        }
    }

    #[test]
    fn dft_is_linear(
        (x, y) in (1usize..=12, 1usize..=12).prop_flat_map(|(w, h)| (image(w, h), image(w, h))),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let (w, h) = (x.width(), x.height());
        let mut mix = x.scale(a);
        mix.axpy(b, &y);
        let lhs = dft2_real(w, h, mix.samples()).unwrap();
        let fx = dft2_real(w, h, x.samples()).unwrap();
        let fy = dft2_real(w, h, y.samples()).unwrap();
        for ((l, p), q) in lhs.values().iter().zip(fx.values()).zip(fy.values()) {
            let rhs = p * a + q * b;
            prop_assert!((l - rhs).norm() <= 1e-9 * (1.0 + rhs.norm()));
        }
    }

    #[test]
    fn weights_are_monotone_away_from_the_cutoff(w in 1usize..=20, h in 1usize..=20, kappa in 0.0f64..0.7) {
        let weights = gaussian_highpass(w, h, kappa).unwrap();
        let mut bins: Vec<(f64, f64)> = Vec::new();
        for u in 0..h {
            for v in 0..w {
                let (fy, fx) = (wrapped_frequency(u, h), wrapped_frequency(v, w));
                bins.push(((fx * fx + fy * fy).sqrt(), weights.get(u, v)));
            }
        }
        for &(r, wt) in &bins {
            prop_assert!((0.0..1.0).contains(&wt));
            for &(r2, wt2) in &bins {
                if r >= kappa && r2 >= r {
                    prop_assert!(wt2 >= wt - 1e-15);
                }
                if r <= kappa && r2 <= r {
                    prop_assert!(wt2 >= wt - 1e-15);
                }
            }
        }
    }

    #[test]
    fn eagle_loss_is_a_symmetric_dc_blind_seminorm_distance(
        (a, b) in loss_pair(),
        c in -10.0f64..10.0,
        kappa in 0.0f64..0.7,
    ) {
        let cfg = EagleConfig::default().with_kappa(kappa);
        let ab = eagle_loss(&a, &b, &cfg).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(eagle_loss(&a, &a, &cfg).unwrap(), 0.0);
        prop_assert!(close(ab, eagle_loss(&b, &a, &cfg).unwrap(), 1e-12));
        let shifted = eagle_loss(&a.add_scalar(c), &b, &cfg).unwrap();
        prop_assert!((shifted - ab).abs() <= 1e-9 * (1.0 + ab), "{} vs {}", shifted, ab);
    }

    #[test]
    fn eagle_loss_is_homogeneous_of_degree_two((a, b) in loss_pair(), c in prop::sample::select(vec![0.5, 2.0, 10.0, -3.0])) {
        let cfg = EagleConfig::default().with_kappa(0.3);
        let base = eagle_loss(&a, &b, &cfg).unwrap();
        let scaled = eagle_loss(&a.scale(c), &b.scale(c), &cfg).unwrap();
        prop_assert!(close(scaled, c * c * base, 1e-9), "{} vs {}", scaled, c * c * base);
        let g = eagle_loss_gradient(&a, &b, &cfg).unwrap();
        let gs = eagle_loss_gradient(&a.scale(c), &b.scale(c), &cfg).unwrap();
        for (x, y) in g.samples().iter().zip(gs.samples()) {
            prop_assert!((y - c * x).abs() <= 1e-7 * (1.0 + (c * x).abs()));
        }
    }

    #[test]
    fn breakdown_adds_up((a, b) in loss_pair(), lambda in 0.0f64..1.0) {
        let cfg = EagleConfig::default().with_lambda(lambda);
        let l = combined_loss(&a, &b, &cfg).unwrap();
        prop_assert!(close(l.total, l.mse_term + lambda * l.eagle_term, 1e-12));
    }

    #[test]
    fn projection_is_linear(
        (x, y) in (4usize..=12).prop_flat_map(|n| (image(n, n), image(n, n))),
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
        angles in 1usize..=9,
    ) {
        let g = Geometry::for_image(x.width(), angles).unwrap();
        let mut mix = x.scale(a);
        mix.axpy(b, &y);
        let lhs = radon_forward(&mix, &g).unwrap();
        let px = radon_forward(&x, &g).unwrap();
        let py = radon_forward(&y, &g).unwrap();
        for ((l, p), q) in lhs.values().iter().zip(px.values()).zip(py.values()) {
            prop_assert!((l - (a * p + b * q)).abs() <= 1e-9 * (1.0 + l.abs()));
        }
    }

    #[test]
    fn metrics_are_symmetric_and_bounded((a, b) in (7usize..=16, 7usize..=16).prop_flat_map(|(w, h)| (image(w, h), image(w, h)))) {
        let s = ssim(&a, &b, 2.0).unwrap();
        prop_assert!((-1.0..=1.0 + 1e-12).contains(&s));
        prop_assert!((s - ssim(&b, &a, 2.0).unwrap()).abs() <= 1e-12);
        prop_assert!((ssim(&a, &a, 2.0).unwrap() - 1.0).abs() <= 1e-12);
        let p = psnr(&a, &b, 2.0).unwrap();
        prop_assert_eq!(p, psnr(&b, &a, 2.0).unwrap());
        prop_assert_eq!(psnr(&a, &a, 2.0).unwrap(), f64::INFINITY);
    }
}
