use num_complex::Complex64;
use proptest::prelude::*;

use wavekernel::kernels::{k_h, WaveKernelSpec};
use wavekernel::oscint::{filon_cc, Amplitude, QuadConfig};
use wavekernel::potentials::angular_average;
use wavekernel::specfun::{scaled_hankel, scaled_jnu, Sign, SpectralOrder};
use wavekernel::verify::fit_decay;

fn order() -> impl Strategy<Value = SpectralOrder> {
    prop_oneof![Just(4u32), Just(5u32)].prop_map(|n| SpectralOrder::new(n).unwrap())
}

fn bump(c: f64, w: f64) -> impl Fn(f64) -> Complex64 {
    move |x: f64| {
        let u = (x - c) / w;
        if u.abs() >= 1.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new((-1.0 / (1.0 - u * u)).exp(), 0.0)
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hankel_pair_sums_to_twice_bessel(o in order(), z in 0.01f64..500.0) {
        let sum = scaled_hankel(o, z, Sign::Plus).unwrap() + scaled_hankel(o, z, Sign::Minus).unwrap();
        let j = scaled_jnu(o, z).unwrap();
        let scale = j.abs().max(z.powf(o.nu()) * z.powf(-0.5));
        prop_assert!((sum - 2.0 * j).norm() <= 1e-10 * scale, "z={} sum={} j={}", z, sum, j);
    }

    #[test]
    fn filon_is_linear(alpha in -3.0f64..3.0, t in -200.0f64..200.0, c in 0.8f64..1.2) {
        let cfg = QuadConfig::default();
        let g1 = bump(c, 0.5);
        let g2 = |x: f64| Complex64::new(x.cos(), x * x) * bump(1.0, 0.6)(x);
        let both = Amplitude::new(|x| alpha * g1(x) + g2(x), 0.4, 1.6);
        let (lhs, _) = filon_cc(&both, t, &cfg).unwrap();
        let (a, _) = filon_cc(&Amplitude::new(&g1, 0.4, 1.6), t, &cfg).unwrap();
        let (b, _) = filon_cc(&Amplitude::new(&g2, 0.4, 1.6), t, &cfg).unwrap();
        prop_assert!((lhs - (alpha * a + b)).norm() <= 1e-12 * (1.0 + lhs.norm()));
    }

    #[test]
    fn filon_conjugation(t in -1e3f64..1e3, c in 0.8f64..1.2) {
        let cfg = QuadConfig::default();
        let g = bump(c, 0.5);
        let amp = Amplitude::new(&g, 0.2, 1.8);
        let (plus, _) = filon_cc(&amp, t, &cfg).unwrap();
        let (minus, _) = filon_cc(&amp, -t, &cfg).unwrap();
        prop_assert!((minus - plus.conj()).norm() <= 1e-12);
    }

    #[test]
    fn fit_recovers_power_laws(p in -4.0f64..1.0, c in 0.01f64..100.0) {
        let xs: Vec<f64> = (0..30).map(|k| 10.0 * 1.1f64.powi(k)).collect();
        let qs: Vec<f64> = xs.iter().map(|x| c * x.powf(p)).collect();
        let fit = fit_decay(&xs, &qs, false).unwrap();
        prop_assert!((fit.slope - p).abs() <= 1e-6);
        let ql: Vec<f64> = xs.iter().zip(&qs).map(|(x, q)| q * (x + 2.0).ln()).collect();
        let fit = fit_decay(&xs, &ql, true).unwrap();
        prop_assert!((fit.slope - p).abs() <= 1e-6);
    }

    #[test]
    fn free_kernel_is_conjugate_symmetric_in_t(o in order(), sigma in 0.05f64..30.0, t in 0.0f64..100.0) {
        let spec = WaveKernelSpec::new(o, 1.0);
        let a = k_h(&spec, sigma, t).unwrap().value;
        let b = k_h(&spec, sigma, -t).unwrap().value;
        prop_assert!((b - a.conj()).norm() <= 1e-12 * (1.0 + a.norm()), "{} vs {}", a, b);
    }

    #[test]
    fn newton_angular_average(o in order(), r in 0.1f64..10.0, ratio in 0.2f64..5.0) {
        let rho = r * ratio;
        prop_assume!((ratio - 1.0).abs() > 1e-3);
        let p = 2.0 - o.dim_f64();
        let avg = angular_average(o, r, rho, -p, |u| u.powf(p)).unwrap();
        let expect = r.max(rho).powf(p);
        prop_assert!((avg - expect).abs() <= 1e-10 * expect, "{} vs {}", avg, expect);
    }
}
