use proptest::prelude::*;
use transtest::lackoffit::LofWeights;
use transtest::resampling::{bootstrap_p_value, draw_multipliers, MultiplierLaw, Purpose, StreamSeed};
use transtest::significance::SigWeights;
use transtest::smoothing::Kernel;
use transtest::transforms::{yeo_johnson, yeo_johnson_dy, yeo_johnson_inverse};
use transtest::Matrix;

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn reversed(v: &[f64]) -> Vec<f64> {
    v.iter().rev().copied().collect()
}

fn unit_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, len)
}

fn residuals(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, len)
}

fn lof_case() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
    (5usize..40).prop_flat_map(|n| (unit_vec(n), residuals(n), 0.05f64..0.8))
}

fn sig_case() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (4usize..14).prop_flat_map(|n| (unit_vec(n), unit_vec(n), residuals(n)))
}

proptest! {
    #[test]
    fn yeo_johnson_round_trip(theta in 0.0f64..2.0, y in -20.0f64..20.0) {
        let z = yeo_johnson(theta, y);
        let back = yeo_johnson_inverse(theta, z).unwrap();
        prop_assert!(rel_close(back, y, 1e-9), "{back} vs {y}");
        prop_assert!(yeo_johnson_dy(theta, y) > 0.0);
    }

    #[test]
    fn yeo_johnson_is_increasing(theta in 0.0f64..2.0, a in -10.0f64..10.0, d in 1e-3f64..5.0) {
        prop_assert!(yeo_johnson(theta, a + d) > yeo_johnson(theta, a));
    }

    #[test]
    fn kernel_is_symmetric(u in -2.0f64..2.0) {
        let k = Kernel::epanechnikov(1);
        prop_assert_eq!(k.k1(u), k.k1(-u));
        prop_assert_eq!(k.conv1(u), k.conv1(-u));
    }

    #[test]
    fn lof_statistics_ignore_row_order((x, e, h) in lof_case()) {
        let k = Kernel::epanechnikov(1);
        let w = LofWeights::new(&Matrix::column(x.clone()), h, k);
        let wr = LofWeights::new(&Matrix::column(reversed(&x)), h, k);
        let er = reversed(&e);
        prop_assert!(rel_close(w.t(&e), wr.t(&er), 1e-12));
        prop_assert!(rel_close(w.v(&e), wr.v(&er), 1e-12));
        prop_assert!(rel_close(w.sigma_hat(&e), wr.sigma_hat(&er), 1e-12));
    }

    #[test]
    fn lof_statistics_scale_quadratically((x, e, h) in lof_case(), c in 0.1f64..5.0) {
        let w = LofWeights::new(&Matrix::column(x), h, Kernel::epanechnikov(1));
        let ce: Vec<f64> = e.iter().map(|v| c * v).collect();
        prop_assert!(rel_close(w.t(&ce), c * c * w.t(&e), 1e-12));
        prop_assert!(rel_close(w.v(&ce), c * c * w.v(&e), 1e-12));
        prop_assert!(rel_close(w.sigma_hat(&ce), c.powi(4) * w.sigma_hat(&e), 1e-12));
    }

    #[test]
    fn v_is_invariant_to_global_sign((x, e, h) in lof_case()) {
        let w = LofWeights::new(&Matrix::column(x), h, Kernel::epanechnikov(1));
        let neg: Vec<f64> = e.iter().map(|v| -v).collect();
        prop_assert_eq!(w.v(&e), w.v(&neg));
        prop_assert_eq!(w.t(&e), w.t(&neg));
    }

    #[test]
    fn significance_statistic_ignores_response_shift((w, v, z) in sig_case(), shift in -5.0f64..5.0) {
        let k = Kernel::epanechnikov(1);
        let sw = SigWeights::new(&Matrix::column(w), &Matrix::column(v), 0.4, 0.3, k, k, 0.1);
        let shifted: Vec<f64> = z.iter().map(|x| x + shift).collect();
        let (a, b) = (sw.i_stat(&z), sw.i_stat(&shifted));
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()), "{a} vs {b}");
    }

    #[test]
    fn significance_statistic_scales_quadratically((w, v, z) in sig_case(), c in 0.1f64..5.0) {
        let k = Kernel::epanechnikov(1);
        let sw = SigWeights::new(&Matrix::column(w), &Matrix::column(v), 0.4, 0.3, k, k, 0.1);
        let cz: Vec<f64> = z.iter().map(|x| c * x).collect();
        prop_assert!((sw.i_stat(&cz) - c * c * sw.i_stat(&z)).abs() <= 1e-10 * (1.0 + sw.i_stat(&cz).abs()));
        prop_assert!((sw.tau2(&cz) - c.powi(4) * sw.tau2(&z)).abs() <= 1e-9 * (1.0 + sw.tau2(&cz).abs()));
    }

    #[test]
    fn significance_statistic_ignores_row_order((w, v, z) in sig_case()) {
        let k = Kernel::epanechnikov(1);
        let sw = SigWeights::new(&Matrix::column(w.clone()), &Matrix::column(v.clone()), 0.4, 0.3, k, k, 0.1);
        let sr = SigWeights::new(&Matrix::column(reversed(&w)), &Matrix::column(reversed(&v)), 0.4, 0.3, k, k, 0.1);
        let zr = reversed(&z);
        let (a, b) = (sw.i_stat(&z), sr.i_stat(&zr));
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()), "{a} vs {b}");
        let (a, b) = (sw.i_tilde(&z), sr.i_tilde(&zr));
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()), "{a} vs {b}");
    }

    #[test]
    fn p_value_counts_exceedances(obs in -3.0f64..3.0, reps in prop::collection::vec(-3.0f64..3.0, 1..200)) {
        let exceed = reps.iter().filter(|&&r| r >= obs).count();
        let p = bootstrap_p_value(obs, &reps);
        prop_assert_eq!(p, (1 + exceed) as f64 / (reps.len() + 1) as f64);
        prop_assert!(p > 0.0 && p <= 1.0);
    }

    #[test]
    fn streams_are_reproducible(master in any::<u64>(), index in any::<u64>()) {
        let key = StreamSeed::new(master, index, Purpose::Multiplier);
        let a: Vec<f64> = draw_multipliers(MultiplierLaw::MammenTwoPoint, 16, &mut key.rng());
        let b: Vec<f64> = draw_multipliers(MultiplierLaw::MammenTwoPoint, 16, &mut key.rng());
        prop_assert_eq!(a, b);
        let other = StreamSeed::new(master, index, Purpose::Wild);
        prop_assert_ne!(key.digest(), other.digest());
    }
}
