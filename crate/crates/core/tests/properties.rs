//! Property tests of structural invariants.

use kesten_evt::extremal::{self, BlockScheme};
use kesten_evt::linrw;
use kesten_evt::model::{ALaw, AffineLaw, AffineLawSpec, BLaw};
use kesten_evt::recursion;
use kesten_evt::spectral;
use kesten_evt::stats;
use kesten_evt::RngStream;
use proptest::prelude::*;
use rand::Rng;

fn two_point(a1: f64, a2: f64, p: f64) -> AffineLaw {
    AffineLaw::new(AffineLawSpec::two_point(a1, a2, p)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn isotonic_fit_is_monotone_and_mass_preserving(y in prop::collection::vec(-10.0f64..10.0, 1..40)) {
        let f = stats::isotonic_nonincreasing(&y);
        prop_assert_eq!(f.len(), y.len());
        prop_assert!(f.windows(2).all(|w| w[0] >= w[1] - 1e-12));
        let (sy, sf): (f64, f64) = (y.iter().sum(), f.iter().sum());
        prop_assert!((sy - sf).abs() < 1e-9);
        let again = stats::isotonic_nonincreasing(&f);
        prop_assert!(again.iter().zip(&f).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn two_sample_ks_is_a_symmetric_distance(
        a in prop::collection::vec(-5.0f64..5.0, 1..60),
        b in prop::collection::vec(-5.0f64..5.0, 1..60),
    ) {
        let d = stats::ks_two_sample(&a, &b);
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert!((d - stats::ks_two_sample(&b, &a)).abs() < 1e-12);
        prop_assert_eq!(stats::ks_two_sample(&a, &a), 0.0);
    }

    #[test]
    fn quantiles_are_monotone(x in prop::collection::vec(-1e3f64..1e3, 1..80), p in 0.0f64..1.0, q in 0.0f64..1.0) {
        let s = stats::sorted(&x);
        let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
        prop_assert!(stats::quantile_sorted(&s, lo) <= stats::quantile_sorted(&s, hi));
    }

    #[test]
    fn streams_are_reproducible_and_separated(seed in any::<u64>(), id in 0u64..1000) {
        let draw = |s: &RngStream| -> Vec<u64> {
            let mut g = s.generator();
            (0..8).map(|_| g.random()).collect()
        };
        let s = RngStream::new(seed, id);
        prop_assert_eq!(draw(&s), draw(&RngStream::new(seed, id)));
        prop_assert_ne!(draw(&s), draw(&s.substream(1)));
        prop_assert_ne!(draw(&s.fork("a")), draw(&s.fork("b")));
    }

    #[test]
    fn log_moment_curve_is_convex(a1 in 1.1f64..5.0, a2 in 0.05f64..0.95, p in 0.05f64..0.95) {
        let law = two_point(a1, a2, p);
        let f = |s: f64| linrw::exact_log_k(&law, s).unwrap();
        prop_assert!(f(0.0).abs() < 1e-14);
        for i in 1..20 {
            let s = 0.2 * i as f64;
            prop_assert!(f(s) <= 0.5 * (f(s - 0.2) + f(s + 0.2)) + 1e-12);
        }
    }

    #[test]
    fn recursion_is_equivariant_under_scaling(t in 0.01f64..100.0, x0 in 0.0f64..10.0, seed in any::<u64>()) {
        let spec = AffineLawSpec::scalar(
            ALaw::ScalarLognormal { mu_log: -0.5, sigma_log: 1.0 },
            BLaw::Constant(vec![1.0]),
        );
        let base = AffineLaw::new(spec.clone()).unwrap();
        let scaled = AffineLaw::new(spec.with_b_scaled(t)).unwrap();
        let rng = RngStream::new(seed, 0);
        let p = recursion::simulate_path(&base, &[x0], 200, &rng).unwrap();
        let q = recursion::simulate_path(&scaled, &[t * x0], 200, &rng).unwrap();
        for k in 1..=200 {
            let (a, b) = (p.point(k)[0], q.point(k)[0]);
            prop_assert!(a > 0.0);
            prop_assert!((b - t * a).abs() <= 1e-9 * b.abs().max(1.0));
        }
    }

    #[test]
    fn grid_operator_rows_are_stochastic(b in 0.05f64..0.95, n in 16usize..400) {
        let spec = AffineLawSpec::scalar(
            ALaw::FiniteSupport(vec![(vec![vec![0.5]], 1.0)]),
            BLaw::FiniteSupport(vec![(vec![0.0], b), (vec![0.5], 1.0 - b)]),
        );
        let op = spectral::build_grid_operator(&AffineLaw::new(spec).unwrap(), n, (0.0, 1.0)).unwrap();
        for i in 0..n {
            let row: Vec<(usize, f64)> = op.row(i).collect();
            prop_assert!(row.iter().all(|&(j, w)| j < n && w >= 0.0));
            prop_assert!((row.iter().map(|r| r.1).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sparse_blocks_fit_the_path(n in 1_000usize..10_000_000, expected in 10.0f64..1e4) {
        if let Ok(s) = BlockScheme::sparse(n, expected) {
            prop_assert!(s.r_n >= 1 && s.k_n >= 1);
            prop_assert!(s.r_n * s.k_n <= n);
        }
    }

    #[test]
    fn runs_estimate_is_a_fraction(x in prop::collection::vec(0.0f64..100.0, 50..400), m in 1usize..10) {
        let u = stats::quantile_sorted(&stats::sorted(&x), 0.9);
        if let Ok(e) = extremal::theta_runs(&x, u, m) {
            prop_assert!(e.value > 0.0 && e.value <= 1.0);
        }
    }
}
