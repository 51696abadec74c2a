use proptest::prelude::*;
use retrieval_core::cli::{sweep_rows, Count, SweepConfig};
use retrieval_core::cubature::haar_sample;
use retrieval_core::moments::{cross_moment, trace_moment};
use retrieval_core::rng::stream;
use retrieval_core::Spectrum;

mod common;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Trials are keyed by (seed, d, k, trial) alone, so a row does not depend on which
    /// other measurement counts share the sweep.
    #[test]
    fn sweep_rows_do_not_depend_on_the_rest_of_the_grid(
        seed in any::<u64>(),
        n in 3usize..20,
        extra in 3usize..20,
    ) {
        let base = SweepConfig {
            d_list: vec![3],
            k_list: vec![1],
            n_list: vec![Count::Fixed(n)],
            trials: 2,
            seed,
            ..SweepConfig::default()
        };
        let alone = sweep_rows(&base).unwrap();
        let wide = SweepConfig { n_list: vec![Count::Fixed(extra), Count::Fixed(n)], ..base };
        let together: Vec<_> = sweep_rows(&wide).unwrap().into_iter().filter(|r| r.n == n).collect();
        prop_assert_eq!(alone, together);
    }

    /// The first trace moment is `s_1 tr(X) / d` for every spectrum, and Haar draws keep
    /// the spectrum.
    #[test]
    fn first_moment_and_orbit_membership(seed in any::<u64>(), d in 2usize..9) {
        let mut rng = stream(seed);
        let l = common::random_spectrum(d, &mut rng);
        let x = common::random_sym(d, &mut rng);
        let s1: f64 = l.values().iter().sum();
        let m1 = trace_moment(&l, 1, &x).unwrap();
        prop_assert!((m1 - s1 * x.trace() / d as f64).abs() < 1e-12 * x.frobenius_norm().max(1.0));
        prop_assert!((cross_moment(&l, std::slice::from_ref(&x)).unwrap() - m1).abs() < 1e-12 * m1.abs().max(1.0));
        let p = haar_sample(&l, &mut rng);
        let mut ev = retrieval_core::symcore::spectral_decompose(&p).unwrap().values;
        ev.sort_by(|a, b| b.total_cmp(a));
        let back = Spectrum::new(ev.iter().map(|v| v.clamp(0.0, 1.0)).collect()).unwrap();
        for (a, b) in back.values().iter().zip(l.values()) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }
}
