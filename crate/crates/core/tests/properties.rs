use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use shifted_clt::arith::{big_omega, count_prime_factors_in_range, mobius};
use shifted_clt::batch::{SampleBatch, Stage};
use shifted_clt::characters::{character, character_group, euler_phi, pair_delta};
use shifted_clt::dirichlet_series::{derive_params_with, prime_poly_parts, prime_sum_at, Height, ParamConstants, PrimeBasis};
use shifted_clt::distance_lab::{abb_certificate, cf_empirical, kolmogorov_std_normal};
use shifted_clt::gaussian::det_ratio;
use shifted_clt::shifts_covariance::{build_k, build_k_tilde, check_pd, ShiftConfig};

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 { a } else { gcd(b, a % b) }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mobius_is_multiplicative(m in 1u64..5000, n in 1u64..5000) {
        prop_assume!(gcd(m, n) == 1);
        prop_assert_eq!(mobius(m * n).unwrap(), mobius(m).unwrap() * mobius(n).unwrap());
    }

    #[test]
    fn full_range_counts_omega(n in 1u64..100_000) {
        prop_assert_eq!(count_prime_factors_in_range(n, 0.0, n as f64).unwrap(), big_omega(n).unwrap());
    }

    #[test]
    fn characters_are_orthogonal(q in 1u64..=100, idx in 0u64..100) {
        let phi = euler_phi(q);
        let chi = character(q, idx % phi).unwrap();
        let s: Complex64 = (1..=q as i64).filter(|&r| gcd(r as u64, q) == 1).map(|r| chi.evaluate(r)).sum();
        let want = if chi.is_principal() { phi as f64 } else { 0.0 };
        prop_assert!((s - want).norm() < 1e-9 * phi as f64);
        prop_assert_eq!(pair_delta(&chi, &chi), 1);
    }

    #[test]
    fn character_group_is_closed(q in 1u64..=60, i in 0u64..60, j in 0u64..60) {
        let g = character_group(q).unwrap();
        let (a, b) = (&g[(i as usize) % g.len()], &g[(j as usize) % g.len()]);
        let prod = a.mul(b).unwrap();
        prop_assert!(g.iter().any(|c| *c == prod));
    }

    #[test]
    fn prime_sum_conjugation(q in prop::sample::select(vec![3u64, 4, 5, 7, 8]), idx in 0u64..8, t in 1.0e3f64..1.0e9, sigma in 0.5f64..1.5) {
        let chi = character(q, idx % euler_phi(q)).unwrap();
        let basis = PrimeBasis::new(500).unwrap();
        let h = Height::from_f64(t).unwrap();
        let a = prime_sum_at(&basis, &chi, sigma, &h, 0.0, 500.0).unwrap();
        let b = prime_sum_at(&basis, &chi.conj(), sigma, &h.neg(), 0.0, 500.0).unwrap();
        prop_assert!((a - b.conj()).norm() < 1e-12 * (1.0 + a.norm()));
    }

    #[test]
    fn prime_parts_add_up(t in 1.0e3f64..1.0e12, y in 20.0f64..200.0) {
        let params = derive_params_with(1e5, ParamConstants::default(), Some(y), Some(400.0)).unwrap();
        let chi = character(5, 1).unwrap();
        let basis = PrimeBasis::new(400).unwrap();
        let h = Height::from_f64(t).unwrap();
        let parts = prime_poly_parts(&basis, &chi, params.sigma0, &h, &params).unwrap();
        let full = prime_sum_at(&basis, &chi, params.sigma0, &h, 0.0, 400.0).unwrap();
        prop_assert!((parts[0] + parts[1] + parts[2] - full).norm() < 1e-12);
    }

    #[test]
    fn k_is_translation_invariant(a in prop::collection::vec(-0.3f64..0.3, 3), shift in -10.0f64..10.0) {
        let t = 1e8;
        let chars: Vec<_> = [1u64, 2, 1].iter().map(|&i| character(5, i).unwrap()).collect();
        let s1 = ShiftConfig::new(a.clone(), t, 0.0, 1.0, 0.5).unwrap();
        let s2 = ShiftConfig::new(a.iter().map(|x| x + shift).collect(), t, 0.0, 1.0, 0.5).unwrap();
        let k1 = build_k(&s1, &chars).unwrap().dmatrix();
        let k2 = build_k(&s2, &chars).unwrap().dmatrix();
        prop_assert!((k1 - k2).abs().max() < 1e-9);
    }

    #[test]
    fn k_tilde_entries_are_correlations(a in prop::collection::vec(-2.0f64..2.0, 3), i in 0u64..4, j in 0u64..4) {
        let t = 1e6;
        let params = derive_params_with(t, ParamConstants::default(), Some(300.0), Some(300.0)).unwrap();
        let chars = vec![character(5, i).unwrap(), character(5, j).unwrap(), character(5, 1).unwrap()];
        let sh = ShiftConfig::new(a, t, 0.0, 1.0, 0.5).unwrap();
        let basis = PrimeBasis::new(300).unwrap();
        let kt = build_k_tilde(&basis, &sh, &chars, &params).unwrap();
        for row in &kt.matrix {
            for v in row {
                prop_assert!(v.abs() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn det_ratio_matches_direct(seed in 0u64..10_000, n in 1usize..=4) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let c = &a * a.transpose() + DMatrix::identity(n, n);
        let gamma = c.clone().try_inverse().unwrap().abs().max();
        let e = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let e = (&e + e.transpose()) * (0.1 / ((n * n) as f64 * gamma));
        let r = det_ratio(&c, &e).unwrap();
        let direct = (&c + &e).determinant() / c.determinant();
        prop_assert!((r.value - direct).abs() <= 1e-10 * direct.abs());
    }

    #[test]
    fn pd_methods_agree(seed in 0u64..100_000, n in 1usize..=6, shift in -1.0f64..3.0) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let m = (&a + a.transpose()) * 0.5 + DMatrix::identity(n, n) * shift;
        let r = check_pd(&m).unwrap();
        prop_assert!(r.methods_agree || r.minors.iter().any(|d| d.abs() < 1e-8));
    }

    #[test]
    fn cf_is_bounded(data in prop::collection::vec(-5.0f64..5.0, 2..60), u in prop::collection::vec(-3.0f64..3.0, 2)) {
        let n = data.len() / 2 * 2;
        let b = SampleBatch::new(Stage::QT, 2, data[..n].to_vec(), 0).unwrap();
        prop_assert!(cf_empirical(&b, &u).unwrap().norm() <= 1.0 + 1e-12);
        prop_assert_eq!(cf_empirical(&b, &[0.0, 0.0]).unwrap(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn abb_is_monotone(l in 0.0f64..3.0, m in 0.0f64..3.0, r in 0.1f64..5.0, f in 0.1f64..5.0,
                       cf in 0.0f64..1.0, tm in 0.0f64..1.0, tn in 0.0f64..1.0, bump in 0.0f64..1.0) {
        let base = abb_certificate(l, m, r, f, cf, tm, tn, 2).unwrap();
        prop_assert!(abb_certificate(l, m, r, f, cf + bump, tm, tn, 2).unwrap() >= base);
        prop_assert!(abb_certificate(l, m, r, f, cf, tm + bump, tn, 2).unwrap() >= base);
        prop_assert!(abb_certificate(l, m, r, f, cf, tm, tn + bump, 2).unwrap() >= base);
        prop_assert!(abb_certificate(l, m + bump, r, f, cf, tm, tn, 2).unwrap() >= base);
        // first term shrinks with F
        let a0 = abb_certificate(l, 0.0, r, f, 0.0, 0.0, 0.0, 2).unwrap();
        let a1 = abb_certificate(l, 0.0, r, f + bump, 0.0, 0.0, 0.0, 2).unwrap();
        prop_assert!(a1 <= a0);
    }

    #[test]
    fn ks_ignores_order(mut xs in prop::collection::vec(-4.0f64..4.0, 1..200), seed in any::<u64>()) {
        let before = kolmogorov_std_normal(&xs).unwrap();
        use rand::{seq::SliceRandom, SeedableRng};
        xs.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(kolmogorov_std_normal(&xs).unwrap(), before);
    }
}
