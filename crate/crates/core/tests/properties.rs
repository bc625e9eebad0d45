mod common;

use common::*;
use gtwc_core::channel::run_exchange;
use gtwc_core::pam::{bler_theory, demodulate, modulate, unpack_bits};
use gtwc_core::scheme::{
    compute_q2, lambda_min_b, plain_to_tilde, power_profile, powers, snr, tilde_to_plain, TILDE_EPS,
};
use gtwc_core::wsp::alpha_min;
use gtwc_core::{ChannelConfig, Constellation, DesignSolution, LinearScheme};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::Rng;

fn scheme_from_seed(seed: u64, n: usize, restricted: bool) -> (LinearScheme, ChannelConfig) {
    let mut r = rng(seed);
    let s = if restricted { random_restricted(&mut r, n) } else { random_scheme(&mut r, n) };
    (s, random_cfg(&mut r, n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pam_round_trip(k in 1usize..=6, w in any::<u32>()) {
        let c = Constellation::new(k).unwrap();
        let bits = unpack_bits(w % (1 << k), k);
        let level = modulate(&bits, &c).unwrap();
        prop_assert_eq!(demodulate(level, &c).unwrap(), bits);
    }

    #[test]
    fn bler_decreases_with_snr(k in 1usize..=6, a in 0.0f64..50.0, d in 0.01f64..10.0) {
        prop_assert!(bler_theory(k, a + d) < bler_theory(k, a));
    }

    #[test]
    fn plain_tilde_round_trip(seed in any::<u64>(), n in 1usize..=8) {
        let (s, _) = scheme_from_seed(seed, n, false);
        let back = tilde_to_plain(&plain_to_tilde(&s, TILDE_EPS).unwrap());
        prop_assert!((&back.g1 - &s.g1).amax() < 1e-9);
        prop_assert!((&back.g2 - &s.g2).amax() < 1e-9);
        prop_assert!((&back.f1 - &s.f1).amax() < 1e-9);
        prop_assert!((&back.f2 - &s.f2).amax() < 1e-9);
    }

    #[test]
    fn exchange_is_causal(seed in any::<u64>(), n in 2usize..=8, k in 0usize..8) {
        let k = k % n;
        let (s, cfg) = scheme_from_seed(seed, n, false);
        let (n1, n2) = gtwc_core::channel::draw_noise(&cfg, seed);
        let base = run_exchange(&s, 0.5, -0.5, &n1, &n2).unwrap();
        let (mut a, mut b) = (n1.clone(), n2.clone());
        for j in k..n {
            a[j] = 1e3;
            b[j] = -1e3;
        }
        let t = run_exchange(&s, 0.5, -0.5, &a, &b).unwrap();
        prop_assert_eq!(&t.x1[..=k], &base.x1[..=k]);
        prop_assert_eq!(&t.x2[..=k], &base.x2[..=k]);
    }

    #[test]
    fn profile_adds_up_to_powers(seed in any::<u64>(), n in 1usize..=8) {
        let (s, cfg) = scheme_from_seed(seed, n, false);
        let (e1, e2) = power_profile(&s, &cfg);
        let (p1, p2) = powers(&s, &cfg);
        prop_assert!((e1.iter().sum::<f64>() - p1).abs() < 1e-10 * p1.max(1.0));
        prop_assert!((e2.iter().sum::<f64>() - p2).abs() < 1e-10 * p2.max(1.0));
        prop_assert!(e1.iter().chain(e2.iter()).all(|&v| v >= 0.0));
    }

    #[test]
    fn eigenvalue_upper_bound(seed in any::<u64>(), n in 2usize..=8, t in 0.0f64..1.0) {
        let (s, cfg) = scheme_from_seed(seed, n, true);
        let alpha = t * 0.999;
        let l = lambda_min_b(&s, &cfg, alpha);
        prop_assert!(l >= -1e-12);
        prop_assert!(l <= (1.0 - alpha) * cfg.sigma2_sq * (1.0 + 1e-12));
    }

    #[test]
    fn eigenvalue_exact_at_three_uses(seed in any::<u64>(), t in 0.0f64..1.0) {
        let (s, cfg) = scheme_from_seed(seed, 3, true);
        let alpha = t * 0.999;
        let l = lambda_min_b(&s, &cfg, alpha);
        prop_assert!((l - (1.0 - alpha) * cfg.sigma2_sq).abs() < 1e-9);
    }

    #[test]
    fn last_use_message_is_cheapest(seed in any::<u64>(), n in 2usize..=7, t in 0.0f64..1.0) {
        let (mut s, cfg) = scheme_from_seed(seed, n, true);
        let a0 = alpha_min(&cfg);
        let alpha = a0 + t * (1.0 - a0) * 0.999;
        let eta2 = 4.0;
        s.g2 = DVector::zeros(n);
        s.g2[n - 1] = (eta2 * cfg.sigma2_sq).sqrt();
        prop_assert!((snr(&s, &cfg, 2) - eta2).abs() < 1e-9 * eta2);
        let weighted = |s: &LinearScheme| {
            let (p1, p2) = powers(s, &cfg);
            alpha * p1 + (1.0 - alpha) * p2
        };
        let base = weighted(&s);
        let q2s = gtwc_core::linalg::sym_sqrt(&compute_q2(&s, &cfg));
        let mut r = rng(seed ^ 0x9e37);
        for _ in 0..50 {
            let q = random_vector(&mut r, n, 1.0);
            let q = &q * (eta2.sqrt() / q.norm());
            let mut alt = s.clone();
            alt.g2 = &q2s * q;
            prop_assert!(weighted(&alt) >= base * (1.0 - 1e-9));
        }
    }

    #[test]
    fn design_json_round_trip(seed in any::<u64>(), n in 1usize..=6, k1 in 1usize..=3, k2 in 1usize..=3) {
        let (s, cfg) = scheme_from_seed(seed, n, seed % 2 == 0);
        let mut r = rng(seed);
        let (eta1, eta2) = (snr(&s, &cfg, 1), snr(&s, &cfg, 2));
        let alpha = r.random_range(0.0..1.0);
        let d = DesignSolution::from_scheme(cfg, k1, k2, s, eta1, eta2, alpha, n as f64, seed).unwrap();
        let back = DesignSolution::from_json(&d.to_json().unwrap()).unwrap();
        prop_assert_eq!(&back.scheme, &d.scheme);
        prop_assert_eq!(back.scheme.is_restricted(), d.scheme.is_restricted());
        prop_assert_eq!(back.eta1, d.eta1);
        prop_assert_eq!(back.eta2, d.eta2);
        prop_assert_eq!(back.alpha, d.alpha);
        prop_assert_eq!(back.cfg, d.cfg);
        prop_assert_eq!(back.seed, d.seed);
        prop_assert_eq!(&back.combiners, &d.combiners);
    }
}
