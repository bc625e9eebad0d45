use gtwc_core::compose::{compose_alternate, has_alternating_support};
use gtwc_core::designer::{design_sum_error, no_feedback_design, SearchConfig};
use gtwc_core::eval::{simulate_alternate, SimOptions};
use gtwc_core::{ChannelConfig, Constellation, DesignSolution, Error};
use std::sync::OnceLock;

/// K=1 design over 5 uses with a 3P budget, shared by the tests below.
fn pair_design() -> &'static DesignSolution {
    static D: OnceLock<DesignSolution> = OnceLock::new();
    D.get_or_init(|| {
        let cfg = ChannelConfig::from_snr_db(1.0, 20.0, 5, 1.0).unwrap();
        let search = SearchConfig {
            budget: Some(3.0),
            eta2_grid_size: 20,
            ..SearchConfig::default()
        };
        design_sum_error(&cfg, 1, 1, &search, 9).unwrap()
    })
}

#[test]
fn composite_fills_every_use() {
    let d = pair_design();
    assert!(has_alternating_support(d));
    let plan = compose_alternate(d, d).unwrap();
    assert_eq!(plan.len(), 6);
    let (e1, e2) = plan.power_profile();
    assert!(e1.iter().all(|&v| v > 1e-6), "{e1:?}");
    assert!(e2.iter().all(|&v| v > 1e-6), "{e2:?}");
    // User 1 alternates a, a′, b, b′, c, c′ between the two pairs.
    for t in 0..3 {
        assert_eq!(plan.x1_slot[0][2 * t], Some(2 * t));
        assert_eq!(plan.x1_slot[1][2 * t], Some(2 * t + 1));
    }
}

#[test]
fn composite_power_is_the_sum_of_pairs() {
    let d = pair_design();
    let plan = compose_alternate(d, d).unwrap();
    let (p1, p2) = plan.total_powers();
    assert!((p1 - 2.0 * d.power1).abs() < 1e-10);
    assert!((p2 - 2.0 * d.power2).abs() < 1e-10);
    assert!((p1.max(p2) - 6.0).abs() < 1e-10);
}

#[test]
fn composite_noiseless_decode_is_exact() {
    let d = pair_design();
    let plan = compose_alternate(d, d).unwrap();
    let c = Constellation::new(1).unwrap();
    let zero = vec![0.0; plan.len()];
    for w in 0..16u32 {
        let lv = |b: u32| c.levels()[(w >> b & 1) as usize];
        let m1 = [lv(0), lv(1)];
        let m2 = [lv(2), lv(3)];
        let tr = plan.run(m1, m2, &zero, &zero).unwrap();
        let (m2_hat, m1_hat) = plan.estimate(&tr, m1, m2);
        for p in 0..2 {
            assert!((m1_hat[p] - m1[p]).abs() < 1e-9);
            assert!((m2_hat[p] - m2[p]).abs() < 1e-9);
        }
    }
    let opts = SimOptions {
        trials: 4000,
        noiseless: true,
        ..SimOptions::default()
    };
    let r = simulate_alternate(&plan, &c, &c, &opts).unwrap();
    assert_eq!(r.block_errors, [0, 0]);
}

#[test]
fn designs_without_alternation_are_refused() {
    let cfg = ChannelConfig::from_snr_db(1.0, 20.0, 5, 1.0).unwrap();
    let mut nf = no_feedback_design(&cfg, 1, 1, 3.0, 0).unwrap();
    // Move User 1's symbol to an even (one-based) use.
    nf.scheme.g1.fill(0.0);
    nf.scheme.g1[1] = 3f64.sqrt();
    assert!(!has_alternating_support(&nf));
    assert!(matches!(compose_alternate(&nf, &nf), Err(Error::CompositionUnsupported(_))));
    let even = no_feedback_design(&cfg.with_n(4), 1, 1, 3.0, 0).unwrap();
    assert!(matches!(compose_alternate(&even, &even), Err(Error::CompositionUnsupported(_))));
}
