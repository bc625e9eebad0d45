mod common;

use common::rel_err;
use gtwc_core::designer::{
    bisect_eta1, design_sum_error, golden_alpha, no_feedback_design, SearchConfig,
};
use gtwc_core::scheme::power_profile;
use gtwc_core::wsp::{alpha_min, min_wsp_with, WspProblem};
use gtwc_core::ChannelConfig;

fn quick() -> SearchConfig {
    SearchConfig {
        eta2_grid_size: 12,
        ..SearchConfig::default()
    }
}

#[test]
fn golden_section_is_near_the_grid_minimum() {
    let cfg = ChannelConfig::from_snr_db(3.0, 3.0, 4, 1.0).unwrap();
    let search = SearchConfig {
        structured_inits: false,
        n_inits: 4,
        ..SearchConfig::default()
    };
    let (alpha, sol) = golden_alpha(&cfg, &search, 8.0, 8.0, 5).unwrap();
    let a0 = alpha_min(&cfg);
    assert!(alpha >= a0 && alpha < 1.0);
    let mut best = f64::INFINITY;
    for i in 0..50 {
        let a = a0 + (1.0 - 1e-6 - a0) * i as f64 / 49.0;
        let mut prob = WspProblem::new(cfg, 8.0, 8.0, a);
        prob.n_inits = 4;
        best = best.min(min_wsp_with(&prob, &search.wsp, 5).unwrap().max_power());
    }
    assert!(sol.max_power() <= best * 1.02, "{} vs grid {best}", sol.max_power());
}

#[test]
fn golden_section_single_use() {
    let cfg = ChannelConfig::from_snr_db(2.0, 7.0, 1, 1.0).unwrap();
    let (_, sol) = golden_alpha(&cfg, &quick(), 1.5, 2.5, 1).unwrap();
    assert!(rel_err(sol.power1, 1.5 * cfg.sigma1_sq) < 1e-12);
    assert!(rel_err(sol.power2, 2.5 * cfg.sigma2_sq) < 1e-12);
}

#[test]
fn minimal_power_grows_with_eta1() {
    let cfg = ChannelConfig::from_snr_db(1.0, 15.0, 5, 1.0).unwrap();
    let search = quick();
    let mut last = 0.0;
    for i in 1..=10 {
        let eta1 = 2.0 * i as f64;
        let (_, sol) = golden_alpha(&cfg, &search, eta1, 20.0, 2).unwrap();
        let u = sol.max_power();
        assert!(u >= last * (1.0 - 1e-3), "eta1 {eta1}: {u} < {last}");
        last = u;
    }
}

#[test]
fn bisection_root_meets_the_budget() {
    let cfg = ChannelConfig::from_snr_db(1.0, 20.0, 5, 1.0).unwrap();
    let search = quick();
    for eta2 in [50.0, 200.0, 400.0] {
        let b = bisect_eta1(&cfg, &search, eta2, 4).unwrap();
        assert!(!b.saturated);
        let u = b.solution.max_power() - 5.0;
        assert!(u.abs() <= search.bisect_tol * 5.0, "eta2 {eta2}: residual {u}");
    }
}

#[test]
fn strong_reverse_link_drives_user2_errors_out() {
    let cfg = ChannelConfig::from_snr_db(1.0, 40.0, 3, 1.0).unwrap();
    let d = design_sum_error(&cfg, 1, 1, &quick(), 1).unwrap();
    assert!(d.predicted_bler2 < 1e-9);
    assert!(rel_err(d.predicted_sum_bler(), d.predicted_bler1) < 1e-6);
    let nf = no_feedback_design(&cfg, 1, 1, 3.0, 1).unwrap();
    assert!(d.eta1 > nf.eta1);
}

#[test]
fn symmetric_noisy_links_gain_nothing_from_feedback() {
    let cfg = ChannelConfig::from_snr_db(-5.0, -5.0, 3, 1.0).unwrap();
    let d = design_sum_error(&cfg, 1, 1, &quick(), 1).unwrap();
    assert!(rel_err(d.power1, d.eta1 * cfg.sigma1_sq) < 0.02);
    assert!(rel_err(d.power2, d.eta2 * cfg.sigma2_sq) < 0.02);
    let nf = no_feedback_design(&cfg, 1, 1, 3.0, 1).unwrap();
    assert!(
        rel_err(d.predicted_sum_bler(), nf.predicted_sum_bler()) < 0.02,
        "{} vs {} at eta ({}, {})",
        d.predicted_sum_bler(),
        nf.predicted_sum_bler(),
        d.eta1,
        d.eta2
    );
}

#[test]
fn three_use_design_alternates() {
    let cfg = ChannelConfig::from_snr_db(1.0, 20.0, 3, 1.0).unwrap();
    let d = design_sum_error(&cfg, 1, 1, &quick(), 1).unwrap();
    let (e1, e2) = power_profile(&d.scheme, &cfg);
    assert!(e1[1] < 1e-12, "{e1:?}");
    assert!(e2[0] < 1e-12, "{e2:?}");
    assert!(e1[0] > 0.1 && e1[2] > 0.1 && e2[1] > 0.1 && e2[2] > 0.1);
    assert!(d.max_power() <= 3.0 * (1.0 + 1e-3));
}

#[test]
fn feedback_never_loses_to_one_way_scaling() {
    for (s1, s2, n) in [(0.0, 5.0, 3), (1.0, 20.0, 3), (5.0, 12.0, 3), (-2.0, 10.0, 5)] {
        let cfg = ChannelConfig::from_snr_db(s1, s2, n, 1.0).unwrap();
        let d = design_sum_error(&cfg, 1, 1, &quick(), 2).unwrap();
        let nf = no_feedback_design(&cfg, 1, 1, n as f64, 2).unwrap();
        assert!(
            d.predicted_sum_bler() <= nf.predicted_sum_bler() * (1.0 + 1e-9),
            "({s1}, {s2}) dB: {} vs {}",
            d.predicted_sum_bler(),
            nf.predicted_sum_bler()
        );
    }
}
