//! Sum-error design: a grid over η₂, a bracketing root search on η₁ and a
//! golden-section search over the weight α.
//!
//! For fixed (η₁, η₂) the max-power min over schemes is approached through the
//! weighted problem of [`crate::wsp`], with α chosen by golden section. The
//! resulting power u(η₁) − budget is increasing in η₁, which the root search
//! relies on. It uses Illinois false position, falling back to the midpoint
//! whenever the interpolated point leaves the bracket. The outer loop walks the η₂ grid from the top down so that each
//! root can seed the next bracket, and stops once User 2's error alone exceeds
//! the best sum found.

use crate::channel::ChannelConfig;
use crate::design::DesignSolution;
use crate::error::{Error, Result};
use crate::pam::bler_theory;
use crate::scheme::{powers, LinearScheme};
use crate::wsp::{alpha_min, min_wsp_with, WspOptions, WspProblem, WspSolution};
use serde::{Deserialize, Serialize};
use std::cell::{Cell, RefCell};

/// Upper end of the α search interval.
pub const ALPHA_MAX: f64 = 1.0 - 1e-6;

/// Which per-user error the design minimizes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorMetric {
    #[default]
    Bler,
    /// BLER/K, the high-SNR bit error rate under Gray labelling.
    Ber,
}

impl ErrorMetric {
    pub fn error(self, k: usize, eta: f64) -> f64 {
        let b = bler_theory(k, eta);
        match self {
            ErrorMetric::Bler => b,
            ErrorMetric::Ber => b / k as f64,
        }
    }
}

/// Search ranges and tolerances for [`design_sum_error`].
#[derive(Clone, Debug)]
pub struct SearchConfig {
    pub eta2_grid_size: usize,
    /// Relative tolerance on the power residual.
    pub bisect_tol: f64,
    /// Final bracket width on α.
    pub golden_tol: f64,
    pub metric: ErrorMetric,
    /// Per-user energy over the block; N·P when `None`.
    pub budget: Option<f64>,
    /// Random F₂ starts per weighted-power solve.
    pub n_inits: usize,
    /// Also start from the alternating F₂ pattern and from the previous solve.
    pub structured_inits: bool,
    pub wsp: WspOptions,
}

impl Default for SearchConfig {
    fn default() -> Self {
        let mut wsp = WspOptions::default();
        wsp.fp.restarts = 3;
        Self {
            eta2_grid_size: 40,
            bisect_tol: 1e-3,
            golden_tol: 1e-3,
            metric: ErrorMetric::Bler,
            budget: None,
            n_inits: 2,
            structured_inits: true,
            wsp,
        }
    }
}

impl SearchConfig {
    pub fn budget(&self, cfg: &ChannelConfig) -> f64 {
        self.budget.unwrap_or(cfg.n as f64 * cfg.p)
    }

    pub fn eta2_max(&self, cfg: &ChannelConfig) -> f64 {
        self.budget(cfg) / cfg.sigma2_sq
    }

    pub fn eta1_max(&self, cfg: &ChannelConfig) -> f64 {
        2.0 * self.budget(cfg) * (cfg.sigma1_sq + cfg.sigma2_sq) / cfg.sigma2_sq
    }

    /// Log-spaced grid over (10⁻³·η₂max, η₂max], ascending.
    pub fn eta2_grid(&self, cfg: &ChannelConfig) -> Vec<f64> {
        let g = self.eta2_grid_size;
        let top = self.eta2_max(cfg);
        (1..=g)
            .map(|j| top * 1e-3f64.powf((g - j) as f64 / g as f64))
            .collect()
    }

    pub fn validate(&self, cfg: &ChannelConfig) -> Result<()> {
        cfg.validate()?;
        if self.eta2_grid_size < 2 {
            return Err(Error::InvalidArgument("eta2 grid needs at least 2 points".into()));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.bisect_tol) || !positive(self.golden_tol) || !positive(self.budget(cfg)) {
            return Err(Error::InvalidArgument(
                "tolerances and budget must be positive".into(),
            ));
        }
        if self.n_inits == 0 && !self.structured_inits {
            return Err(Error::InvalidArgument("no initializations requested".into()));
        }
        Ok(())
    }
}

/// Result of [`bisect_eta1`].
#[derive(Clone, Debug)]
pub struct Bisection {
    pub eta1: f64,
    pub solution: WspSolution,
    /// The budget is not reached even at η₁max.
    pub saturated: bool,
}

/// Outcome of [`design_sum_error_report`].
#[derive(Clone, Debug)]
pub struct SearchReport {
    pub design: DesignSolution,
    pub saturated: bool,
    /// η₂ grid points that went through the bisection.
    pub grid_points: usize,
    pub wsp_calls: usize,
}

/// F₂ start with every other feedback coefficient active, f₂,₂ first.
pub fn alternating_f2(n: usize) -> Vec<f64> {
    (0..n.saturating_sub(2))
        .map(|k| if k % 2 == 0 { 0.5 } else { 0.0 })
        .collect()
}

/// Shared state across the nested searches; the last F₂ seeds the next solve.
struct Engine<'a> {
    cfg: &'a ChannelConfig,
    search: &'a SearchConfig,
    seed: u64,
    budget: f64,
    warm: RefCell<Option<Vec<f64>>>,
    calls: Cell<usize>,
}

impl<'a> Engine<'a> {
    fn new(cfg: &'a ChannelConfig, search: &'a SearchConfig, seed: u64) -> Self {
        Self {
            cfg,
            search,
            seed,
            budget: search.budget(cfg),
            warm: RefCell::new(None),
            calls: Cell::new(0),
        }
    }

    fn wsp(&self, eta1: f64, eta2: f64, alpha: f64) -> Result<WspSolution> {
        let mut prob = WspProblem::new(*self.cfg, eta1, eta2, alpha);
        prob.n_inits = self.search.n_inits;
        if self.search.structured_inits && self.cfg.n >= 3 {
            prob.extra_inits.push(alternating_f2(self.cfg.n));
            if let Some(w) = self.warm.borrow().as_ref() {
                prob.extra_inits.push(w.clone());
            }
        }
        self.calls.set(self.calls.get() + 1);
        let sol = min_wsp_with(&prob, &self.search.wsp, self.seed)?;
        *self.warm.borrow_mut() = Some(sol.scheme.f2_subdiag());
        Ok(sol)
    }

    fn golden(&self, eta1: f64, eta2: f64) -> Result<(f64, WspSolution)> {
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (alpha_min(self.cfg), ALPHA_MAX);
        let mut best: Option<(f64, WspSolution)> = None;
        let mut eval = |alpha: f64| -> Result<f64> {
            let s = self.wsp(eta1, eta2, alpha)?;
            let v = s.max_power();
            if best.as_ref().is_none_or(|(_, b)| v < b.max_power()) {
                best = Some((alpha, s));
            }
            Ok(v)
        };
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let mut fc = eval(c)?;
        let mut fd = eval(d)?;
        while b - a > self.search.golden_tol {
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = eval(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = eval(d)?;
            }
        }
        Ok(best.expect("golden section evaluates at least twice"))
    }

    /// u(η₁) = minimal max-power − budget, with the solution that attains it.
    fn residual(&self, eta1: f64, eta2: f64) -> Result<(f64, WspSolution)> {
        let (_, s) = self.golden(eta1, eta2)?;
        Ok((s.max_power() - self.budget, s))
    }

    fn bisect(&self, eta2: f64, hint: Option<f64>) -> Result<Bisection> {
        let top = self.search.eta1_max(self.cfg);
        let tol = self.search.bisect_tol * self.budget;
        let done = |eta1: f64, solution: WspSolution| Bisection {
            eta1,
            solution,
            saturated: false,
        };

        let mut lo: Option<(f64, f64, WspSolution)> = None;
        let mut hi: Option<(f64, f64)> = None;
        if let Some(h) = hint.filter(|&h| h > 0.0 && h < top) {
            let (u, s) = self.residual(h, eta2)?;
            if u.abs() <= tol {
                return Ok(done(h, s));
            }
            if u < 0.0 {
                lo = Some((h, u, s));
            } else {
                hi = Some((h, u));
            }
        }
        if lo.is_none() {
            let probe = 1e-9 * top;
            let (u, s) = self.residual(probe, eta2)?;
            if u > tol {
                return Err(Error::Infeasible(format!(
                    "eta2 = {eta2} alone exceeds the power budget"
                )));
            }
            lo = Some((probe, u, s));
        }
        let (mut lo, mut u_lo, mut lo_sol) = lo.expect("set above");
        let (mut hi, mut u_hi) = match hi {
            Some(h) => h,
            None => {
                // Expand upward from a warm lower end, else jump to the top.
                let mut cand = if hint.is_some() { (2.0 * lo).min(top) } else { top };
                loop {
                    let (u, s) = self.residual(cand, eta2)?;
                    if u.abs() <= tol {
                        return Ok(done(cand, s));
                    }
                    if u > 0.0 {
                        break (cand, u);
                    }
                    if cand >= top {
                        return Ok(Bisection {
                            eta1: top,
                            solution: s,
                            saturated: true,
                        });
                    }
                    (lo, u_lo, lo_sol) = (cand, u, s);
                    cand = (2.0 * cand).min(top);
                }
            }
        };
        // Illinois false position: the bracket always holds the root, and the
        // weight on a stale endpoint is halved so convergence stays superlinear.
        let mut side = 0i8;
        for _ in 0..200 {
            let mut mid = (lo * u_hi - hi * u_lo) / (u_hi - u_lo);
            if !(mid > lo && mid < hi) {
                mid = 0.5 * (lo + hi);
            }
            let (u, s) = self.residual(mid, eta2)?;
            if u.abs() <= tol {
                return Ok(done(mid, s));
            }
            if u > 0.0 {
                (hi, u_hi) = (mid, u);
                if side == 1 {
                    u_lo *= 0.5;
                }
                side = 1;
            } else {
                (lo, u_lo, lo_sol) = (mid, u, s);
                if side == -1 {
                    u_hi *= 0.5;
                }
                side = -1;
            }
            if hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
        Ok(done(lo, lo_sol))
    }
}

/// Golden-section search for the α minimizing max(p₁, p₂) at fixed SNR targets.
pub fn golden_alpha(
    cfg: &ChannelConfig,
    search: &SearchConfig,
    eta1: f64,
    eta2: f64,
    seed: u64,
) -> Result<(f64, WspSolution)> {
    search.validate(cfg)?;
    Engine::new(cfg, search, seed).golden(eta1, eta2)
}

/// Largest η₁ whose minimal max-power meets the budget, for fixed η₂.
pub fn bisect_eta1(cfg: &ChannelConfig, search: &SearchConfig, eta2: f64, seed: u64) -> Result<Bisection> {
    search.validate(cfg)?;
    Engine::new(cfg, search, seed).bisect(eta2, None)
}

/// Scales g₁ so that the larger of the two powers equals `budget`, keeping F
/// fixed. Returns the scaled scheme and the scaled η₁, or `None` if g₁ cannot
/// move the binding power.
pub fn fill_power(
    scheme: &LinearScheme,
    cfg: &ChannelConfig,
    eta1: f64,
    budget: f64,
) -> Option<(LinearScheme, f64)> {
    let (p1, p2) = powers(scheme, cfg);
    let a1 = scheme.g1.norm_squared();
    let a2 = (&scheme.f2 * &scheme.g1).norm_squared();
    let c2 = [(a1, p1 - a1), (a2, p2 - a2)]
        .iter()
        .filter(|(a, _)| *a > 0.0)
        .map(|(a, rest)| (budget - rest) / a)
        .fold(f64::INFINITY, f64::min);
    if !(c2.is_finite() && c2 > 0.0) {
        return None;
    }
    let mut s = scheme.clone();
    s.g1 *= c2.sqrt();
    Some((s, eta1 * c2))
}

/// Runs the full search and returns the design together with search statistics.
pub fn design_sum_error_report(
    cfg: &ChannelConfig,
    k1: usize,
    k2: usize,
    search: &SearchConfig,
    seed: u64,
) -> Result<SearchReport> {
    search.validate(cfg)?;
    let engine = Engine::new(cfg, search, seed);
    let metric = search.metric;
    let grid = search.eta2_grid(cfg);
    let mut best: Option<(f64, Bisection, f64, LinearScheme, f64)> = None;
    let mut hint = None;
    let mut grid_points = 0;
    for &eta2 in grid.iter().rev() {
        let e2 = metric.error(k2, eta2);
        if best.as_ref().is_some_and(|(b, ..)| e2 > *b) {
            break;
        }
        grid_points += 1;
        let b = match engine.bisect(eta2, hint) {
            Ok(b) => b,
            Err(Error::Infeasible(_)) => continue,
            Err(e) => return Err(e),
        };
        hint = Some(b.eta1);
        // Where u(η₁) is flat at zero the root search can stop short of the
        // largest feasible η₁, so each point is scored after filling the budget.
        let (scheme, eta1) = fill_power(&b.solution.scheme, cfg, b.eta1, engine.budget)
            .unwrap_or_else(|| (b.solution.scheme.clone(), b.eta1));
        let total = metric.error(k1, eta1) + e2;
        // Descending order, so `<=` breaks ties toward the lower η₂.
        if best.as_ref().is_none_or(|(v, ..)| total <= *v) {
            best = Some((total, b, eta2, scheme, eta1));
        }
    }
    let (_, b, eta2, scheme, eta1) = best.ok_or_else(|| {
        Error::Infeasible("no eta2 grid point meets the power budget".into())
    })?;
    let budget = engine.budget;
    let design = DesignSolution::from_scheme(*cfg, k1, k2, scheme, eta1, eta2, b.solution.alpha, budget, seed)?;
    Ok(SearchReport {
        design,
        saturated: b.saturated,
        grid_points,
        wsp_calls: engine.calls.get(),
    })
}

/// Minimizes 𝓔₁(η₁) + 𝓔₂(η₂) subject to both users' energies staying within budget.
pub fn design_sum_error(
    cfg: &ChannelConfig,
    k1: usize,
    k2: usize,
    search: &SearchConfig,
    seed: u64,
) -> Result<DesignSolution> {
    Ok(design_sum_error_report(cfg, k1, k2, search, seed)?.design)
}

/// Design without feedback: each user spends its whole budget on one use.
pub fn no_feedback_design(
    cfg: &ChannelConfig,
    k1: usize,
    k2: usize,
    budget: f64,
    seed: u64,
) -> Result<DesignSolution> {
    let n = cfg.n;
    let mut g1 = nalgebra::DVector::zeros(n);
    let mut g2 = nalgebra::DVector::zeros(n);
    g1[0] = budget.sqrt();
    g2[n - 1] = budget.sqrt();
    let zero = nalgebra::DMatrix::zeros(n, n);
    let scheme = LinearScheme::new(g1, g2, zero.clone(), zero)?;
    let (eta1, eta2) = (budget / cfg.sigma1_sq, budget / cfg.sigma2_sq);
    DesignSolution::from_scheme(*cfg, k1, k2, scheme, eta1, eta2, 1.0, budget, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_log_spaced_up_to_the_top() {
        let cfg = ChannelConfig::from_snr_db(1.0, 20.0, 3, 1.0).unwrap();
        let s = SearchConfig::default();
        let g = s.eta2_grid(&cfg);
        assert_eq!(g.len(), 40);
        assert!((g[39] - 3.0 / cfg.sigma2_sq).abs() < 1e-12 * g[39]);
        assert!(g[0] > 1e-3 * g[39]);
        let r = g[1] / g[0];
        assert!(g.windows(2).all(|w| (w[1] / w[0] - r).abs() < 1e-12));
    }

    #[test]
    fn n1_root_is_closed_form() {
        let cfg = ChannelConfig::from_snr_db(3.0, 6.0, 1, 1.0).unwrap();
        let s = SearchConfig::default();
        let eta2 = 0.5 / cfg.sigma2_sq;
        let b = bisect_eta1(&cfg, &s, eta2, 0).unwrap();
        assert!(!b.saturated);
        let root = 1.0 / cfg.sigma1_sq;
        assert!((b.eta1 - root).abs() <= 1e-3 * root * (1.0 + 1e-9));
    }

    #[test]
    fn infeasible_eta2_is_reported() {
        let cfg = ChannelConfig::from_snr_db(3.0, 6.0, 2, 1.0).unwrap();
        let s = SearchConfig::default();
        let eta2 = 3.0 / cfg.sigma2_sq;
        assert!(matches!(bisect_eta1(&cfg, &s, eta2, 0), Err(Error::Infeasible(_))));
    }

    #[test]
    fn power_fill_hits_the_budget() {
        let cfg = ChannelConfig::from_snr_db(1.0, 20.0, 3, 1.0).unwrap();
        let s = SearchConfig::default();
        let d = design_sum_error(&cfg, 1, 1, &s, 3).unwrap();
        assert!((d.max_power() - 3.0).abs() < 1e-10);
        assert!(d.power1.min(d.power2) <= 3.0);
    }

    #[test]
    fn ber_metric_divides_by_bits() {
        let b = ErrorMetric::Bler.error(3, 40.0);
        assert_eq!(ErrorMetric::Ber.error(3, 40.0), b / 3.0);
    }
}
