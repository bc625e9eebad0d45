//! Weighted sum-power minimization for fixed target SNRs.
//!
//! Minimizes α𝔼‖x₁‖² + (1−α)𝔼‖x₂‖² subject to SNR₁ = η₁ and SNR₂ = η₂ over
//! schemes whose F₂ only feeds back the most recent receive symbol. User 2's
//! message goes on the last use only, g₂ = √η₂σ₂·e_N, and f₂,ₙ = 0. The rest
//! alternates between two sub-problems:
//!
//! 1. with F₂ fixed, pick q₁ (g₁ = Q₁½q₁, so ‖q₁‖² = η₁ fixes SNR₁) and F₁
//!    to minimize 𝔼‖x₁‖². F₁ has a closed form in q₁, which leaves a
//!    sum-of-ratios program over xᵢ = q₁ᵢ² on a scaled simplex;
//! 2. with q₁ and F₁ fixed, sweep the subdiagonal of F₂ with coordinate-wise
//!    stationary updates, treating p = Q₁½q₁ as constant.
//!
//! Indices in comments follow the one-based convention f₂,ᵢ = F₂[i, i−1];
//! the code is zero-based.

use crate::channel::{trial_rng, ChannelConfig};
use crate::design::DesignSolution;
use crate::error::{Error, Result};
use crate::linalg::sym_sqrt;
use crate::scheme::{compute_q1, powers, snr, LinearScheme};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

/// Lowest weight for which User 2's last-use message vector is optimal.
pub fn alpha_min(cfg: &ChannelConfig) -> f64 {
    cfg.sigma2_sq / (cfg.sigma1_sq + cfg.sigma2_sq)
}

/// Input of one weighted sum-power solve.
#[derive(Clone, Debug)]
pub struct WspProblem {
    pub cfg: ChannelConfig,
    pub eta1: f64,
    pub eta2: f64,
    pub alpha: f64,
    /// Stopping tolerance on the objective for both loops.
    pub eps: f64,
    pub n_inits: usize,
    /// Permit α below [`alpha_min`], where the fixed g₂ is no longer guaranteed optimal.
    pub allow_low_alpha: bool,
    /// Extra F₂ starting points (f₂,₂ … f₂,ₙ₋₁), tried after the random ones.
    pub extra_inits: Vec<Vec<f64>>,
}

impl WspProblem {
    pub fn new(cfg: ChannelConfig, eta1: f64, eta2: f64, alpha: f64) -> Self {
        Self {
            cfg,
            eta1,
            eta2,
            alpha,
            eps: 1e-3,
            n_inits: 30,
            allow_low_alpha: false,
            extra_inits: Vec::new(),
        }
    }

    fn validate(&self) -> Result<()> {
        self.cfg.validate()?;
        if !(self.eta1 > 0.0 && self.eta2 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "target SNRs must be positive, got ({}, {})",
                self.eta1, self.eta2
            )));
        }
        if !(self.alpha < 1.0 && self.alpha >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in [0, 1), got {}",
                self.alpha
            )));
        }
        // Small slack so the golden-section bracket endpoint itself is accepted.
        if !self.allow_low_alpha && self.alpha < alpha_min(&self.cfg) * (1.0 - 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "alpha {} is below {} without the override",
                self.alpha,
                alpha_min(&self.cfg)
            )));
        }
        if self.n_inits == 0 {
            return Err(Error::InvalidArgument("n_inits must be positive".into()));
        }
        Ok(())
    }
}

/// Loop caps and inner solver settings.
#[derive(Clone, Debug)]
pub struct WspOptions {
    pub max_outer: usize,
    pub max_inner: usize,
    pub fp: FpOptions,
}

impl Default for WspOptions {
    fn default() -> Self {
        Self {
            max_outer: 200,
            max_inner: 500,
            fp: FpOptions::default(),
        }
    }
}

/// Settings of the multi-start projected-gradient solver.
#[derive(Clone, Debug)]
pub struct FpOptions {
    /// Random interior starts in addition to the vertices and the barycenter.
    pub restarts: usize,
    pub max_iter: usize,
    /// Simplex grid pass for N up to this size.
    pub grid_max_n: usize,
    /// Grid points per unit mass along each axis.
    pub grid_resolution: usize,
    pub seed: u64,
}

impl Default for FpOptions {
    fn default() -> Self {
        Self {
            restarts: 20,
            max_iter: 2000,
            grid_max_n: 4,
            grid_resolution: 40,
            seed: 0x5eed,
        }
    }
}

/// minimize Σᵢ uᵢᵀx / (1 + mᵢᵀx) over x ≥ 0, 1ᵀx = η₁.
#[derive(Clone, Debug, PartialEq)]
pub struct FractionalProgram {
    pub u: Vec<DVector<f64>>,
    pub m: Vec<DVector<f64>>,
    pub eta1: f64,
    /// Diagonal weights aᵢ and the linear row when the program has the
    /// sub-problem-1 shape, which allows O(N) evaluation.
    banded: Option<(Vec<f64>, Vec<f64>)>,
}

impl FractionalProgram {
    /// Generic program Σ uᵢᵀx / (1 + mᵢᵀx) over the simplex of mass η₁.
    pub fn new(u: Vec<DVector<f64>>, m: Vec<DVector<f64>>, eta1: f64) -> Self {
        Self { u, m, eta1, banded: None }
    }

    pub fn dim(&self) -> usize {
        self.u.first().map_or(0, |v| v.len())
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        if let Some((a, lin)) = &self.banded {
            let n = x.len();
            let mut tail = 0.0;
            let mut total = 0.0;
            for i in (0..n).rev() {
                if i < a.len() {
                    total += a[i] * x[i] / (1.0 + tail);
                }
                total += lin[i] * x[i];
                if i + 1 < n {
                    tail += x[i + 1];
                }
            }
            return total;
        }
        self.u
            .iter()
            .zip(&self.m)
            .map(|(u, m)| dot(u, x) / (1.0 + dot(m, x)))
            .sum()
    }

    fn gradient(&self, x: &[f64], g: &mut [f64]) {
        if let Some((a, lin)) = &self.banded {
            let n = x.len();
            // den[i] = 1 + x_{i+2} + … + x_N for the term at zero-based i.
            let mut den = vec![1.0; n];
            let mut tail = 0.0;
            for i in (0..n).rev() {
                den[i] = 1.0 + tail;
                if i + 1 < n {
                    tail += x[i + 1];
                }
            }
            let mut acc = 0.0;
            for j in 0..n {
                if j >= 2 && j - 2 < a.len() {
                    let i = j - 2;
                    acc += a[i] * x[i] / (den[i] * den[i]);
                }
                let own = if j < a.len() { a[j] / den[j] } else { 0.0 };
                g[j] = lin[j] + own - acc;
            }
            return;
        }
        g.iter_mut().for_each(|v| *v = 0.0);
        for (u, m) in self.u.iter().zip(&self.m) {
            let num = dot(u, x);
            let den = 1.0 + dot(m, x);
            let a = 1.0 / den;
            let b = num / (den * den);
            for j in 0..g.len() {
                g[j] += u[j] * a - m[j] * b;
            }
        }
    }
}

fn dot(v: &DVector<f64>, x: &[f64]) -> f64 {
    v.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Builds the program for sub-problem 1 from f₂,₂ … f₂,ₙ₋₁ (f₂,ₙ = 0 implied).
///
/// For i ≤ N−2, uᵢ has the single entry f₂,ᵢ₊₁²σ₁⁴/(f₂,ᵢ₊₁²σ₁²+σ₂²) at
/// position i and mᵢ has ones at positions i+2 … N, matching the denominator
/// 1 + x_{i+2} + … + x_N of the expanded power. u_{N−1} collects the linear
/// terms and m_{N−1} = 0.
pub fn build_fractional_program(f2_diag: &[f64], cfg: &ChannelConfig, eta1: f64) -> FractionalProgram {
    let n = cfg.n;
    debug_assert_eq!(f2_diag.len(), n.saturating_sub(2));
    let (s1, s2) = (cfg.sigma1_sq, cfg.sigma2_sq);
    let mut u = Vec::with_capacity(n);
    let mut m = Vec::with_capacity(n - 1);
    // f2_diag[i] is f₂,ᵢ₊₂, i.e. the coefficient paired with zero-based position i.
    for (i, &f) in f2_diag.iter().enumerate() {
        let mut ui = DVector::zeros(n);
        ui[i] = f * f * s1 * s1 / (f * f * s1 + s2);
        let mut mi = DVector::zeros(n);
        for j in i + 2..n {
            mi[j] = 1.0;
        }
        u.push(ui);
        m.push(mi);
    }
    let mut last = DVector::from_element(n, s1);
    for (i, &f) in f2_diag.iter().enumerate() {
        last[i] = s1 * s2 / (f * f * s1 + s2);
    }
    let a: Vec<f64> = u.iter().enumerate().map(|(i, ui)| ui[i]).collect();
    let lin: Vec<f64> = last.iter().copied().collect();
    u.push(last);
    m.push(DVector::zeros(n));
    FractionalProgram {
        u,
        m,
        eta1,
        banded: Some((a, lin)),
    }
}

/// Euclidean projection onto {x ≥ 0, Σx = mass}.
fn project_simplex(v: &mut [f64], mass: f64) {
    let mut s: Vec<f64> = v.to_vec();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &si) in s.iter().enumerate() {
        cum += si;
        let t = (cum - mass) / (k + 1) as f64;
        if si - t > 0.0 {
            theta = t;
        }
    }
    v.iter_mut().for_each(|x| *x = (*x - theta).max(0.0));
}

/// Spectral projected gradient with a nonmonotone Armijo search, from `x0`.
fn projected_gradient(fp: &FractionalProgram, x0: &[f64], max_iter: usize) -> (Vec<f64>, f64) {
    const MEMORY: usize = 10;
    let n = x0.len();
    let mass = fp.eta1;
    let tol = 1e-12 * mass;
    let mut x = x0.to_vec();
    project_simplex(&mut x, mass);
    let mut fx = fp.objective(&x);
    let mut best = (x.clone(), fx);
    let mut g = vec![0.0; n];
    fp.gradient(&x, &mut g);
    let mut hist = vec![fx];
    let gmax = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut lambda = if gmax > 0.0 { mass / gmax } else { 1.0 };
    let mut d = vec![0.0; n];
    let mut xn = vec![0.0; n];
    let mut gn = vec![0.0; n];
    for _ in 0..max_iter {
        for j in 0..n {
            d[j] = x[j] - lambda * g[j];
        }
        project_simplex(&mut d, mass);
        let mut dmax = 0.0f64;
        for j in 0..n {
            d[j] -= x[j];
            dmax = dmax.max(d[j].abs());
        }
        if dmax <= tol {
            break;
        }
        let gd: f64 = (0..n).map(|j| g[j] * d[j]).sum();
        if gd >= 0.0 {
            break;
        }
        let fref = hist.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut t = 1.0;
        let mut fnew;
        loop {
            for j in 0..n {
                xn[j] = x[j] + t * d[j];
            }
            fnew = fp.objective(&xn);
            if fnew <= fref + 1e-4 * t * gd || t < 1e-12 {
                break;
            }
            t *= 0.5;
        }
        if t < 1e-12 && fnew > fx {
            break;
        }
        fp.gradient(&xn, &mut gn);
        let (mut ss, mut sy) = (0.0, 0.0);
        for j in 0..n {
            let sj = xn[j] - x[j];
            ss += sj * sj;
            sy += sj * (gn[j] - g[j]);
        }
        lambda = if sy > 0.0 {
            (ss / sy).clamp(1e-12 * mass, 1e12 * mass)
        } else {
            1e3 * lambda.max(1e-12 * mass)
        };
        std::mem::swap(&mut x, &mut xn);
        std::mem::swap(&mut g, &mut gn);
        fx = fnew;
        if fx < best.1 {
            best = (x.clone(), fx);
        }
        hist.push(fx);
        if hist.len() > MEMORY {
            hist.remove(0);
        }
    }
    best
}

/// Visits every point of the simplex grid {x = mass·k/r : k ∈ ℕⁿ, Σk = r}.
fn simplex_grid(n: usize, r: usize, mut visit: impl FnMut(&[usize])) {
    fn rec(k: &mut Vec<usize>, pos: usize, left: usize, visit: &mut dyn FnMut(&[usize])) {
        if pos + 1 == k.len() {
            k[pos] = left;
            visit(k);
            return;
        }
        for v in 0..=left {
            k[pos] = v;
            rec(k, pos + 1, left - v, visit);
        }
    }
    let mut k = vec![0; n];
    rec(&mut k, 0, r, &mut visit);
}

/// Best point found by multi-start projected gradient on the scaled simplex.
///
/// Starts are the vertices (in index order, so exact ties favour the lowest
/// index), the barycenter, `warm` if given, and `restarts` uniform random
/// points. For small N the best simplex-grid point is polished as well.
pub fn solve_fractional_program_with(
    fp: &FractionalProgram,
    opts: &FpOptions,
    warm: Option<&[f64]>,
) -> Vec<f64> {
    let n = fp.dim();
    let mass = fp.eta1;
    if n == 1 {
        return vec![mass];
    }
    let mut starts: Vec<Vec<f64>> = Vec::new();
    for i in 0..n {
        let mut v = vec![0.0; n];
        v[i] = mass;
        starts.push(v);
    }
    starts.push(vec![mass / n as f64; n]);
    if let Some(w) = warm {
        let mut v = w.to_vec();
        project_simplex(&mut v, mass);
        starts.push(v);
    }
    let mut rng = trial_rng(opts.seed, n as u64);
    for _ in 0..opts.restarts {
        let mut v: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
        let s: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x *= mass / s);
        starts.push(v);
    }
    if n <= opts.grid_max_n {
        let r = opts.grid_resolution;
        let mut best = (f64::INFINITY, vec![0.0; n]);
        let mut x = vec![0.0; n];
        simplex_grid(n, r, |k| {
            for j in 0..n {
                x[j] = mass * k[j] as f64 / r as f64;
            }
            let f = fp.objective(&x);
            if f < best.0 {
                best = (f, x.clone());
            }
        });
        starts.push(best.1);
    }

    let mut best_x = starts[0].clone();
    let mut best_f = f64::INFINITY;
    for s in &starts {
        let (x, f) = projected_gradient(fp, s, opts.max_iter);
        // Require a real improvement so near-ties keep the earlier start.
        if best_f.is_infinite() || f < best_f - 1e-13 * best_f.abs() {
            best_f = f;
            best_x = x;
        }
    }
    // A vertex that ties the best point wins, lowest index first.
    for i in 0..n {
        let mut v = vec![0.0; n];
        v[i] = mass;
        if fp.objective(&v) <= best_f + 1e-12 * best_f.abs() {
            return v;
        }
    }
    best_x
}

/// [`solve_fractional_program_with`] using default options.
pub fn solve_fractional_program(fp: &FractionalProgram) -> Vec<f64> {
    solve_fractional_program_with(fp, &FpOptions::default(), None)
}

/// Full N×N F₂ from f₂,₂ … f₂,ₙ₋₁.
fn f2_matrix(n: usize, f2_diag: &[f64]) -> DMatrix<f64> {
    let mut f2 = DMatrix::zeros(n, n);
    for (j, &v) in f2_diag.iter().enumerate() {
        f2[(j + 1, j)] = v;
    }
    f2
}

/// Column-wise minimizer of 𝔼‖x₁‖² for fixed q₁ and F₂:
/// f₁,ᵢ = −(f₂,ᵢσ₁²/(f₂,ᵢ²σ₁²+σ₂²))·(q₁,ᵢ₋₁/(1+‖hᵢ‖²))·hᵢ with hᵢ = q₁[i+1..N],
/// for i = 2 … N−1, and f₁,₁ = 0.
pub fn closed_form_f1(q1: &[f64], f2_diag: &[f64], cfg: &ChannelConfig) -> DMatrix<f64> {
    let n = q1.len();
    let (s1, s2) = (cfg.sigma1_sq, cfg.sigma2_sq);
    let mut f1 = DMatrix::zeros(n, n);
    // Zero-based column c corresponds to one-based i = c + 1, with f₂,ᵢ = f2_diag[c − 1].
    for c in 1..n.saturating_sub(1) {
        let f = f2_diag[c - 1];
        let h2: f64 = q1[c + 1..].iter().map(|v| v * v).sum();
        let coeff = -(f * s1 / (f * f * s1 + s2)) * q1[c - 1] / (1.0 + h2);
        for r in c + 1..n {
            f1[(r, c)] = coeff * q1[r];
        }
    }
    f1
}

/// Φᵢ summed over columns plus σ₁²(q₁,ₙ₋₁² + q₁,ₙ²): 𝔼‖x₁‖² in terms of q₁, F₁ and F₂.
pub fn power1_from_q(q1: &[f64], f1: &DMatrix<f64>, f2_diag: &[f64], cfg: &ChannelConfig) -> f64 {
    let n = q1.len();
    let (s1, s2) = (cfg.sigma1_sq, cfg.sigma2_sq);
    if n == 1 {
        return s1 * q1[0] * q1[0];
    }
    let mut total = s1 * (q1[n - 2] * q1[n - 2] + q1[n - 1] * q1[n - 1]);
    for c in 0..n - 1 {
        let hf: f64 = (c + 1..n).map(|r| q1[r] * f1[(r, c)]).sum();
        let ff: f64 = (c + 1..n).map(|r| f1[(r, c)] * f1[(r, c)]).sum();
        if c == 0 {
            total += hf * hf * s2 + ff * s2;
        } else {
            let f = f2_diag[c - 1];
            let a = q1[c - 1] + f * hf;
            total += a * a * s1 + hf * hf * s2 + ff * (f * f * s1 + s2);
        }
    }
    total
}

/// Inner sub-problem state that the F₂ update needs.
#[derive(Clone, Debug)]
struct Inner<'a> {
    q1: &'a [f64],
    f1: &'a DMatrix<f64>,
    alpha: f64,
    p: &'a [f64],
    cfg: &'a ChannelConfig,
}

impl Inner<'_> {
    /// One Gauss–Seidel sweep over f₂,₂ … f₂,ₙ₋₁.
    fn sweep(&self, f2_diag: &mut [f64]) {
        let n = self.q1.len();
        let (s1, s2) = (self.cfg.sigma1_sq, self.cfg.sigma2_sq);
        let a = self.alpha;
        let f1 = |j: usize, i: usize| self.f1[(j - 1, i - 1)];
        for i in 2..n {
            let f2 = |k: usize, d: &[f64]| if (2..n).contains(&k) { d[k - 2] } else { 0.0 };
            let hf: f64 = (i + 1..=n).map(|r| self.q1[r - 1] * f1(r, i)).sum();
            let ff: f64 = (i + 1..=n).map(|r| f1(r, i) * f1(r, i)).sum();
            let cross_a: f64 = (i + 1..n).map(|j| f1(j, i).powi(2) * f2(j + 1, f2_diag).powi(2)).sum();
            let cross_b: f64 = (2..i.saturating_sub(1)).map(|k| f1(i - 1, k).powi(2) * f2(k, f2_diag).powi(2)).sum();
            let row: f64 = (1..i.saturating_sub(1)).map(|j| f1(i - 1, j).powi(2)).sum();
            let p = self.p[i - 2];
            let c = 2.0 * a * s1 * (hf * hf + ff)
                + 2.0 * (1.0 - a) * p * p
                + 2.0 * (1.0 - a) * s1
                + 2.0 * (1.0 - a) * s1 * (cross_a + cross_b)
                + 2.0 * s2 * (1.0 - a) * row;
            f2_diag[i - 2] = -2.0 * a * s1 * self.q1[i - 2] * hf / c;
        }
    }

    /// Surrogate whose coordinate minimizers the sweep computes: the weighted
    /// sum-power with p = Q₁½q₁ frozen in User 2's power.
    fn surrogate(&self, f2_diag: &[f64], eta2: f64) -> f64 {
        let n = self.q1.len();
        let cfg = self.cfg;
        let p1 = power1_from_q(self.q1, self.f1, f2_diag, cfg);
        let f2 = f2_matrix(n, f2_diag);
        let pv = DVector::from_column_slice(self.p);
        let f2f1 = &f2 * self.f1;
        let p2 = eta2 * cfg.sigma2_sq
            + (&f2 * pv).norm_squared()
            + crate::linalg::fro2(&f2) * cfg.sigma1_sq
            + crate::linalg::fro2(&(&f2f1 * &f2)) * cfg.sigma1_sq
            + crate::linalg::fro2(&f2f1) * cfg.sigma2_sq;
        self.alpha * p1 + (1.0 - self.alpha) * p2
    }
}

/// Repeats F₂ sweeps with p held fixed until the weighted objective moves by at most `eps`.
///
/// Returns the new f₂,₂ … f₂,ₙ₋₁ and the objective after each sweep.
#[allow(clippy::too_many_arguments)]
pub fn update_f2(
    q1: &[f64],
    f1: &DMatrix<f64>,
    alpha: f64,
    p_vector: &[f64],
    f2_diag: &[f64],
    cfg: &ChannelConfig,
    eta2: f64,
    eps: f64,
    max_inner: usize,
) -> (Vec<f64>, Vec<f64>) {
    let inner = Inner {
        q1,
        f1,
        alpha,
        p: p_vector,
        cfg,
    };
    let mut d = f2_diag.to_vec();
    let mut trace = Vec::new();
    let mut old = 0.0;
    let mut new = weighted_objective_q(q1, f1, &d, cfg, eta2, alpha);
    for _ in 0..max_inner {
        if (new - old).abs() <= eps {
            break;
        }
        inner.sweep(&mut d);
        old = new;
        new = weighted_objective_q(q1, f1, &d, cfg, eta2, alpha);
        trace.push(new);
    }
    (d, trace)
}

/// Derivative of the fixed-p surrogate with respect to f₂,ᵢ by central differences.
pub fn surrogate_gradient(
    q1: &[f64],
    f1: &DMatrix<f64>,
    alpha: f64,
    p_vector: &[f64],
    f2_diag: &[f64],
    cfg: &ChannelConfig,
    eta2: f64,
) -> Vec<f64> {
    let inner = Inner {
        q1,
        f1,
        alpha,
        p: p_vector,
        cfg,
    };
    let h = 1e-6;
    (0..f2_diag.len())
        .map(|k| {
            let mut a = f2_diag.to_vec();
            let mut b = f2_diag.to_vec();
            a[k] += h;
            b[k] -= h;
            (inner.surrogate(&a, eta2) - inner.surrogate(&b, eta2)) / (2.0 * h)
        })
        .collect()
}

/// Scheme with g₁ = Q₁½q₁, the given F₁, restricted F₂ and g₂ = √η₂σ₂·e_N.
pub fn assemble_scheme(
    q1: &[f64],
    f1: &DMatrix<f64>,
    f2_diag: &[f64],
    cfg: &ChannelConfig,
    eta2: f64,
) -> LinearScheme {
    let n = q1.len();
    let mut g2 = DVector::zeros(n);
    g2[n - 1] = (eta2 * cfg.sigma2_sq).sqrt();
    let tmp = LinearScheme::new_restricted(DVector::zeros(n), g2, f1.clone(), f2_diag)
        .expect("assembled scheme is structurally valid");
    let q1s = sym_sqrt(&compute_q1(&tmp, cfg));
    let g1 = q1s * DVector::from_column_slice(q1);
    LinearScheme { g1, ..tmp }
}

/// α𝔼‖x₁‖² + (1−α)𝔼‖x₂‖² of the scheme assembled from (q₁, F₁, F₂).
pub fn weighted_objective_q(
    q1: &[f64],
    f1: &DMatrix<f64>,
    f2_diag: &[f64],
    cfg: &ChannelConfig,
    eta2: f64,
    alpha: f64,
) -> f64 {
    let s = assemble_scheme(q1, f1, f2_diag, cfg, eta2);
    let (p1, p2) = powers(&s, cfg);
    alpha * p1 + (1.0 - alpha) * p2
}

/// Result of [`min_wsp`].
#[derive(Clone, Debug)]
pub struct WspSolution {
    pub scheme: LinearScheme,
    pub eta1: f64,
    pub eta2: f64,
    pub alpha: f64,
    pub objective: f64,
    pub power1: f64,
    pub power2: f64,
    /// Index of the initialization that produced this solution.
    pub init: usize,
    /// Objective after each outer iteration of the winning initialization.
    pub trace: Vec<f64>,
    /// Objective after each inner sweep, grouped by outer iteration.
    pub inner_traces: Vec<Vec<f64>>,
    /// Whether the outer loop stopped on tolerance rather than the cap.
    pub converged: bool,
}

impl WspSolution {
    pub fn max_power(&self) -> f64 {
        self.power1.max(self.power2)
    }

    pub fn into_design(self, k1: usize, k2: usize, budget: f64, seed: u64, cfg: &ChannelConfig) -> Result<DesignSolution> {
        DesignSolution::from_scheme(
            *cfg, k1, k2, self.scheme, self.eta1, self.eta2, self.alpha, budget, seed,
        )
    }
}

/// Weighted objective once g₁ is rescaled so that SNR₁ = η₁, or `None` if it cannot be.
fn pinned_objective(q1: &[f64], f1: &DMatrix<f64>, f2_diag: &[f64], prob: &WspProblem) -> Option<f64> {
    let cfg = &prob.cfg;
    let scheme = assemble_scheme(q1, f1, f2_diag, cfg, prob.eta2);
    let s1 = snr(&scheme, cfg, 1);
    if !(s1.is_finite() && s1 > 0.0) {
        return None;
    }
    let c2 = prob.eta1 / s1;
    let (p1, p2) = powers(&scheme, cfg);
    let a1 = scheme.g1.norm_squared();
    let a2 = (&scheme.f2 * &scheme.g1).norm_squared();
    Some(prob.alpha * (p1 + (c2 - 1.0) * a1) + (1.0 - prob.alpha) * (p2 + (c2 - 1.0) * a2))
}

/// Runs one initialization of the alternating scheme.
fn run_init(prob: &WspProblem, opts: &WspOptions, f2_init: Vec<f64>, seed: u64) -> WspSolution {
    let cfg = &prob.cfg;
    let n = cfg.n;
    let mut f2 = f2_init;
    let mut x_prev: Option<Vec<f64>> = None;
    let mut trace = Vec::new();
    let mut inner_traces = Vec::new();
    let mut s_old = 0.0;
    let mut s_new = f64::INFINITY;
    let mut best: Option<(f64, Vec<f64>, DMatrix<f64>, Vec<f64>)> = None;
    let mut last: Option<(Vec<f64>, DMatrix<f64>)> = None;
    let mut converged = false;
    for outer in 0..opts.max_outer {
        if (s_new - s_old).abs() <= prob.eps {
            converged = true;
            break;
        }
        // Sub-problem 1.
        let fp = build_fractional_program(&f2, cfg, prob.eta1);
        let fp_opts = FpOptions {
            seed: opts.fp.seed ^ seed.rotate_left(17) ^ (outer as u64),
            ..opts.fp.clone()
        };
        let x = solve_fractional_program_with(&fp, &fp_opts, x_prev.as_deref());
        let q1: Vec<f64> = x.iter().map(|v| v.max(0.0).sqrt()).collect();
        let f1 = closed_form_f1(&q1, &f2, cfg);
        let p: Vec<f64> = assemble_scheme(&q1, &f1, &f2, cfg, prob.eta2).g1.iter().copied().collect();
        if let Some(v) = pinned_objective(&q1, &f1, &f2, prob) {
            if best.as_ref().is_none_or(|b| v < b.0) {
                best = Some((v, q1.clone(), f1.clone(), f2.clone()));
            }
        }
        // Sub-problem 2.
        let (f2_new, inner) = update_f2(&q1, &f1, prob.alpha, &p, &f2, cfg, prob.eta2, prob.eps, opts.max_inner);
        f2 = f2_new;
        inner_traces.push(inner);
        s_old = s_new;
        s_new = weighted_objective_q(&q1, &f1, &f2, cfg, prob.eta2, prob.alpha);
        trace.push(s_new);
        if let Some(v) = pinned_objective(&q1, &f1, &f2, prob) {
            if best.as_ref().is_none_or(|b| v < b.0) {
                best = Some((v, q1.clone(), f1.clone(), f2.clone()));
            }
        }
        x_prev = Some(x);
        last = Some((q1, f1));
    }
    if !converged && (s_new - s_old).abs() <= prob.eps {
        converged = true;
    }
    // The surrogate step can raise the true objective, so the lowest iterate is returned.
    let (q1, f1, f2) = match (best, last) {
        (Some((_, q1, f1, f2)), _) => (q1, f1, f2),
        (None, Some((q1, f1))) => (q1, f1, f2),
        (None, None) => {
            let mut q = vec![0.0; n];
            q[0] = prob.eta1.sqrt();
            (q, DMatrix::zeros(n, n), f2)
        }
    };
    let mut scheme = assemble_scheme(&q1, &f1, &f2, cfg, prob.eta2);
    // Q₁ can be poorly conditioned under strong feedback; pin SNR₁ to η₁ exactly.
    let s1 = snr(&scheme, cfg, 1);
    if s1.is_finite() && s1 > 0.0 {
        scheme.g1 *= (prob.eta1 / s1).sqrt();
    }
    let (power1, power2) = powers(&scheme, cfg);
    WspSolution {
        scheme,
        eta1: prob.eta1,
        eta2: prob.eta2,
        alpha: prob.alpha,
        objective: prob.alpha * power1 + (1.0 - prob.alpha) * power2,
        power1,
        power2,
        init: 0,
        trace,
        inner_traces,
        converged,
    }
}

/// Solves the weighted sum-power problem from `n_inits` random F₂ starts and
/// keeps the best run that meets both SNR targets (lowest objective, ties to the
/// lower init index).
pub fn min_wsp(prob: &WspProblem, seed: u64) -> Result<WspSolution> {
    min_wsp_with(prob, &WspOptions::default(), seed)
}

pub fn min_wsp_with(prob: &WspProblem, opts: &WspOptions, seed: u64) -> Result<WspSolution> {
    prob.validate()?;
    let (ok, bad): (Vec<_>, Vec<_>) = min_wsp_all(prob, opts, seed)?
        .into_iter()
        .partition(|s| check_targets(s, &prob.cfg).is_ok());
    let lowest = |runs: Vec<WspSolution>| runs.into_iter().reduce(|a, b| if b.objective < a.objective { b } else { a });
    match lowest(ok) {
        Some(best) => Ok(best),
        None => {
            let best = lowest(bad).expect("at least one initialization");
            check_targets(&best, &prob.cfg)?;
            Ok(best)
        }
    }
}

/// Every initialization's result, in init order.
pub fn min_wsp_all(prob: &WspProblem, opts: &WspOptions, seed: u64) -> Result<Vec<WspSolution>> {
    prob.validate()?;
    let n = prob.cfg.n;
    let free = n.saturating_sub(2);
    if let Some(bad) = prob.extra_inits.iter().find(|v| v.len() != free) {
        return Err(Error::InvalidArgument(format!(
            "extra init has {} entries, expected {free}",
            bad.len()
        )));
    }
    let total = prob.n_inits + prob.extra_inits.len();
    let runs: Vec<WspSolution> = (0..total)
        .into_par_iter()
        .map(|k| {
            let f2: Vec<f64> = match k.checked_sub(prob.n_inits) {
                Some(e) => prob.extra_inits[e].clone(),
                None => {
                    let mut rng = trial_rng(seed, k as u64);
                    (0..free).map(|_| rng.random::<f64>()).collect()
                }
            };
            let mut sol = run_init(prob, opts, f2, seed.wrapping_add(k as u64));
            sol.init = k;
            sol
        })
        .collect();
    Ok(runs)
}

/// Solves the weighted sum-power problem at each α in `alphas` (ascending).
///
/// Every point first gets the usual multi-start solve. Sweeps up and then down
/// the grid follow, restarting each point from its neighbour's F₂ and keeping
/// whichever run has the lower objective, until a round changes nothing.
pub fn min_wsp_path(prob: &WspProblem, alphas: &[f64], opts: &WspOptions, seed: u64) -> Result<Vec<WspSolution>> {
    let at = |alpha: f64| WspProblem { alpha, ..prob.clone() };
    let mut sols = alphas
        .iter()
        .map(|&a| min_wsp_with(&at(a), opts, seed))
        .collect::<Result<Vec<_>>>()?;
    let len = sols.len();
    for _ in 0..8 {
        let mut changed = false;
        let up = (1..len).map(|i| (i, i - 1));
        let down = (0..len.saturating_sub(1)).rev().map(|i| (i, i + 1));
        for (i, j) in up.chain(down) {
            let p = at(alphas[i]);
            let cand = run_init(&p, opts, sols[j].scheme.f2_subdiag(), seed.wrapping_add(i as u64));
            if cand.objective < sols[i].objective * (1.0 - 1e-12) && check_targets(&cand, &p.cfg).is_ok() {
                sols[i] = WspSolution { init: sols[j].init, ..cand };
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(sols)
}

fn check_targets(sol: &WspSolution, cfg: &ChannelConfig) -> Result<()> {
    let s1 = snr(&sol.scheme, cfg, 1);
    let s2 = snr(&sol.scheme, cfg, 2);
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    if rel(s1, sol.eta1) > 1e-6 || rel(s2, sol.eta2) > 1e-6 {
        return Err(Error::InternalConsistency(format!(
            "achieved SNRs ({s1}, {s2}) differ from targets ({}, {})",
            sol.eta1, sol.eta2
        )));
    }
    Ok(())
}
