//! Reference computations for small problems: brute-force likelihood
//! decisions and an exhaustive search over feedback matrices.

use crate::channel::ChannelConfig;
use crate::error::{Error, Result};
use crate::linalg::{spd_solve, sym_sqrt};
use crate::pam::Constellation;
use crate::scheme::{compute_q1, compute_q2, powers, LinearScheme};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Largest block length [`exhaustive_minmax_power`] accepts.
pub const MAX_EXHAUSTIVE_N: usize = 4;

/// Gaussian likelihood of each user's full receive vector, evaluated for
/// every candidate level.
#[derive(Clone, Debug)]
pub struct LikelihoodDecoder {
    // y₁ = (I+F₂F₁)g₂m₂ + F₂g₁m₁ + (I+F₂F₁)(F₂n₁ + n₂)
    mean1_m2: DVector<f64>,
    mean1_m1: DVector<f64>,
    cov1: DMatrix<f64>,
    // y₂ = g₁m₁ + F₁g₂m₂ + (I+F₁F₂)n₁ + F₁n₂
    mean2_m1: DVector<f64>,
    mean2_m2: DVector<f64>,
    cov2: DMatrix<f64>,
}

impl LikelihoodDecoder {
    pub fn new(s: &LinearScheme, cfg: &ChannelConfig) -> Self {
        let t = s.t21();
        Self {
            mean1_m2: &t * &s.g2,
            mean1_m1: &s.f2 * &s.g1,
            cov1: &t * compute_q2(s, cfg) * t.transpose(),
            mean2_m1: s.g1.clone(),
            mean2_m2: &s.f1 * &s.g2,
            cov2: compute_q1(s, cfg),
        }
    }

    fn argmax(cov: &DMatrix<f64>, resid: impl Fn(f64) -> DVector<f64>, c: &Constellation) -> f64 {
        let mut best = (f64::INFINITY, c.levels()[0]);
        for &m in c.levels() {
            let r = resid(m);
            let d = r.dot(&spd_solve(cov, &r));
            if d < best.0 {
                best = (d, m);
            }
        }
        best.1
    }

    /// User 1's most likely m₂ given its receive vector and own message.
    pub fn decide_m2(&self, y1: &[f64], m1: f64, c2: &Constellation) -> f64 {
        let y = DVector::from_column_slice(y1);
        Self::argmax(&self.cov1, |m| &y - &self.mean1_m2 * m - &self.mean1_m1 * m1, c2)
    }

    /// User 2's most likely m₁.
    pub fn decide_m1(&self, y2: &[f64], m2: f64, c1: &Constellation) -> f64 {
        let y = DVector::from_column_slice(y2);
        Self::argmax(&self.cov2, |m| &y - &self.mean2_m1 * m - &self.mean2_m2 * m2, c1)
    }
}

/// Best scheme found by [`exhaustive_minmax_power`].
#[derive(Clone, Debug)]
pub struct ExhaustiveResult {
    pub max_power: f64,
    pub power1: f64,
    pub power2: f64,
    pub scheme: LinearScheme,
    /// Feedback configurations evaluated.
    pub evaluated: usize,
}

/// Free feedback parameters: strictly lower F₁ and the whole subdiagonal of F₂.
#[derive(Clone, Debug)]
struct Layout {
    n: usize,
    f1: Vec<(usize, usize)>,
}

impl Layout {
    fn new(n: usize) -> Self {
        let f1 = (0..n).flat_map(|r| (0..r).map(move |c| (r, c))).collect();
        Self { n, f1 }
    }

    fn dim(&self) -> usize {
        self.f1.len() + self.n.saturating_sub(1)
    }

    fn matrices(&self, theta: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.n;
        let mut f1 = DMatrix::zeros(n, n);
        let mut f2 = DMatrix::zeros(n, n);
        for (&(r, c), &v) in self.f1.iter().zip(theta) {
            f1[(r, c)] = v;
        }
        for (j, &v) in theta[self.f1.len()..].iter().enumerate() {
            f2[(j + 1, j)] = v;
        }
        (f1, f2)
    }
}

/// Quadratic forms of the max-power problem for fixed feedback: with
/// gᵢ = Qᵢ½vᵢ and ‖vᵢ‖² = ηᵢ,
/// p₁ = v₁ᵀA₁v₁ + v₂ᵀA₂v₂ + c₁ and p₂ = v₁ᵀB₁v₁ + v₂ᵀB₂v₂ + c₂.
struct Forms {
    a1: DMatrix<f64>,
    b1: DMatrix<f64>,
    a2: DMatrix<f64>,
    b2: DMatrix<f64>,
    c1: f64,
    c2: f64,
    q1s: DMatrix<f64>,
    q2s: DMatrix<f64>,
}

impl Forms {
    fn new(f1: &DMatrix<f64>, f2: &DMatrix<f64>, cfg: &ChannelConfig) -> Self {
        let n = f1.nrows();
        let zero = DVector::zeros(n);
        let s = LinearScheme {
            g1: zero.clone(),
            g2: zero,
            f1: f1.clone(),
            f2: f2.clone(),
            restricted: false,
        };
        let q1 = compute_q1(&s, cfg);
        let q2 = compute_q2(&s, cfg);
        let (q1s, q2s) = (sym_sqrt(&q1), sym_sqrt(&q2));
        let (c1, c2) = powers(&s, cfg);
        let t = s.t21();
        let f2q = f2 * &q1s;
        let f1q = f1 * &q2s;
        let tq = &t * &q2s;
        Self {
            a1: q1,
            b1: f2q.transpose() * &f2q,
            a2: f1q.transpose() * &f1q,
            b2: tq.transpose() * &tq,
            c1,
            c2,
            q1s,
            q2s,
        }
    }

    fn powers_of(&self, v1: &DVector<f64>, v2: &DVector<f64>) -> (f64, f64) {
        let qf = |m: &DMatrix<f64>, v: &DVector<f64>| v.dot(&(m * v));
        (
            qf(&self.a1, v1) + qf(&self.a2, v2) + self.c1,
            qf(&self.b1, v1) + qf(&self.b2, v2) + self.c2,
        )
    }
}

fn min_eigvec(m: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let e = SymmetricEigen::new(m.clone());
    let (i, &v) = e
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty matrix");
    (v, e.eigenvectors.column(i).into_owned())
}

/// Best max(p₁, p₂) over message vectors meeting the SNR targets, for fixed F.
///
/// The weighted dual λp₁ + (1−λ)p₂ is minimized by eigenvectors; every λ
/// visited gives a feasible primal point, and the best primal is kept. Near
/// the dual optimum, pairs of eigenvectors from either side are also mixed.
fn inner_minmax(forms: &Forms, eta1: f64, eta2: f64, refine: bool) -> (f64, DVector<f64>, DVector<f64>) {
    let s1 = eta1.sqrt();
    let s2 = eta2.sqrt();
    let mut best = (f64::INFINITY, DVector::zeros(0), DVector::zeros(0));
    let visit = |lam: f64, best: &mut (f64, DVector<f64>, DVector<f64>)| -> (f64, DVector<f64>, DVector<f64>) {
        let (e1, v1) = min_eigvec(&(&forms.a1 * lam + &forms.b1 * (1.0 - lam)));
        let (e2, v2) = min_eigvec(&(&forms.a2 * lam + &forms.b2 * (1.0 - lam)));
        let (v1, v2) = (v1 * s1, v2 * s2);
        let (p1, p2) = forms.powers_of(&v1, &v2);
        if p1.max(p2) < best.0 {
            *best = (p1.max(p2), v1.clone(), v2.clone());
        }
        let dual = lam * forms.c1 + (1.0 - lam) * forms.c2 + eta1 * e1 + eta2 * e2;
        (dual, v1, v2)
    };
    let grid = 20;
    let mut duals = Vec::with_capacity(grid + 1);
    for j in 0..=grid {
        let lam = j as f64 / grid as f64;
        duals.push((lam, visit(lam, &mut best).0));
    }
    let top = duals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, _)| i)
        .unwrap();
    let mut a = duals[top.saturating_sub(1)].0;
    let mut b = duals[(top + 1).min(grid)].0;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = visit(c, &mut best).0;
    let mut fd = visit(d, &mut best).0;
    while b - a > 1e-6 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = visit(c, &mut best).0;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = visit(d, &mut best).0;
        }
    }
    if refine {
        let lam = 0.5 * (a + b);
        let (_, l1, l2) = visit((lam - 1e-4).max(0.0), &mut best);
        let (_, r1, r2) = visit((lam + 1e-4).min(1.0), &mut best);
        let steps = 60;
        for i in 0..=steps {
            let t1 = std::f64::consts::FRAC_PI_2 * i as f64 / steps as f64;
            for j in 0..=steps {
                let t2 = std::f64::consts::FRAC_PI_2 * j as f64 / steps as f64;
                for sign in [1.0, -1.0] {
                    let mix = |l: &DVector<f64>, r: &DVector<f64>, t: f64, s: f64| {
                        let v = l * t.cos() + r * (s * t.sin());
                        let norm = v.norm();
                        if norm > 0.0 { v * (l.norm() / norm) } else { l.clone() }
                    };
                    let v1 = mix(&l1, &r1, t1, sign);
                    let v2 = mix(&l2, &r2, t2, sign);
                    let (p1, p2) = forms.powers_of(&v1, &v2);
                    if p1.max(p2) < best.0 {
                        best = (p1.max(p2), v1, v2);
                    }
                }
            }
        }
    }
    best
}

/// Grid and pattern search over F₁ (strictly lower) and the subdiagonal of
/// F₂, with both message vectors solved for each F. All F entries lie on the
/// lattice `grid_step`·ℤ ∩ [−2, 2].
///
/// The full lattice is too large to enumerate beyond N = 2, so a coarse grid
/// is scanned first and the best points are refined by a pattern search whose
/// step halves down to `grid_step`.
pub fn exhaustive_minmax_power(cfg: &ChannelConfig, eta1: f64, eta2: f64, grid_step: f64) -> Result<ExhaustiveResult> {
    cfg.validate()?;
    let n = cfg.n;
    if n > MAX_EXHAUSTIVE_N {
        return Err(Error::CostGuard { n, max: MAX_EXHAUSTIVE_N });
    }
    if !(grid_step > 0.0 && grid_step <= 2.0) || !(eta1 > 0.0 && eta2 > 0.0) {
        return Err(Error::InvalidArgument("grid step must lie in (0, 2] and targets be positive".into()));
    }
    let lay = Layout::new(n);
    let dim = lay.dim();
    let lattice = |v: f64| ((v / grid_step).round() * grid_step).clamp(-2.0, 2.0);
    let mut evaluated = 0usize;
    let mut score = |theta: &[f64]| -> f64 {
        evaluated += 1;
        let (f1, f2) = lay.matrices(theta);
        inner_minmax(&Forms::new(&f1, &f2, cfg), eta1, eta2, false).0
    };

    let coarse: Vec<f64> = match n {
        0..=2 => {
            let k = (2.0 / grid_step).floor() as i64;
            (-k..=k).map(|i| i as f64 * grid_step).collect()
        }
        3 => vec![-2.0, -1.0, 0.0, 1.0, 2.0],
        _ => vec![-1.0, 0.0, 1.0],
    };
    let coarse: Vec<f64> = coarse.into_iter().map(lattice).collect();
    let mut scored: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut idx = vec![0usize; dim];
    loop {
        let theta: Vec<f64> = idx.iter().map(|&i| coarse[i]).collect();
        let v = score(&theta);
        scored.push((v, theta));
        let mut k = 0;
        while k < dim {
            idx[k] += 1;
            if idx[k] < coarse.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == dim {
            break;
        }
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    scored.truncate(10);

    let mut steps: Vec<f64> = [1.0, 0.5, 0.25, 0.1, 0.05]
        .into_iter()
        .filter(|&s| s > grid_step * (1.0 + 1e-9))
        .map(lattice)
        .filter(|&s| s > 0.0)
        .collect();
    steps.push(grid_step);
    let mut best = scored[0].clone();
    if dim > 0 {
        for (v0, theta0) in scored {
            let (mut v, mut theta) = (v0, theta0);
            for &step in &steps {
                loop {
                    let mut moved = false;
                    for k in 0..dim {
                        for dir in [1.0, -1.0] {
                            let mut cand = theta.clone();
                            cand[k] = lattice(cand[k] + dir * step);
                            if cand[k] == theta[k] {
                                continue;
                            }
                            let c = score(&cand);
                            if c < v - 1e-12 * v {
                                v = c;
                                theta = cand;
                                moved = true;
                            }
                        }
                    }
                    if !moved {
                        break;
                    }
                }
            }
            if v < best.0 {
                best = (v, theta);
            }
        }
    }

    let (f1, f2) = lay.matrices(&best.1);
    let forms = Forms::new(&f1, &f2, cfg);
    let (_, v1, v2) = inner_minmax(&forms, eta1, eta2, true);
    let scheme = LinearScheme::new(&forms.q1s * v1, &forms.q2s * v2, f1, f2)?;
    let (power1, power2) = powers(&scheme, cfg);
    Ok(ExhaustiveResult {
        max_power: power1.max(power2),
        power1,
        power2,
        scheme,
        evaluated,
    })
}
