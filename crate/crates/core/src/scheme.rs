//! Linear feedback schemes: representation, second-order statistics, decoding
//! and conversion between the plain and tilde parameterizations.
//!
//! In the plain form User 1 sends x₁ = g₁m₁ + F₁(y₁ − F₂x₁) and User 2 sends
//! x₂ = g₂m₂ + F₂y₂. In the tilde form each user subtracts its own
//! contribution with the other's matrix: x₁ = g̃₁m₁ + F̃₁(y₁ − F̃₂x₁),
//! x₂ = g̃₂m₂ + F̃₂(y₂ − F̃₁x₂). Other parameterizations (for instance feeding
//! back raw receive signals on both sides) are representable by the same
//! kind of change of variables but have no conversion routine here.

use crate::channel::ChannelConfig;
use crate::error::{Error, Result};
use crate::linalg::{
    fro2, is_strictly_lower, min_eigenvalue, solve_unit_lower, solve_unit_lower_mat, spd_solve,
    sym_sqrt,
};
use crate::pam::Constellation;
use nalgebra::{DMatrix, DVector};

/// The tuple (g₁, F₁, g₂, F₂) with strictly lower triangular feedback matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearScheme {
    pub g1: DVector<f64>,
    pub g2: DVector<f64>,
    pub f1: DMatrix<f64>,
    pub f2: DMatrix<f64>,
    pub(crate) restricted: bool,
}

impl LinearScheme {
    pub fn new(
        g1: DVector<f64>,
        g2: DVector<f64>,
        f1: DMatrix<f64>,
        f2: DMatrix<f64>,
    ) -> Result<Self> {
        let n = g1.len();
        if n == 0 || g2.len() != n || f1.shape() != (n, n) || f2.shape() != (n, n) {
            return Err(Error::InvalidArgument(format!(
                "inconsistent scheme dimensions: g1 {}, g2 {}, f1 {:?}, f2 {:?}",
                n,
                g2.len(),
                f1.shape(),
                f2.shape()
            )));
        }
        if !is_strictly_lower(&f1) || !is_strictly_lower(&f2) {
            return Err(Error::InvalidArgument(
                "feedback matrices must be strictly lower triangular".into(),
            ));
        }
        Ok(Self {
            g1,
            g2,
            f1,
            f2,
            restricted: false,
        })
    }

    /// Scheme whose F₂ has only the first subdiagonal f₂,₂ … f₂,ₙ₋₁ and f₂,ₙ = 0.
    ///
    /// `f2_sub[j]` is f₂,ⱼ₊₂ (one-based index), so its length is N − 2
    /// (zero for N ≤ 2).
    pub fn new_restricted(
        g1: DVector<f64>,
        g2: DVector<f64>,
        f1: DMatrix<f64>,
        f2_sub: &[f64],
    ) -> Result<Self> {
        let n = g1.len();
        if f2_sub.len() != n.saturating_sub(2) {
            return Err(Error::InvalidArgument(format!(
                "expected {} subdiagonal entries for n = {n}, got {}",
                n.saturating_sub(2),
                f2_sub.len()
            )));
        }
        let mut f2 = DMatrix::zeros(n, n);
        for (j, &v) in f2_sub.iter().enumerate() {
            f2[(j + 1, j)] = v;
        }
        let mut s = Self::new(g1, g2, f1, f2)?;
        s.restricted = true;
        Ok(s)
    }

    /// Marks an existing scheme as restricted after checking the F₂ structure.
    pub fn into_restricted(mut self) -> Result<Self> {
        let n = self.n();
        for i in 0..n {
            for j in 0..n {
                let allowed = j + 1 == i && i + 1 < n;
                if !allowed && self.f2[(i, j)] != 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "F2 entry ({i}, {j}) breaks the restricted subdiagonal form"
                    )));
                }
            }
        }
        self.restricted = true;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.g1.len()
    }

    pub fn is_restricted(&self) -> bool {
        self.restricted
    }

    /// f₂,₂ … f₂,ₙ₋₁ read off the first subdiagonal.
    pub fn f2_subdiag(&self) -> Vec<f64> {
        (0..self.n().saturating_sub(2))
            .map(|j| self.f2[(j + 1, j)])
            .collect()
    }

    /// I + F₂F₁, unit lower triangular.
    pub fn t21(&self) -> DMatrix<f64> {
        DMatrix::identity(self.n(), self.n()) + &self.f2 * &self.f1
    }

    /// I + F₁F₂, unit lower triangular.
    pub fn t12(&self) -> DMatrix<f64> {
        DMatrix::identity(self.n(), self.n()) + &self.f1 * &self.f2
    }
}

/// The tilde parameterization (g̃₁, F̃₁, g̃₂, F̃₂).
#[derive(Clone, Debug, PartialEq)]
pub struct TildeScheme {
    pub g1t: DVector<f64>,
    pub g2t: DVector<f64>,
    pub f1t: DMatrix<f64>,
    pub f2t: DMatrix<f64>,
}

impl TildeScheme {
    pub fn new(
        g1t: DVector<f64>,
        g2t: DVector<f64>,
        f1t: DMatrix<f64>,
        f2t: DMatrix<f64>,
    ) -> Result<Self> {
        let n = g1t.len();
        if g2t.len() != n || f1t.shape() != (n, n) || f2t.shape() != (n, n) {
            return Err(Error::InvalidArgument("inconsistent tilde dimensions".into()));
        }
        if !is_strictly_lower(&f1t) || !is_strictly_lower(&f2t) {
            return Err(Error::InvalidArgument(
                "feedback matrices must be strictly lower triangular".into(),
            ));
        }
        Ok(Self { g1t, g2t, f1t, f2t })
    }
}

/// Effective noise covariances seen by each decoder and their square roots.
#[derive(Clone, Debug)]
pub struct NoiseShaping {
    pub q1: DMatrix<f64>,
    pub q2: DMatrix<f64>,
    pub q1_sqrt: DMatrix<f64>,
    pub q2_sqrt: DMatrix<f64>,
}

impl NoiseShaping {
    pub fn new(s: &LinearScheme, cfg: &ChannelConfig) -> Self {
        let q1 = compute_q1(s, cfg);
        let q2 = compute_q2(s, cfg);
        Self {
            q1_sqrt: sym_sqrt(&q1),
            q2_sqrt: sym_sqrt(&q2),
            q1,
            q2,
        }
    }
}

/// Minimum-variance unbiased combining vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Combiners {
    pub w1: DVector<f64>,
    pub w2: DVector<f64>,
}

/// Q₂ = F₂F₂ᵀσ₁² + σ₂²I, the noise covariance of r₁ at User 1.
pub fn compute_q2(s: &LinearScheme, cfg: &ChannelConfig) -> DMatrix<f64> {
    let n = s.n();
    &s.f2 * s.f2.transpose() * cfg.sigma1_sq + DMatrix::identity(n, n) * cfg.sigma2_sq
}

/// Q₁ = (I+F₁F₂)(I+F₁F₂)ᵀσ₁² + F₁F₁ᵀσ₂², the noise covariance of r₂ at User 2.
pub fn compute_q1(s: &LinearScheme, cfg: &ChannelConfig) -> DMatrix<f64> {
    let t = s.t12();
    &t * t.transpose() * cfg.sigma1_sq + &s.f1 * s.f1.transpose() * cfg.sigma2_sq
}

/// Post-combining SNR gᵢᵀQᵢ⁻¹gᵢ of message `user`.
pub fn snr(s: &LinearScheme, cfg: &ChannelConfig, user: usize) -> f64 {
    let (q, g) = match user {
        1 => (compute_q1(s, cfg), &s.g1),
        _ => (compute_q2(s, cfg), &s.g2),
    };
    g.dot(&spd_solve(&q, g))
}

/// Expected transmit energies (𝔼‖x₁‖², 𝔼‖x₂‖²) over a block, for unit-power messages.
pub fn powers(s: &LinearScheme, cfg: &ChannelConfig) -> (f64, f64) {
    let (s1, s2) = (cfg.sigma1_sq, cfg.sigma2_sq);
    let f1f2 = &s.f1 * &s.f2;
    let f2f1 = &s.f2 * &s.f1;
    let p1 = s.g1.norm_squared()
        + (&s.f1 * &s.g2).norm_squared()
        + fro2(&f1f2) * s1
        + fro2(&s.f1) * s2;
    let t21 = s.t21();
    let t12 = s.t12();
    let p2 = (&t21 * &s.g2).norm_squared()
        + (&s.f2 * &s.g1).norm_squared()
        + fro2(&(&s.f2 * &t12)) * s1
        + fro2(&f2f1) * s2;
    (p1, p2)
}

/// Per-use expected transmit powers (𝔼x₁[k]², 𝔼x₂[k]²), whose sums are [`powers`].
pub fn power_profile(s: &LinearScheme, cfg: &ChannelConfig) -> (Vec<f64>, Vec<f64>) {
    let (s1, s2) = (cfg.sigma1_sq, cfg.sigma2_sq);
    let n = s.n();
    // x₁ = g₁m₁ + F₁g₂m₂ + F₁F₂n₁ + F₁n₂
    let f1g2 = &s.f1 * &s.g2;
    let f1f2 = &s.f1 * &s.f2;
    // x₂ = (I+F₂F₁)g₂m₂ + F₂g₁m₁ + F₂(I+F₁F₂)n₁ + F₂F₁n₂
    let t21g2 = s.t21() * &s.g2;
    let f2g1 = &s.f2 * &s.g1;
    let f2t12 = &s.f2 * s.t12();
    let f2f1 = &s.f2 * &s.f1;
    let row2 = |m: &DMatrix<f64>, k: usize| m.row(k).norm_squared();
    let e1 = (0..n)
        .map(|k| s.g1[k].powi(2) + f1g2[k].powi(2) + row2(&f1f2, k) * s1 + row2(&s.f1, k) * s2)
        .collect();
    let e2 = (0..n)
        .map(|k| t21g2[k].powi(2) + f2g1[k].powi(2) + row2(&f2t12, k) * s1 + row2(&f2f1, k) * s2)
        .collect();
    (e1, e2)
}

/// wᵢ = Qᵢ⁻¹gᵢ / (gᵢᵀQᵢ⁻¹gᵢ).
pub fn combiners(s: &LinearScheme, cfg: &ChannelConfig) -> Result<Combiners> {
    let w = |q: DMatrix<f64>, g: &DVector<f64>, who: &str| -> Result<DVector<f64>> {
        if g.iter().all(|&v| v == 0.0) {
            return Err(Error::DegenerateScheme(format!("{who} message vector is zero")));
        }
        let qi = spd_solve(&q, g);
        let d = g.dot(&qi);
        Ok(qi / d)
    };
    Ok(Combiners {
        w1: w(compute_q1(s, cfg), &s.g1, "user 1")?,
        w2: w(compute_q2(s, cfg), &s.g2, "user 2")?,
    })
}

/// Precomputed decoding state for both users.
#[derive(Clone, Debug)]
pub struct Decoder {
    t21: DMatrix<f64>,
    f2g1: DVector<f64>,
    f1g2: DVector<f64>,
    pub combiners: Combiners,
}

impl Decoder {
    pub fn new(s: &LinearScheme, cfg: &ChannelConfig) -> Result<Self> {
        Ok(Self {
            t21: s.t21(),
            f2g1: &s.f2 * &s.g1,
            f1g2: &s.f1 * &s.g2,
            combiners: combiners(s, cfg)?,
        })
    }

    /// User 1's MVU estimate m̃₂ = w₂ᵀ(I+F₂F₁)⁻¹(y₁ − F₂g₁m₁); `r` is scratch of length N.
    pub fn estimate_m2(&self, y1: &[f64], m1: f64, r: &mut [f64]) -> f64 {
        let n = r.len();
        for i in 0..n {
            let mut v = y1[i] - self.f2g1[i] * m1;
            for j in 0..i {
                v -= self.t21[(i, j)] * r[j];
            }
            r[i] = v;
        }
        (0..n).map(|i| self.combiners.w2[i] * r[i]).sum()
    }

    /// User 2's MVU estimate m̃₁ = w₁ᵀ(y₂ − F₁g₂m₂).
    pub fn estimate_m1(&self, y2: &[f64], m2: f64) -> f64 {
        y2.iter()
            .zip(self.f1g2.iter())
            .zip(self.combiners.w1.iter())
            .map(|((y, f), w)| w * (y - f * m2))
            .sum()
    }
}

fn check_len(v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::InvalidArgument(format!(
            "received vector has length {}, scheme has {n}",
            v.len()
        )));
    }
    Ok(())
}

/// User 1's decision on m₂: MVU estimate followed by the nearest level of `c2`.
pub fn ml_decode_user1(
    s: &LinearScheme,
    cfg: &ChannelConfig,
    y1: &[f64],
    m1: f64,
    c2: &Constellation,
) -> Result<f64> {
    check_len(y1, s.n())?;
    let d = Decoder::new(s, cfg)?;
    let mut r = vec![0.0; s.n()];
    Ok(c2.nearest_level(d.estimate_m2(y1, m1, &mut r)))
}

/// User 2's decision on m₁.
pub fn ml_decode_user2(
    s: &LinearScheme,
    cfg: &ChannelConfig,
    y2: &[f64],
    m2: f64,
    c1: &Constellation,
) -> Result<f64> {
    check_len(y2, s.n())?;
    let d = Decoder::new(s, cfg)?;
    Ok(c1.nearest_level(d.estimate_m1(y2, m2)))
}

/// T⁻¹ − I for unit lower triangular T, by forward substitution.
fn inv_minus_identity(t: &DMatrix<f64>) -> DMatrix<f64> {
    let n = t.nrows();
    solve_unit_lower_mat(t, &DMatrix::identity(n, n)) - DMatrix::identity(n, n)
}

/// Maps tilde parameters to the plain ones that produce the same transmit signals.
pub fn tilde_to_plain(t: &TildeScheme) -> LinearScheme {
    let n = t.g1t.len();
    let id = DMatrix::<f64>::identity(n, n);
    let tt = &id + &t.f2t * &t.f1t;
    let g2 = solve_unit_lower(&tt, &t.g2t);
    let f2 = solve_unit_lower_mat(&tt, &t.f2t);
    let a = &id - &t.f1t * inv_minus_identity(&tt) * &t.f2t;
    let g1 = solve_unit_lower(&a, &t.g1t);
    let f1 = solve_unit_lower_mat(&a, &t.f1t);
    LinearScheme {
        g1,
        g2,
        f1: strict_lower_part(f1),
        f2: strict_lower_part(f2),
        restricted: false,
    }
}

/// Zeroes the diagonal and upper part, removing round-off that would break the invariant.
fn strict_lower_part(mut m: DMatrix<f64>) -> DMatrix<f64> {
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            m[(i, j)] = 0.0;
        }
    }
    m
}

/// Default tolerance for [`plain_to_tilde`].
pub const TILDE_EPS: f64 = 1e-10;

/// Recovers tilde parameters from plain ones by the A/B fixed-point iteration.
pub fn plain_to_tilde(s: &LinearScheme, eps: f64) -> Result<TildeScheme> {
    let n = s.n();
    let id = DMatrix::<f64>::identity(n, n);
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DMatrix::<f64>::zeros(n, n);
    let cap = 10 * n;
    let (mut da, mut db) = (f64::INFINITY, f64::INFINITY);
    for _ in 0..cap {
        let a_new = solve_unit_lower_mat(&(&id - &s.f1 * &b), &s.f1);
        let b_new = solve_unit_lower_mat(&(&id - &s.f2 * &a_new), &s.f2) - &s.f2;
        da = fro2(&(&a_new - &a));
        db = fro2(&(&b_new - &b));
        a = a_new;
        b = b_new;
        if da <= eps && db <= eps {
            let g1t = solve_unit_lower(&(&id - &s.f1 * &b), &s.g1);
            let g2t = solve_unit_lower(&(&id - &s.f2 * &a), &s.g2);
            return Ok(TildeScheme {
                g1t,
                g2t,
                f2t: strict_lower_part(&s.f2 + &b),
                f1t: strict_lower_part(a),
            });
        }
    }
    Err(Error::ConvergenceFailure {
        iterations: cap,
        delta_a: da,
        delta_b: db,
    })
}

/// B = Q₂½ [α F₁ᵀF₁ + (1−α)(I+F₂F₁)ᵀ(I+F₂F₁)] Q₂½, the quadratic form of the
/// weighted sum-power in the whitened User 2 message direction.
pub fn weighted_power_matrix(s: &LinearScheme, cfg: &ChannelConfig, alpha: f64) -> DMatrix<f64> {
    let q2s = sym_sqrt(&compute_q2(s, cfg));
    let t = s.t21();
    let inner = s.f1.transpose() * &s.f1 * alpha + t.transpose() * &t * (1.0 - alpha);
    &q2s * inner * &q2s
}

/// Smallest eigenvalue of [`weighted_power_matrix`].
pub fn lambda_min_b(s: &LinearScheme, cfg: &ChannelConfig, alpha: f64) -> f64 {
    min_eigenvalue(&weighted_power_matrix(s, cfg, alpha))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize) -> ChannelConfig {
        ChannelConfig::new(0.7, 0.2, n, 1.0).unwrap()
    }

    #[test]
    fn profile_sums_to_block_power() {
        let n = 4;
        let f1 = DMatrix::from_fn(n, n, |i, j| if i > j { 0.3 * (i + 2 * j) as f64 - 0.5 } else { 0.0 });
        let f2 = DMatrix::from_fn(n, n, |i, j| if i > j { 0.2 - 0.1 * (i * j) as f64 } else { 0.0 });
        let s = LinearScheme::new(
            DVector::from_vec(vec![0.5, -1.0, 0.2, 0.9]),
            DVector::from_vec(vec![1.1, 0.0, -0.4, 0.3]),
            f1,
            f2,
        )
        .unwrap();
        let (e1, e2) = power_profile(&s, &cfg(n));
        let (p1, p2) = powers(&s, &cfg(n));
        assert!((e1.iter().sum::<f64>() - p1).abs() < 1e-12 * p1);
        assert!((e2.iter().sum::<f64>() - p2).abs() < 1e-12 * p2);
    }

    #[test]
    fn q_matrices_without_feedback() {
        let n = 4;
        let s = LinearScheme::new(
            DVector::from_element(n, 1.0),
            DVector::from_element(n, 1.0),
            DMatrix::zeros(n, n),
            DMatrix::zeros(n, n),
        )
        .unwrap();
        let c = cfg(n);
        assert_eq!(compute_q2(&s, &c), DMatrix::identity(n, n) * c.sigma2_sq);
        assert_eq!(compute_q1(&s, &c), DMatrix::identity(n, n) * c.sigma1_sq);
        let (p1, p2) = powers(&s, &c);
        assert_eq!((p1, p2), (4.0, 4.0));
    }

    #[test]
    fn q2_restricted_is_diagonal() {
        let n = 4;
        let sub = [0.3, -1.2];
        let s = LinearScheme::new_restricted(
            DVector::from_element(n, 1.0),
            DVector::from_element(n, 1.0),
            DMatrix::zeros(n, n),
            &sub,
        )
        .unwrap();
        let c = cfg(n);
        let q2 = compute_q2(&s, &c);
        let expect = [
            c.sigma2_sq,
            0.09 * c.sigma1_sq + c.sigma2_sq,
            1.44 * c.sigma1_sq + c.sigma2_sq,
            c.sigma2_sq,
        ];
        for i in 0..n {
            for j in 0..n {
                let e = if i == j { expect[i] } else { 0.0 };
                assert!((q2[(i, j)] - e).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn q1_two_by_two() {
        let mut f1 = DMatrix::zeros(2, 2);
        f1[(1, 0)] = 1.5;
        let s = LinearScheme::new(
            DVector::from_element(2, 1.0),
            DVector::from_element(2, 1.0),
            f1,
            DMatrix::zeros(2, 2),
        )
        .unwrap();
        let c = cfg(2);
        let q1 = compute_q1(&s, &c);
        assert!((q1[(0, 0)] - c.sigma1_sq).abs() < 1e-15);
        assert!((q1[(1, 1)] - (c.sigma1_sq + 2.25 * c.sigma2_sq)).abs() < 1e-15);
        assert_eq!(q1[(0, 1)], 0.0);
    }

    #[test]
    fn last_use_snr() {
        let n = 5;
        let a = 0.8;
        let mut g = DVector::zeros(n);
        g[n - 1] = a;
        let s = LinearScheme::new(g.clone(), g, DMatrix::zeros(n, n), DMatrix::zeros(n, n))
            .unwrap();
        let c = cfg(n);
        assert!((snr(&s, &c, 1) - a * a / c.sigma1_sq).abs() < 1e-12);
        let w = combiners(&s, &c).unwrap();
        assert!((w.w2[n - 1] - 1.0 / a).abs() < 1e-12);
        assert!(w.w2.rows(0, n - 1).iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn zero_message_is_degenerate() {
        let n = 2;
        let s = LinearScheme::new(
            DVector::zeros(n),
            DVector::from_element(n, 1.0),
            DMatrix::zeros(n, n),
            DMatrix::zeros(n, n),
        )
        .unwrap();
        assert!(matches!(
            combiners(&s, &cfg(n)),
            Err(Error::DegenerateScheme(_))
        ));
    }

    #[test]
    fn rejects_upper_entries() {
        let mut f = DMatrix::zeros(3, 3);
        f[(0, 1)] = 1.0;
        let g = DVector::from_element(3, 1.0);
        assert!(LinearScheme::new(g.clone(), g, f, DMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn tilde_identity_and_n2() {
        let g1 = DVector::from_vec(vec![0.5, -1.0]);
        let g2 = DVector::from_vec(vec![2.0, 0.1]);
        let t = TildeScheme::new(
            g1.clone(),
            g2.clone(),
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 2),
        )
        .unwrap();
        let p = tilde_to_plain(&t);
        assert_eq!(p.g1, g1);
        assert_eq!(p.g2, g2);
        let mut f1t = DMatrix::zeros(2, 2);
        f1t[(1, 0)] = 0.7;
        let mut f2t = DMatrix::zeros(2, 2);
        f2t[(1, 0)] = -0.4;
        let t = TildeScheme::new(g1, g2.clone(), f1t, f2t.clone()).unwrap();
        let p = tilde_to_plain(&t);
        assert_eq!(p.g2, g2);
        assert_eq!(p.f2, f2t);
    }

    #[test]
    fn plain_to_tilde_zero_feedback() {
        let n = 3;
        let g = DVector::from_element(n, 1.0);
        let s = LinearScheme::new(g.clone(), g.clone(), DMatrix::zeros(n, n), DMatrix::zeros(n, n))
            .unwrap();
        let t = plain_to_tilde(&s, TILDE_EPS).unwrap();
        assert_eq!(t.g1t, g);
        assert_eq!(t.f1t, DMatrix::zeros(n, n));
        assert_eq!(t.f2t, DMatrix::zeros(n, n));
    }
}
