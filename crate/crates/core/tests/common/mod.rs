#![allow(dead_code)]

use gtwc_core::{ChannelConfig, LinearScheme};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_strict_lower<R: Rng>(rng: &mut R, n: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if i > j { rng.random_range(-scale..scale) } else { 0.0 })
}

pub fn random_vector<R: Rng>(rng: &mut R, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-scale..scale))
}

pub fn random_scheme<R: Rng>(rng: &mut R, n: usize) -> LinearScheme {
    LinearScheme::new(
        random_vector(rng, n, 1.0),
        random_vector(rng, n, 1.0),
        random_strict_lower(rng, n, 0.8),
        random_strict_lower(rng, n, 0.8),
    )
    .unwrap()
}

/// Restricted scheme with f₂ entries drawn from (−1, 1) and random g's.
pub fn random_restricted<R: Rng>(rng: &mut R, n: usize) -> LinearScheme {
    let sub: Vec<f64> = (0..n.saturating_sub(2)).map(|_| rng.random_range(-1.0..1.0)).collect();
    LinearScheme::new_restricted(
        random_vector(rng, n, 1.0),
        random_vector(rng, n, 1.0),
        random_strict_lower(rng, n, 0.8),
        &sub,
    )
    .unwrap()
}

pub fn random_cfg<R: Rng>(rng: &mut R, n: usize) -> ChannelConfig {
    ChannelConfig::new(rng.random_range(0.05..1.5), rng.random_range(0.05..1.5), n, 1.0).unwrap()
}

/// Sample covariance of the columns returned by `draw`, over `trials` draws.
pub fn sample_cov(n: usize, trials: usize, mut draw: impl FnMut() -> DVector<f64>) -> DMatrix<f64> {
    let mut acc = DMatrix::zeros(n, n);
    for _ in 0..trials {
        let v = draw();
        acc += &v * v.transpose();
    }
    acc / trials as f64
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}
