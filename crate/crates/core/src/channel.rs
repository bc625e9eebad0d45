//! Two-way AWGN channel: configuration, counter-keyed noise, causal exchange.

use crate::error::{Error, Result};
use crate::scheme::LinearScheme;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Noise variances, block length and per-use power of one exchange.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    /// Noise variance on the User 1 → User 2 link.
    pub sigma1_sq: f64,
    /// Noise variance on the User 2 → User 1 link.
    pub sigma2_sq: f64,
    /// Channel uses per block.
    pub n: usize,
    /// Average power per channel use.
    pub p: f64,
}

impl ChannelConfig {
    pub fn new(sigma1_sq: f64, sigma2_sq: f64, n: usize, p: f64) -> Result<Self> {
        let cfg = Self {
            sigma1_sq,
            sigma2_sq,
            n,
            p,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Builds a configuration from channel SNRs in dB, with σᵢ² = P·10^(−SNRᵢ/10).
    pub fn from_snr_db(snr1_db: f64, snr2_db: f64, n: usize, p: f64) -> Result<Self> {
        Self::new(
            p * 10f64.powf(-snr1_db / 10.0),
            p * 10f64.powf(-snr2_db / 10.0),
            n,
            p,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.sigma1_sq) || !ok(self.sigma2_sq) || !ok(self.p) || self.n == 0 {
            return Err(Error::InvalidArgument(format!(
                "channel config needs positive finite variances, power and n: {self:?}"
            )));
        }
        Ok(())
    }

    /// Channel SNR of link `user` (1 or 2), P/σᵢ².
    pub fn snr_ch(&self, user: usize) -> f64 {
        match user {
            1 => self.p / self.sigma1_sq,
            _ => self.p / self.sigma2_sq,
        }
    }

    pub fn snr_ch_db(&self, user: usize) -> f64 {
        10.0 * self.snr_ch(user).log10()
    }

    /// Same noise and power, different block length.
    pub fn with_n(&self, n: usize) -> Self {
        Self { n, ..*self }
    }
}

/// Deterministic generator for trial `trial` under `seed`.
///
/// The seed selects the ChaCha key and the trial index selects the stream,
/// so any trial can be regenerated without replaying the ones before it.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Reusable key so hot loops do not re-expand the seed for every trial.
#[derive(Clone, Debug)]
pub struct TrialKey(ChaCha8Rng);

impl TrialKey {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn rng(&self, trial: u64) -> ChaCha8Rng {
        let mut rng = self.0.clone();
        rng.set_stream(trial);
        rng.set_word_pos(0);
        rng
    }
}

/// Fills `n1`, `n2` with independent zero-mean Gaussians of the configured variances.
pub fn fill_noise<R: Rng>(cfg: &ChannelConfig, rng: &mut R, n1: &mut [f64], n2: &mut [f64]) {
    let (s1, s2) = (cfg.sigma1_sq.sqrt(), cfg.sigma2_sq.sqrt());
    for v in n1.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v = s1 * z;
    }
    for v in n2.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v = s2 * z;
    }
}

/// One block of noise for both links, reproducible from `seed`.
pub fn draw_noise(cfg: &ChannelConfig, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut n1 = vec![0.0; cfg.n];
    let mut n2 = vec![0.0; cfg.n];
    fill_noise(cfg, &mut trial_rng(seed, 0), &mut n1, &mut n2);
    (n1, n2)
}

/// Everything transmitted and received during one block.
#[derive(Clone, Debug, PartialEq)]
pub struct ExchangeTrace {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    pub n1: Vec<f64>,
    pub n2: Vec<f64>,
}

/// Runs one block of the linear scheme, one channel use at a time.
pub fn run_exchange(
    scheme: &LinearScheme,
    m1: f64,
    m2: f64,
    n1: &[f64],
    n2: &[f64],
) -> Result<ExchangeTrace> {
    let n = scheme.n();
    if n1.len() != n || n2.len() != n {
        return Err(Error::InvalidArgument(format!(
            "noise length ({}, {}) does not match scheme size {n}",
            n1.len(),
            n2.len()
        )));
    }
    let mut t = ExchangeTrace {
        x1: vec![0.0; n],
        x2: vec![0.0; n],
        y1: vec![0.0; n],
        y2: vec![0.0; n],
        n1: n1.to_vec(),
        n2: n2.to_vec(),
    };
    let mut z1 = vec![0.0; n];
    exchange_into(
        scheme, m1, m2, n1, n2, &mut t.x1, &mut t.x2, &mut t.y1, &mut t.y2, &mut z1,
    );
    Ok(t)
}

/// Allocation-free core of [`run_exchange`]; `z1` is scratch.
///
/// At use k User 1 sends first, then User 2. User 1 feeds back
/// z₁ = y₁ − F₂x₁, which only needs its own earlier symbols.
#[allow(clippy::too_many_arguments)]
pub(crate) fn exchange_into(
    s: &LinearScheme,
    m1: f64,
    m2: f64,
    n1: &[f64],
    n2: &[f64],
    x1: &mut [f64],
    x2: &mut [f64],
    y1: &mut [f64],
    y2: &mut [f64],
    z1: &mut [f64],
) {
    let n = s.n();
    for k in 0..n {
        let mut a = s.g1[k] * m1;
        for j in 0..k {
            a += s.f1[(k, j)] * z1[j];
        }
        x1[k] = a;
        y2[k] = a + n1[k];

        let mut b = s.g2[k] * m2;
        for j in 0..k {
            b += s.f2[(k, j)] * y2[j];
        }
        x2[k] = b;
        y1[k] = b + n2[k];

        let mut z = y1[k];
        for j in 0..k {
            z -= s.f2[(k, j)] * x1[j];
        }
        z1[k] = z;
    }
}
