//! Monte Carlo error rates, baselines and the CSV result format.
//!
//! Trials are split into fixed chunks of [`CHUNK`] trials; chunk `c` draws
//! from the ChaCha stream `c` of the run seed, so results do not depend on
//! how chunks are spread over threads. Chunks are processed in rounds and the
//! early stop is only checked between rounds.

use crate::channel::{exchange_into, fill_noise, ChannelConfig, TrialKey};
use crate::compose::{AlternatePlan, CompositeTrace, Scratch};
use crate::design::DesignSolution;
use crate::error::{Error, Result};
use crate::pam::Constellation;
use crate::scheme::Decoder;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

/// Trials per RNG stream.
pub const CHUNK: u64 = 1 << 14;

/// Chunks per round between early-stop checks.
const ROUND: u64 = 32;

/// Exact CSV header shared by every producer of simulation results.
pub const CSV_HEADER: &str = "scheme,k1,k2,n,snr1_db,snr2_db,ber1,ber2,bler1,bler2,sum_ber,sum_bler,trials,seed";

/// Monte Carlo settings.
#[derive(Clone, Debug)]
pub struct SimOptions {
    pub trials: u64,
    pub seed: u64,
    /// Stop once both users have at least this many block errors.
    pub early_stop: Option<u64>,
    /// Replace the channel noise by zeros.
    pub noiseless: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            trials: 10_000_000,
            seed: 0,
            early_stop: Some(1000),
            noiseless: false,
        }
    }
}

/// Estimated error rates of one configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimResult {
    pub scheme: String,
    pub k1: usize,
    pub k2: usize,
    pub n: usize,
    pub snr1_db: f64,
    pub snr2_db: f64,
    pub ber1: f64,
    pub ber2: f64,
    pub bler1: f64,
    pub bler2: f64,
    pub trials: u64,
    pub seed: u64,
    pub block_errors: [u64; 2],
    pub bit_errors: [u64; 2],
}

impl SimResult {
    pub fn sum_ber(&self) -> f64 {
        self.ber1 + self.ber2
    }

    pub fn sum_bler(&self) -> f64 {
        self.bler1 + self.bler2
    }

    /// Binomial standard error of BLERᵢ.
    pub fn bler_std_err(&self, user: usize) -> f64 {
        let p = if user == 1 { self.bler1 } else { self.bler2 };
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }

    pub fn to_row(&self) -> CsvRow {
        CsvRow {
            scheme: self.scheme.clone(),
            k1: self.k1,
            k2: self.k2,
            n: self.n,
            snr1_db: self.snr1_db,
            snr2_db: self.snr2_db,
            ber1: self.ber1,
            ber2: self.ber2,
            bler1: self.bler1,
            bler2: self.bler2,
            sum_ber: self.sum_ber(),
            sum_bler: self.sum_bler(),
            trials: self.trials,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct Tally {
    trials: u64,
    blocks: [u64; 2],
    bits: [u64; 2],
}

impl Tally {
    fn merge(mut self, o: Tally) -> Tally {
        self.trials += o.trials;
        for u in 0..2 {
            self.blocks[u] += o.blocks[u];
            self.bits[u] += o.bits[u];
        }
        self
    }

    fn record(&mut self, user: usize, sent: u32, got: u32) {
        let diff = (sent ^ got).count_ones() as u64;
        self.bits[user] += diff;
        self.blocks[user] += (diff > 0) as u64;
    }
}

/// Runs `f(stream, count)` over fixed chunks covering `units` trials.
fn run_chunks<F>(units: u64, early_stop: Option<u64>, f: F) -> Tally
where
    F: Fn(u64, u64) -> Tally + Sync,
{
    let chunks = units.div_ceil(CHUNK);
    let mut total = Tally::default();
    let mut next = 0;
    while next < chunks {
        let end = (next + ROUND).min(chunks);
        let round = (next..end)
            .into_par_iter()
            .map(|c| f(c, CHUNK.min(units - c * CHUNK)))
            .reduce(Tally::default, Tally::merge);
        total = total.merge(round);
        next = end;
        if early_stop.is_some_and(|e| total.blocks[0] >= e && total.blocks[1] >= e) {
            break;
        }
    }
    total
}

fn check_orders(d: &DesignSolution, c1: &Constellation, c2: &Constellation) -> Result<()> {
    if c1.k() != d.k1 || c2.k() != d.k2 {
        return Err(Error::InvalidArgument(format!(
            "constellations carry ({}, {}) bits, design expects ({}, {})",
            c1.k(),
            c2.k(),
            d.k1,
            d.k2
        )));
    }
    Ok(())
}

fn finish(scheme: &str, cfg: &ChannelConfig, k: [usize; 2], t: Tally, seed: u64) -> SimResult {
    let n = t.trials.max(1) as f64;
    SimResult {
        scheme: scheme.to_string(),
        k1: k[0],
        k2: k[1],
        n: cfg.n,
        snr1_db: cfg.snr_ch_db(1),
        snr2_db: cfg.snr_ch_db(2),
        ber1: t.bits[0] as f64 / (n * k[0] as f64),
        ber2: t.bits[1] as f64 / (n * k[1] as f64),
        bler1: t.blocks[0] as f64 / n,
        bler2: t.blocks[1] as f64 / n,
        trials: t.trials,
        seed,
        block_errors: t.blocks,
        bit_errors: t.bits,
    }
}

/// Error rates of a single-pair linear design.
pub fn simulate_linear(
    d: &DesignSolution,
    c1: &Constellation,
    c2: &Constellation,
    opts: &SimOptions,
) -> Result<SimResult> {
    check_orders(d, c1, c2)?;
    let dec = Decoder::new(&d.scheme, &d.cfg)?;
    let n = d.scheme.n();
    let key = TrialKey::new(opts.seed);
    let tally = run_chunks(opts.trials, opts.early_stop, |chunk, count| {
        let mut rng = key.rng(chunk);
        let mut buf = vec![vec![0.0; n]; 7];
        let [n1, n2, x1, x2, y1, y2, z1] = &mut buf[..] else {
            unreachable!()
        };
        let mut r = vec![0.0; n];
        let mut t = Tally::default();
        for _ in 0..count {
            let w1 = rng.random_range(0..c1.size() as u32);
            let w2 = rng.random_range(0..c2.size() as u32);
            let (m1, m2) = (c1.level_of_word(w1), c2.level_of_word(w2));
            if !opts.noiseless {
                fill_noise(&d.cfg, &mut rng, n1, n2);
            }
            exchange_into(&d.scheme, m1, m2, n1, n2, x1, x2, y1, y2, z1);
            let m2_hat = dec.estimate_m2(y1, m1, &mut r);
            let m1_hat = dec.estimate_m1(y2, m2);
            t.record(0, w1, c1.nearest_word(m1_hat));
            t.record(1, w2, c2.nearest_word(m2_hat));
            t.trials += 1;
        }
        t
    });
    Ok(finish("linear", &d.cfg, [d.k1, d.k2], tally, opts.seed))
}

/// Error rates of a two-pair interleaved block; `trials` counts message pairs.
pub fn simulate_alternate(
    plan: &AlternatePlan,
    c1: &Constellation,
    c2: &Constellation,
    opts: &SimOptions,
) -> Result<SimResult> {
    let d = &plan.designs[0];
    for d in &plan.designs {
        check_orders(d, c1, c2)?;
    }
    let cfg = plan.composite_cfg();
    let len = plan.len();
    let key = TrialKey::new(opts.seed);
    let blocks = opts.trials.div_ceil(2);
    let tally = run_chunks(blocks, opts.early_stop, |chunk, count| {
        let mut rng = key.rng(chunk);
        let (mut n1, mut n2) = (vec![0.0; len], vec![0.0; len]);
        let mut tr = CompositeTrace {
            x1: vec![0.0; len],
            x2: vec![0.0; len],
            y1: vec![0.0; len],
            y2: vec![0.0; len],
        };
        let mut sc = Scratch::new(len - 1);
        let mut t = Tally::default();
        for _ in 0..count {
            let mut w1 = [0u32; 2];
            let mut w2 = [0u32; 2];
            for p in 0..2 {
                w1[p] = rng.random_range(0..c1.size() as u32);
                w2[p] = rng.random_range(0..c2.size() as u32);
            }
            let m1 = [c1.level_of_word(w1[0]), c1.level_of_word(w1[1])];
            let m2 = [c2.level_of_word(w2[0]), c2.level_of_word(w2[1])];
            if !opts.noiseless {
                fill_noise(&cfg, &mut rng, &mut n1, &mut n2);
            }
            plan.run_into(m1, m2, &n1, &n2, &mut tr, &mut sc);
            let (m2_hat, m1_hat) = plan.estimate_with(&tr, m1, m2, &mut sc);
            for p in 0..2 {
                t.record(0, w1[p], c1.nearest_word(m1_hat[p]));
                t.record(1, w2[p], c2.nearest_word(m2_hat[p]));
            }
            t.trials += 2;
        }
        t
    });
    Ok(finish("linear-alternate", &cfg, [d.k1, d.k2], tally, opts.seed))
}

/// BPSK with each of `l` bits sent `reps` times and matched-filter combining.
/// `cfg.n` must equal `l·reps`; a block is the whole `l`-bit payload.
pub fn simulate_repetition(cfg: &ChannelConfig, l: usize, reps: usize, opts: &SimOptions) -> Result<SimResult> {
    if l == 0 || reps == 0 || l * reps != cfg.n {
        return Err(Error::InvalidArgument(format!(
            "{l} bits x {reps} repetitions do not fill {} uses",
            cfg.n
        )));
    }
    if l > 32 {
        return Err(Error::InvalidArgument("at most 32 bits per block".into()));
    }
    let amp = cfg.p.sqrt();
    let sigma = [cfg.sigma1_sq.sqrt(), cfg.sigma2_sq.sqrt()];
    let key = TrialKey::new(opts.seed);
    let tally = run_chunks(opts.trials, opts.early_stop, |chunk, count| {
        let mut rng = key.rng(chunk);
        let mut t = Tally::default();
        for _ in 0..count {
            for (user, s) in sigma.iter().enumerate() {
                let mut sent = 0u32;
                let mut got = 0u32;
                for _ in 0..l {
                    let b = rng.random::<bool>() as u32;
                    let x = if b == 1 { amp } else { -amp };
                    let mut acc = 0.0;
                    for _ in 0..reps {
                        let z: f64 = if opts.noiseless {
                            0.0
                        } else {
                            rng.sample(rand_distr::StandardNormal)
                        };
                        acc += x + s * z;
                    }
                    sent = (sent << 1) | b;
                    got = (got << 1) | (acc > 0.0) as u32;
                }
                t.record(user, sent, got);
            }
            t.trials += 1;
        }
        t
    });
    Ok(finish("repetition", cfg, [l, l], tally, opts.seed))
}

/// Normal-approximation converse for `k_bits` over `n_uses` real AWGN uses:
/// Q((nC − k)/√(nV)) with C = ½log₂(1+snr) and the AWGN dispersion V in bits².
pub fn ol_lower_bound(k_bits: f64, n_uses: f64, snr: f64) -> f64 {
    let c = 0.5 * (1.0 + snr).log2();
    let v = snr * (snr + 2.0) / (2.0 * (snr + 1.0).powi(2)) * std::f64::consts::LOG2_E.powi(2);
    crate::pam::q_function((n_uses * c - k_bits) / (n_uses * v).sqrt())
}

/// One CSV record in the shared result schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub scheme: String,
    pub k1: usize,
    pub k2: usize,
    pub n: usize,
    pub snr1_db: f64,
    pub snr2_db: f64,
    pub ber1: f64,
    pub ber2: f64,
    pub bler1: f64,
    pub bler2: f64,
    pub sum_ber: f64,
    pub sum_bler: f64,
    pub trials: u64,
    pub seed: u64,
}

fn sci(v: f64) -> String {
    format!("{v:.5e}")
}

/// Writes the header and one line per row; floats carry 6 significant digits.
pub fn write_csv<W: Write>(w: W, rows: &[CsvRow]) -> Result<()> {
    write_rows(w, rows, true)
}

/// Appends rows to `path`, writing the header first if the file is new or
/// empty and refusing files whose header differs.
pub fn append_csv(path: &Path, rows: &[CsvRow]) -> Result<()> {
    let fresh = match std::fs::read_to_string(path) {
        Ok(text) => {
            if let Some(first) = text.lines().next() {
                if first.trim_end() != CSV_HEADER {
                    return Err(Error::Data(format!(
                        "{} has a different header: {first}",
                        path.display()
                    )));
                }
                false
            } else {
                true
            }
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => true,
        Err(e) => return Err(e.into()),
    };
    let f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    write_rows(f, rows, fresh)
}

fn write_rows<W: Write>(w: W, rows: &[CsvRow], header: bool) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    if header {
        out.write_record(CSV_HEADER.split(','))?;
    }
    for r in rows {
        out.write_record([
            r.scheme.clone(),
            r.k1.to_string(),
            r.k2.to_string(),
            r.n.to_string(),
            sci(r.snr1_db),
            sci(r.snr2_db),
            sci(r.ber1),
            sci(r.ber2),
            sci(r.bler1),
            sci(r.bler2),
            sci(r.sum_ber),
            sci(r.sum_bler),
            r.trials.to_string(),
            r.seed.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Parses a results file, rejecting any header other than [`CSV_HEADER`].
pub fn read_csv<R: Read>(r: R) -> Result<Vec<CsvRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let header: Vec<&str> = rd.headers()?.iter().collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Data(format!("unexpected CSV header: {}", header.join(","))));
    }
    rd.deserialize().map(|r| r.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pam::q_function;

    #[test]
    fn header_matches_row_fields() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim_end(), CSV_HEADER);
    }

    #[test]
    fn floats_keep_six_digits() {
        assert_eq!(sci(6.4712345e-5), "6.47123e-5");
        assert_eq!(sci(0.0), "0.00000e0");
    }

    #[test]
    fn wrong_header_is_rejected() {
        let text = "scheme,k1\nx,1\n";
        assert!(matches!(read_csv(text.as_bytes()), Err(Error::Data(_))));
    }

    #[test]
    fn bound_is_half_at_capacity() {
        let snr = 10f64.powf(0.1);
        let n = 18.0;
        let k = n * 0.5 * (1.0 + snr).log2();
        assert!((ol_lower_bound(k, n, snr) - 0.5).abs() < 1e-15);
        assert!(ol_lower_bound(6.0, 18.0, 1e12) < 1e-300);
    }

    #[test]
    fn repetition_noiseless_is_error_free() {
        let cfg = ChannelConfig::from_snr_db(1.0, 1.0, 6, 1.0).unwrap();
        let opts = SimOptions {
            trials: 1000,
            noiseless: true,
            ..SimOptions::default()
        };
        let r = simulate_repetition(&cfg, 2, 3, &opts).unwrap();
        assert_eq!(r.bit_errors, [0, 0]);
        assert_eq!(r.trials, 1000);
    }

    #[test]
    fn repetition_matches_combining_formula() {
        let cfg = ChannelConfig::from_snr_db(1.0, 4.0, 3, 1.0).unwrap();
        let opts = SimOptions {
            trials: 400_000,
            early_stop: None,
            seed: 9,
            ..SimOptions::default()
        };
        let r = simulate_repetition(&cfg, 1, 3, &opts).unwrap();
        for (ber, snr) in [(r.ber1, cfg.snr_ch(1)), (r.ber2, cfg.snr_ch(2))] {
            let p = q_function((3.0 * snr).sqrt());
            let se = (p * (1.0 - p) / r.trials as f64).sqrt();
            assert!((ber - p).abs() < 4.0 * se, "{ber} vs {p}");
        }
    }

    #[test]
    fn early_stop_is_round_aligned() {
        let cfg = ChannelConfig::from_snr_db(-5.0, -5.0, 1, 1.0).unwrap();
        let opts = SimOptions {
            trials: 100 * CHUNK * ROUND,
            early_stop: Some(10),
            ..SimOptions::default()
        };
        let r = simulate_repetition(&cfg, 1, 1, &opts).unwrap();
        assert_eq!(r.trials, CHUNK * ROUND);
    }
}
