//! Gray-mapped PAM constellations and closed-form error rates.

use crate::error::{Error, Result};

/// Unit-power 2^k-PAM level set with binary-reflected Gray labels.
///
/// Level `j` (ascending) carries the word `j ^ (j >> 1)`, so the most
/// negative level carries the all-zero word.
#[derive(Clone, Debug, PartialEq)]
pub struct Constellation {
    k: usize,
    levels: Vec<f64>,
    words: Vec<u32>,
    index_of_word: Vec<usize>,
}

/// Largest supported bits-per-symbol.
pub const MAX_BITS: usize = 16;

impl Constellation {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 || k > MAX_BITS {
            return Err(Error::InvalidArgument(format!(
                "bits per symbol must be in 1..={MAX_BITS}, got {k}"
            )));
        }
        let m = 1usize << k;
        // Levels ±1, ±3, ... scaled so the mean square is one: d² (M² − 1)/3 = 1.
        let d = (3.0 / ((m * m - 1) as f64)).sqrt();
        let levels = (0..m)
            .map(|j| (2.0 * j as f64 - (m as f64 - 1.0)) * d)
            .collect();
        let words: Vec<u32> = (0..m as u32).map(|j| j ^ (j >> 1)).collect();
        let mut index_of_word = vec![0; m];
        for (j, &w) in words.iter().enumerate() {
            index_of_word[w as usize] = j;
        }
        Ok(Self {
            k,
            levels,
            words,
            index_of_word,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of levels, 2^k.
    pub fn size(&self) -> usize {
        self.levels.len()
    }

    /// Amplitudes in strictly increasing order.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Gray word carried by each level, in level order.
    pub fn words(&self) -> &[u32] {
        &self.words
    }

    /// Distance between adjacent levels.
    pub fn spacing(&self) -> f64 {
        self.levels[1] - self.levels[0]
    }

    /// Level carrying the packed word `w` (bit 0 of the slice is the MSB).
    pub fn level_of_word(&self, w: u32) -> f64 {
        self.levels[self.index_of_word[w as usize]]
    }

    /// Index of the level nearest to `x`; exact midpoints go to the lower level.
    pub fn nearest_index(&self, x: f64) -> usize {
        let m = self.levels.len();
        let t = (x - self.levels[0]) / self.spacing();
        let j = if t.is_nan() || t <= 0.0 {
            0
        } else {
            (t.floor() as usize).min(m - 2)
        };
        if x - self.levels[j] <= self.levels[j + 1] - x {
            j
        } else {
            j + 1
        }
    }

    /// Packed Gray word of the level nearest to `x`.
    pub fn nearest_word(&self, x: f64) -> u32 {
        self.words[self.nearest_index(x)]
    }

    /// Nearest level amplitude to `x`.
    pub fn nearest_level(&self, x: f64) -> f64 {
        self.levels[self.nearest_index(x)]
    }
}

/// Packs a bit slice, first entry most significant.
pub fn pack_bits(bits: &[u8]) -> u32 {
    bits.iter().fold(0, |acc, &b| (acc << 1) | (b & 1) as u32)
}

/// Unpacks the low `k` bits of `w`, most significant first.
pub fn unpack_bits(w: u32, k: usize) -> Vec<u8> {
    (0..k).rev().map(|i| ((w >> i) & 1) as u8).collect()
}

/// Maps a k-bit word to its constellation level.
pub fn modulate(bits: &[u8], c: &Constellation) -> Result<f64> {
    if bits.len() != c.k {
        return Err(Error::InvalidArgument(format!(
            "expected {} bits, got {}",
            c.k,
            bits.len()
        )));
    }
    if bits.iter().any(|&b| b > 1) {
        return Err(Error::InvalidArgument("bits must be 0 or 1".into()));
    }
    Ok(c.level_of_word(pack_bits(bits)))
}

/// Hard decision: the word of the nearest level.
pub fn demodulate(estimate: f64, c: &Constellation) -> Result<Vec<u8>> {
    if !estimate.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "estimate must be finite, got {estimate}"
        )));
    }
    Ok(unpack_bits(c.nearest_word(estimate), c.k))
}

/// Gaussian tail probability Q(x).
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Symbol error probability of unit-power 2^k-PAM at post-processing SNR `snr`.
pub fn bler_theory(k: usize, snr: f64) -> f64 {
    assert!(snr >= 0.0, "snr must be nonnegative");
    let m = (1u64 << k) as f64;
    let coeff = 2.0 * (m - 1.0) / m;
    coeff * q_function((3.0 * snr / (m * m - 1.0)).sqrt())
}
