//! Seeded sampling. Everything random in the crate flows through here so
//! results are a pure function of `(seed, shape)`.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::matrix::Matrix;

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Mix a base seed with a path of stream identifiers into an independent seed.
pub fn derive_seed(seed: u64, stream: &[u64]) -> u64 {
    stream
        .iter()
        .fold(splitmix64(seed), |acc, &s| splitmix64(acc ^ splitmix64(s)))
}

/// Stable hash of a row's bit pattern (FNV-1a over the IEEE bits).
pub fn content_hash(values: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in values {
        for b in v.to_bits().to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

pub fn standard_normal(rng: &mut Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// `rows x cols` draws from `N(mean, stddev²)` using an existing generator.
pub fn gaussian_fill(rng: &mut Rng, rows: usize, cols: usize, mean: f64, stddev: f64) -> Matrix {
    assert!(stddev >= 0.0, "stddev must be nonnegative, got {stddev}");
    if stddev == 0.0 {
        return Matrix::filled(rows, cols, mean);
    }
    Matrix::from_fn(rows, cols, |_, _| mean + stddev * standard_normal(rng))
}

/// `rows x cols` draws from `N(mean, stddev²)`, deterministic in `seed`.
pub fn gaussian_sample(rows: usize, cols: usize, mean: f64, stddev: f64, seed: u64) -> Matrix {
    gaussian_fill(&mut rng(seed), rows, cols, mean, stddev)
}
