//! Seeded randomness.
//!
//! Every random object is drawn from ChaCha8, a counter-based generator. A
//! 64-bit seed selects the key, and independent pieces of one operator (sign
//! diagonal, row sample, row `k` of a dense sketch) read from distinct ChaCha
//! streams of that key. Any piece can therefore be regenerated on any thread
//! without replaying the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::matcore::DenseMatrix;

/// Stream of the ±1 diagonal of a randomized Hadamard transform.
pub const STREAM_SIGNS: u64 = 0;
/// Stream of the row sample of an SRHT.
pub const STREAM_ROW_SAMPLE: u64 = 1;
/// Row `k` of a dense sketch reads stream `STREAM_DENSE_ROWS + k`.
pub const STREAM_DENSE_ROWS: u64 = 1 << 32;

/// Generator for stream `stream` under key `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finalizer; derives an independent child seed.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `rows x cols` matrix of i.i.d. N(0, 1) entries, row `i` drawn from its own stream.
pub fn seeded_gaussian_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut data = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        let mut rng = stream_rng(seed, STREAM_DENSE_ROWS + i as u64);
        data.extend((0..cols).map(|_| -> f64 { StandardNormal.sample(&mut rng) }));
    }
    DenseMatrix::from_raw(rows, cols, data)
}
