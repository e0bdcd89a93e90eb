//! Deterministic random substreams.
//!
//! Every source of randomness is a ChaCha8 counter-based stream keyed by
//! (seed, index, purpose), so results are reproducible across runs and
//! independent of execution order.

use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::{Rng, SeedableRng};

/// What a substream is consumed for; part of the stream key so the same
/// (seed, index) pair can serve several independent purposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamPurpose {
    Population,
    Shuffle,
    Generic,
}

impl StreamPurpose {
    fn tag(self) -> u64 {
        match self {
            StreamPurpose::Population => 1,
            StreamPurpose::Shuffle => 2,
            StreamPurpose::Generic => 3,
        }
    }
}

fn splitmix_next(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the substream keyed by (seed, index, purpose).
pub fn substream(seed: u64, index: u64, purpose: StreamPurpose) -> ChaCha8Rng {
    let mut state = seed
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03))
        .wrapping_add(purpose.tag().wrapping_mul(0x8CB9_2BA7_2F3D_8DD7));
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix_next(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Collapses (seed, index) into one derived 64-bit seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut state = seed.wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    splitmix_next(&mut state)
}

/// Uniform f64 in [0, 1) with 53 random bits.
pub fn uniform_f64(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Unbiased integer in [0, bound) via Lemire's multiply-then-reject.
fn bounded_u64(rng: &mut ChaCha8Rng, bound: u64) -> u64 {
    debug_assert!(bound > 0);
    let mut x = rng.next_u64();
    let mut m = (x as u128) * (bound as u128);
    let mut low = m as u64;
    if low < bound {
        let threshold = bound.wrapping_neg() % bound;
        while low < threshold {
            x = rng.next_u64();
            m = (x as u128) * (bound as u128);
            low = m as u64;
        }
    }
    (m >> 64) as u64
}

/// Fisher-Yates shuffle driven by the given substream.
pub fn shuffle<T>(items: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..items.len()).rev() {
        let j = bounded_u64(rng, (i + 1) as u64) as usize;
        items.swap(i, j);
    }
}
