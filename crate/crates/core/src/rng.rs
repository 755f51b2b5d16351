//! Deterministic random streams.
//!
//! Every random draw in the library comes from a ChaCha8 stream keyed by a
//! user seed, a domain tag and a stream index (usually the step `h`). Sample
//! `i` of a stream starts at a fixed word offset, so a draw is a function of
//! `(seed, domain, stream, i)` alone and generation order does not matter.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Words reserved per sample when streams are indexed by sample.
pub const WORDS_PER_SAMPLE: u128 = 16;

/// Domain tags that separate independent uses of one seed.
pub mod domain {
    pub const DATASET: u64 = 0x6461_7461;
    pub const SPLIT: u64 = 0x7370_6c74;
    pub const FLAT_SPLIT: u64 = 0x666c_6174;
}

/// A ChaCha8 generator for `(seed, domain, stream)`.
pub fn keyed_stream(seed: u64, domain: u64, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}

/// Positions `rng` at the first word reserved for sample `index`.
pub fn seek_sample(rng: &mut ChaCha8Rng, index: usize) {
    rng.set_word_pos(index as u128 * WORDS_PER_SAMPLE);
}
