//! Deterministic random streams.
//!
//! A [`RngStream`] names a ChaCha8 key (derived from the master seed and a
//! stream id). Individual Monte Carlo samples draw from the ChaCha stream
//! selected by their sample index, so a sample's randomness never depends on
//! which worker computed it.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

static GENERATORS_OPENED: AtomicU64 = AtomicU64::new(0);

/// Number of generators handed out by [`RngStream::rng_for`] in this
/// process. Lets callers check that a code path never sampled.
pub fn generators_opened() -> u64 {
    GENERATORS_OPENED.load(Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Generator for the whole stream (ChaCha stream 0).
    pub fn rng(&self) -> ChaCha8Rng {
        self.rng_for(0)
    }

    /// Generator for sample `index` of this stream.
    pub fn rng_for(&self, index: u64) -> ChaCha8Rng {
        GENERATORS_OPENED.fetch_add(1, Ordering::Relaxed);
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.stream.to_le_bytes());
        key[16..24].copy_from_slice(b"andersn1");
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(index);
        rng
    }

    /// A named sub-stream, independent of the parent and of other tags.
    pub fn child(&self, tag: u64) -> Self {
        Self {
            seed: self.seed,
            stream: splitmix64(self.stream ^ splitmix64(tag.wrapping_add(0x5851_f42d_4c95_7f2d))),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
