//! Reproducible random streams.
//!
//! Every experiment owns a master seed. Independent tasks (one τ point, one
//! IPEA iteration, one bootstrap replicate) draw from ChaCha streams keyed by
//! a path of integers, so results do not depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type StreamRng = ChaCha12Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Factory for keyed sub-streams of one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    master: u64,
}

impl Streams {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// Stream for the task identified by `path`, e.g. `[tau_index, iteration]`.
    pub fn stream(&self, path: &[u64]) -> StreamRng {
        let mut key = splitmix64(0x5EED_0000 ^ path.len() as u64);
        for &p in path {
            key = splitmix64(key ^ p);
        }
        let mut seed = [0u8; 32];
        let mut s = self.master;
        for chunk in seed.chunks_mut(8) {
            s = splitmix64(s);
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        let mut rng = ChaCha12Rng::from_seed(seed);
        rng.set_stream(key);
        rng
    }
}
