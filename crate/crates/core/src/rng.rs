//! Reproducible random streams.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] seeded through
//! [`RngSeed`]. ChaCha8 is a counter-based stream cipher generator whose output
//! is fixed by its 256-bit key, so a given seed yields the same stream on every
//! platform. A `u64` seed is expanded into the key with `SeedableRng::seed_from_u64`
//! (a PCG32 expansion defined by `rand_core`).
//!
//! Independent sub-streams (one per descent step, one per experiment run, ...)
//! are obtained with [`RngSeed::derive`], which mixes the parent seed and a
//! stream identifier through the SplitMix64 finalizer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn new(seed: u64) -> Self {
        RngSeed(seed)
    }

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Child seed for sub-stream `stream`: `splitmix64(seed ^ splitmix64(stream))`.
    pub fn derive(self, stream: u64) -> RngSeed {
        RngSeed(splitmix64(self.0 ^ splitmix64(stream)))
    }
}

impl From<u64> for RngSeed {
    fn from(seed: u64) -> Self {
        RngSeed(seed)
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
