//! Reproducible random streams.
//!
//! A stream is addressed by `(seed, stream_id)` and backed by ChaCha8, whose
//! 64-bit stream selector gives independent keystreams for the same key. The
//! output of a stream never depends on which other streams were consumed or in
//! what order, so replication `r` of an experiment can run on any thread.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

/// Distinct uses of randomness within one replication get distinct keys.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Purpose {
    Lifetimes,
    Censoring,
    Limit,
    Calibration,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Lifetimes => 0,
            Purpose::Censoring => 1,
            Purpose::Limit => 2,
            Purpose::Calibration => 3,
        }
    }
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStream { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Same stream id under a key derived from `(seed, purpose)`.
    pub fn for_purpose(&self, purpose: Purpose) -> RngStream {
        if purpose == Purpose::Lifetimes {
            return *self;
        }
        RngStream {
            seed: splitmix64(self.seed ^ splitmix64(purpose.tag())),
            stream_id: self.stream_id,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
