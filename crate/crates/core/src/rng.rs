//! Named, independent random streams.
//!
//! Every random decision in a simulation draws from a stream identified by
//! `(seed, stream, key)`. Streams never share state, so adding draws to one
//! subsystem leaves every other subsystem's sequence untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stream {
    Traffic,
    Auction,
    Feedback,
    Exploration,
    Estimator,
    World,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Traffic => 0x7472_6166,
            Stream::Auction => 0x6175_6374,
            Stream::Feedback => 0x6665_6564,
            Stream::Exploration => 0x6578_706c,
            Stream::Estimator => 0x6573_7469,
            Stream::World => 0x776f_726c,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedStreams {
    seed: u64,
}

impl SeedStreams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Stream for one slot of one simulated day.
    pub fn slot(&self, stream: Stream, day: u32, slot: usize) -> ChaCha8Rng {
        self.keyed(stream, (u64::from(day) << 32) | slot as u64)
    }

    /// Stream for an arbitrary key, e.g. a request id.
    pub fn keyed(&self, stream: Stream, key: u64) -> ChaCha8Rng {
        let mut seed = [0u8; 32];
        seed[..8].copy_from_slice(&self.seed.to_le_bytes());
        seed[8..16].copy_from_slice(&stream.tag().to_le_bytes());
        seed[16..24].copy_from_slice(&key.to_le_bytes());
        ChaCha8Rng::from_seed(seed)
    }
}
