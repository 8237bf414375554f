//! Seeded, splittable random streams.
//!
//! Every experiment run, filter step and sub-task draws from its own
//! [`RngStream`], identified by a `(seed, stream)` pair. Streams are ChaCha8
//! generators keyed by the seed with the 64-bit ChaCha stream id selecting an
//! independent sequence, so the draws of a run never depend on how runs are
//! scheduled across threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Purpose tags used when deriving per-step sub-streams inside the filters.
pub mod purpose {
    pub const PROPAGATE: u64 = 1;
    pub const PARTITION: u64 = 2;
    pub const SELECT: u64 = 3;
    pub const RESAMPLE: u64 = 4;
    pub const DATA: u64 = 5;
}

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, stream, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Fresh stream for a child task. Depends only on this stream's identity
    /// and `tag`, never on how many values have already been drawn.
    pub fn derive(&self, tag: u64) -> RngStream {
        let id = splitmix64(self.stream ^ splitmix64(tag.wrapping_add(0x5851_F42D_4C95_7F2D)));
        RngStream::new(self.seed, id)
    }

    /// Sub-stream for one purpose at one filter step.
    pub fn step(&self, t: usize, purpose: u64) -> RngStream {
        self.derive(((t as u64) << 8) | purpose)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
