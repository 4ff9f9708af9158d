//! Deterministic random streams keyed by `(master_seed, label)`.
//!
//! Every `(angle, block, wing)` work unit owns its own ChaCha8 stream, so the
//! sample sequence seen by a unit does not depend on which thread runs it or
//! in which order units are scheduled.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

/// Which consumer inside a work unit draws from the stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Wing {
    Source,
    Analyzer1,
    Analyzer2,
}

impl Wing {
    fn tag(self) -> u8 {
        match self {
            Wing::Source => 1,
            Wing::Analyzer1 => 2,
            Wing::Analyzer2 => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct StreamLabel {
    pub angle_index: u32,
    pub block_index: u32,
    pub wing: Wing,
}

impl StreamLabel {
    pub fn new(angle_index: u32, block_index: u32, wing: Wing) -> Self {
        StreamLabel {
            angle_index,
            block_index,
            wing,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RandomStream {
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(master_seed: u64, label: StreamLabel) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&master_seed.to_le_bytes());
        key[8..12].copy_from_slice(&label.angle_index.to_le_bytes());
        key[12..16].copy_from_slice(&label.block_index.to_le_bytes());
        key[16] = label.wing.tag();
        RandomStream {
            rng: ChaCha8Rng::from_seed(key),
        }
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn unit(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform on `[-1, 1)`; `2x - 1` is exact for 53-bit `x`.
    #[inline]
    pub fn symmetric_unit(&mut self) -> f64 {
        2.0 * self.unit() - 1.0
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
