//! Seeded random streams.
//!
//! Every run has one root seed. Each consumer (basis choice, parameter
//! initialization, shot sampling, minibatches, ...) draws from its own ChaCha
//! stream derived from that seed, so adding draws in one place never shifts
//! the numbers seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Basis = 1,
    Init = 2,
    Shots = 3,
    Minibatch = 4,
    Latent = 5,
    Split = 6,
    Synth = 7,
    Scoring = 8,
    Bootstrap = 9,
}

pub fn stream(seed: u64, purpose: Stream) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose as u64);
    rng
}

/// Stream for an indexed sub-task (one scored sample, one restart, ...).
///
/// Indexed streams live above the fixed purposes so they never collide.
pub fn indexed_stream(seed: u64, purpose: Stream, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 48) | (index & ((1 << 48) - 1)));
    rng
}
