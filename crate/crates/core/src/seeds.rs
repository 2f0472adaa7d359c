//! Named, independently seeded random streams.
//!
//! Every consumer of randomness asks for its own stream by name, so adding
//! draws in one subsystem never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub const OBSTACLE_MOTION: &str = "obstacle-motion";
pub const TARGET_PLACEMENT: &str = "target-placement";
pub const ROADMAP: &str = "roadmap";
pub const TRAINING_SHUFFLE: &str = "training-shuffle";
pub const TRAINING_INIT: &str = "training-init";
pub const DATASET: &str = "dataset";
pub const AGENT_TARGETS: &str = "agent-targets";

pub type StreamRng = ChaCha8Rng;

/// Deterministic RNG for `(master, name)`.
pub fn stream(master: u64, name: &str) -> StreamRng {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(name.as_bytes());
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(seed)
}

/// Stream derived from a parent seed and an index, e.g. one per model or episode.
pub fn indexed_stream(master: u64, name: &str, index: u64) -> StreamRng {
    stream(master, &format!("{name}/{index}"))
}
