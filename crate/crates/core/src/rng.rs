//! Seeded random streams.
//!
//! Every run derives all of its randomness from one master seed. The
//! generator is ChaCha8 (`rand_chacha`), seeded with `seed_from_u64(seed)`
//! and split by ChaCha's 64-bit stream number, one stream per purpose and
//! per node. Changing, say, one node's issue process leaves topology and
//! delay draws elsewhere untouched, and results are identical across
//! platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::NodeId;

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Topology,
    ChannelMeans,
    /// Inter-issue gaps and transaction work of one node.
    Issue(NodeId),
    /// Per-transaction channel delays on one node's outgoing links.
    Delay(NodeId),
    /// Per-replicate seeds in Monte Carlo batches.
    Replicates,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Topology => 1,
            Stream::ChannelMeans => 2,
            Stream::Replicates => 3,
            Stream::Issue(n) => (1 << 32) | u64::from(n.0),
            Stream::Delay(n) => (2 << 32) | u64::from(n.0),
        }
    }
}

pub fn stream_rng(seed: u64, stream: Stream) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}

/// Seed of replicate `k` in a batch started from `master`.
pub fn replicate_seed(master: u64, k: usize) -> u64 {
    use rand::Rng;
    let mut rng = stream_rng(master, Stream::Replicates);
    let mut seed = 0;
    for _ in 0..=k {
        seed = rng.random::<u64>();
    }
    seed
}
