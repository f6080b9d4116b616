//! Reproducible random streams.
//!
//! Every stream is a ChaCha20 generator keyed by a 64-bit master seed and
//! addressed by a 64-bit stream id. ChaCha is counter based, so a stream's
//! output depends only on `(master_seed, stream_id)` and never on which
//! thread consumed which stream first.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type StreamRng = ChaCha20Rng;

/// Generator for stream `stream_id` under `master_seed`.
pub fn stream(master_seed: u64, stream_id: u64) -> StreamRng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id);
    rng
}

/// Stream for replication `replication` of experiment cell `cell`.
pub fn replication_stream(master_seed: u64, cell: u32, replication: u32) -> StreamRng {
    stream(master_seed, (u64::from(cell) << 32) | u64::from(replication))
}
