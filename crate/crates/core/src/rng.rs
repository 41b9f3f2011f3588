use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Points drawn by one random substream.
pub const CHUNK: usize = 4096;

/// Seeded substream for logical chunk `chunk`.
///
/// Work is split into fixed-size chunks and each chunk owns a stream, so a
/// seed yields the same samples whatever the worker count.
pub fn substream(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

pub fn chunk_count(n: usize) -> usize {
    n.div_ceil(CHUNK)
}
