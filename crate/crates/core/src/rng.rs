use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Generator identity written into report headers.
pub const RNG_NAME: &str = "ChaCha20Rng/rand_chacha-0.3/seed_from_u64+stream";

/// Generator for `seed`, split by `stream`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut r = ChaCha20Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}
