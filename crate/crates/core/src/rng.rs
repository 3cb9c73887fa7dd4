//! Named random substreams derived from one user-visible seed.
//!
//! Every stochastic step draws from its own ChaCha stream, so adding draws
//! to one step never shifts the numbers another step sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const PLACEMENT: u64 = 1;
pub const ACQUISITION: u64 = 2;
pub const VESICLES: u64 = 3;
pub const REFERENCE: u64 = 4;
/// Detector noise of tilt `i` uses stream `TILT_BASE + i`.
pub const TILT_BASE: u64 = 1000;

pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
