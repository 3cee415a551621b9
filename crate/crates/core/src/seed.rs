//! Seed derivation. Every random stream in a run is a pure function of the
//! run seed plus a few integer coordinates, so results do not depend on the
//! order in which clients are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags keep independent consumers of the same coordinates apart.
pub mod stream {
    pub const TASK: u64 = 1;
    pub const TEST_SET: u64 = 2;
    pub const PARTITION: u64 = 3;
    pub const ANNOTATION: u64 = 4;
    pub const INIT: u64 = 5;
    pub const SELECTION: u64 = 6;
    pub const CLIENT: u64 = 7;
    pub const TRIM: u64 = 8;
    pub const SUITE: u64 = 9;
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `base` with each coordinate in turn.
pub fn derive(base: u64, coords: &[u64]) -> u64 {
    coords
        .iter()
        .fold(splitmix(base), |acc, &c| splitmix(acc ^ splitmix(c)))
}

pub fn rng(base: u64, coords: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(base, coords))
}

/// Generator for one client's local work in one round.
pub fn client_rng(run_seed: u64, round: usize, client: usize, phase: u64) -> ChaCha8Rng {
    rng(run_seed, &[stream::CLIENT, round as u64, client as u64, phase])
}
