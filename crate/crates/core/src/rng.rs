//! Seeded random streams. Each consumer of randomness draws from its own
//! ChaCha stream so that, for example, arrival sampling never shifts the
//! scheduler's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Grouping = 1,
    Scheduler = 2,
    Arrivals = 3,
    Queue = 4,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
