//! Seeded random streams.
//!
//! Every stochastic component takes a `u64` seed plus a stream id, so that
//! independent consumers (encoder init, decoder init, batch shuffling, ...)
//! never share a sequence.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as Rng;

pub fn seeded(seed: u64, stream: u64) -> Rng {
    let mut rng = Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub mod streams {
    pub const ENCODER: u64 = 1;
    pub const DECODER: u64 = 2;
    pub const HEAD: u64 = 3;
    pub const SPLIT: u64 = 10;
    pub const SHUFFLE: u64 = 11;
    pub const SYNTH_RESP: u64 = 20;
    pub const SYNTH_ECG: u64 = 21;
    pub const SYNTH_ACCEL: u64 = 22;
    pub const GRAD_CHECK: u64 = 30;
}
