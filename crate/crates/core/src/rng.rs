//! Reproducible random streams keyed by `(seed, replicate, purpose)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for; distinct purposes never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Sample,
    Component,
    Proposal,
    Test(u64),
}

impl Purpose {
    fn id(self) -> u64 {
        match self {
            Purpose::Sample => 1,
            Purpose::Component => 2,
            Purpose::Proposal => 3,
            Purpose::Test(k) => 0x1000 + k,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// ChaCha8 keyed by `(seed, replicate)`, on the stream selected by `purpose`.
pub fn stream(seed: u64, replicate: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut state = seed ^ replicate.rotate_left(32) ^ 0x6E65_6564_6C65_7473;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(purpose.id());
    rng
}
