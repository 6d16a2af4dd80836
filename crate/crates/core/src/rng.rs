//! Counter-based random streams.
//!
//! Every replicate draws from its own ChaCha8 stream whose key is derived
//! from `(seed, operation, n)` and whose 64-bit stream id is the replicate
//! index. Output therefore depends only on the key, never on which worker
//! thread happens to run the replicate.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Operation identifiers mixed into stream keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u32)]
pub enum Operation {
    NpNull = 1,
    NpAlternative = 2,
    KsAlternative = 3,
    KsNull = 4,
    ShiftPlain = 5,
    ShiftTilted = 6,
    MomentOracle = 7,
    User = 100,
}

/// Identity of one reproducible stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub op: u32,
    /// Stream family within an operation. Usually the sample size; searches
    /// that want common random numbers across sample sizes pass 0.
    pub n: u64,
    pub replicate: u64,
}

impl StreamKey {
    pub fn new(seed: u64, op: Operation, n: u64, replicate: u64) -> Self {
        StreamKey {
            seed,
            op: op as u32,
            n,
            replicate,
        }
    }

    pub fn stream(&self) -> UniformStream {
        UniformStream::new(*self)
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Open-interval uniforms from a keyed ChaCha8 stream.
#[derive(Debug, Clone)]
pub struct UniformStream {
    rng: ChaCha8Rng,
}

impl UniformStream {
    pub fn new(key: StreamKey) -> Self {
        let mut state = key.seed ^ (u64::from(key.op) << 32 | u64::from(key.op));
        let mut seed = [0u8; 32];
        let words = [
            splitmix64(&mut state),
            splitmix64(&mut state) ^ key.n,
            splitmix64(&mut state),
            splitmix64(&mut state).rotate_left(17) ^ key.n.wrapping_mul(0xD6E8_FEB8_6659_FD93),
        ];
        for (chunk, w) in seed.chunks_exact_mut(8).zip(words) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(key.replicate);
        UniformStream { rng }
    }

    /// Raw 64-bit output.
    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on the open interval (0,1): the top 53 bits plus a half ulp.
    #[inline]
    pub fn next_open01(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * SCALE
    }
}
