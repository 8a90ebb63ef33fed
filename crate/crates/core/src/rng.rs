//! Seeded random streams.
//!
//! Every random draw in the crate comes from an [`RngStream`]: ChaCha20 (as
//! implemented by `rand_chacha`) keyed by `SeedableRng::seed_from_u64(seed)`,
//! running on a 64-bit stream id. The root stream of a seed has id 0 and
//! substreams get ids derived with SplitMix64, so independent workers can each
//! own a stream without sharing state. ChaCha20 output is defined bit for bit,
//! which makes runs reproducible across platforms.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

/// Well-known substream ids used by the trainer and evaluator.
pub mod streams {
    pub const INIT: u64 = 1;
    pub const PROBE: u64 = 2;
    pub const STAGE: u64 = 0x100;
    pub const EVAL_MESSAGE: u64 = 0x1_0000;
}

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha20Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    /// A fresh stream derived from this one's seed and stream id. The result
    /// does not depend on how much of `self` has been consumed.
    pub fn substream(&self, id: u64) -> Self {
        let derived = splitmix64(self.stream ^ splitmix64(id));
        Self::with_stream(self.seed, derived)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    /// Standard normal sample.
    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform message index in `1..=m`.
    pub fn message(&mut self, m: usize) -> usize {
        self.rng.random_range(1..=m)
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn uniform(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.rng.random::<f64>()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Serde adapter for seeds in TOML, whose integers are signed 64-bit.
/// Seeds above `i64::MAX` are written as decimal strings; both forms read back.
pub mod seed_serde {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(seed: &u64, s: S) -> Result<S::Ok, S::Error> {
        match i64::try_from(*seed) {
            Ok(v) => s.serialize_i64(v),
            Err(_) => s.serialize_str(&seed.to_string()),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(v) => u64::try_from(v).map_err(|_| de::Error::custom(format!("seed must be non-negative, got {v}"))),
            Raw::Text(t) => t.trim().parse().map_err(|_| de::Error::custom(format!("invalid seed {t:?}"))),
        }
    }

    /// The TOML literal for `seed`.
    pub fn literal(seed: u64) -> String {
        match i64::try_from(seed) {
            Ok(v) => v.to_string(),
            Err(_) => format!("\"{seed}\""),
        }
    }
}
