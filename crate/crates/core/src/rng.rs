//! Counter-based random streams.
//!
//! Every randomized step draws from a stream keyed by `(seed, purpose, index)`,
//! so tree `t` of a forest or synthetic row `s` of SMOTE gets the same numbers
//! no matter which thread builds it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named purposes keep independent streams from colliding under one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Split,
    Smote,
    Forest,
    Boosting,
    Folds,
    Blending,
    Shap,
    Lime,
    Background,
    Subsample,
    Fixture,
    Test,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Split => 0x5350_4c49,
            Purpose::Smote => 0x534d_4f54,
            Purpose::Forest => 0x464f_5245,
            Purpose::Boosting => 0x424f_4f53,
            Purpose::Folds => 0x464f_4c44,
            Purpose::Blending => 0x424c_4e44,
            Purpose::Shap => 0x5348_4150,
            Purpose::Lime => 0x4c49_4d45,
            Purpose::Background => 0x4247_524e,
            Purpose::Subsample => 0x5355_4253,
            Purpose::Fixture => 0x4649_5854,
            Purpose::Test => 0x5445_5354,
        }
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic 64-bit hash of `(seed, purpose, index)`.
pub fn hash3(seed: u64, purpose: Purpose, index: u64) -> u64 {
    mix64(mix64(seed ^ purpose.tag().rotate_left(32)) ^ index)
}

/// Independent ChaCha stream for one `(seed, purpose, index)` triple.
pub fn stream(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let a = mix64(seed ^ purpose.tag());
    let b = mix64(a ^ purpose.tag().rotate_left(17));
    key[..8].copy_from_slice(&a.to_le_bytes());
    key[8..16].copy_from_slice(&b.to_le_bytes());
    key[16..24].copy_from_slice(&seed.to_le_bytes());
    key[24..].copy_from_slice(&purpose.tag().to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream(7, Purpose::Forest, 3).random();
        let b: u64 = stream(7, Purpose::Forest, 3).random();
        let c: u64 = stream(7, Purpose::Forest, 4).random();
        let d: u64 = stream(7, Purpose::Smote, 3).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
