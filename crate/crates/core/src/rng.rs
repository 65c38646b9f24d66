//! Keyed random streams.
//!
//! Every random decision is drawn from its own ChaCha8 stream. The 256-bit
//! key packs the user seed and a purpose tag; the 64-bit stream id is the
//! item the decision is about (an annotation id or a draw index). The layout
//! below is part of the output format: changing it changes every injected
//! dataset.
//!
//! ```text
//! key[0..8]   seed, little endian
//! key[8..16]  purpose tag, little endian
//! key[16..32] b"una-noise/v1\0\0\0\0"
//! stream      item
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::noise::NoiseKind;

const DOMAIN: &[u8; 16] = b"una-noise/v1\0\0\0\0";

/// What a stream is used for. Distinct purposes never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    /// Priority used to pick the annotations hit by one noise kind.
    Select(NoiseKind),
    /// Replacement category for one annotation.
    CategoryFlip,
    /// Box perturbation for one annotation.
    BoxPerturb,
    /// The n-th bogus box.
    BogusBox,
}

impl Purpose {
    pub fn tag(self) -> u64 {
        match self {
            Purpose::Select(NoiseKind::Categorization) => 1,
            Purpose::Select(NoiseKind::Localization) => 2,
            Purpose::Select(NoiseKind::Missing) => 3,
            Purpose::Select(NoiseKind::Bogus) => 4,
            Purpose::CategoryFlip => 16,
            Purpose::BoxPerturb => 17,
            Purpose::BogusBox => 18,
        }
    }
}

/// Opens the stream for `(seed, purpose, item)`.
pub fn stream(seed: u64, purpose: Purpose, item: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&purpose.tag().to_le_bytes());
    key[16..].copy_from_slice(DOMAIN);
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(item);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a = stream(7, Purpose::BoxPerturb, 3).next_u64();
        assert_eq!(a, stream(7, Purpose::BoxPerturb, 3).next_u64());
        assert_ne!(a, stream(7, Purpose::BoxPerturb, 4).next_u64());
        assert_ne!(a, stream(8, Purpose::BoxPerturb, 3).next_u64());
        assert_ne!(a, stream(7, Purpose::CategoryFlip, 3).next_u64());
    }
}
