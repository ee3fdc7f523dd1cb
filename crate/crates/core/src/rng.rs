//! Splittable random streams.
//!
//! A [`Stream`] is a 256-bit key derived from a master seed and a path of
//! indices (trial, band, tile, ...). Each key seeds a ChaCha8 generator,
//! which is counter-based and supports random access through its word
//! position. Results never depend on which worker evaluates which stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Stream {
    key: [u64; 4],
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        let mut key = [0u64; 4];
        let mut s = seed;
        for k in key.iter_mut() {
            s = splitmix64(s);
            *k = s;
        }
        Self { key }
    }

    /// Independent child stream for `index`.
    pub fn child(&self, index: u64) -> Self {
        let mut key = [0u64; 4];
        let tag = splitmix64(index ^ 0xD1B5_4A32_D192_ED03);
        let mut carry = tag;
        for (i, k) in key.iter_mut().enumerate() {
            carry = splitmix64(self.key[i] ^ carry.rotate_left(17) ^ (i as u64));
            *k = carry;
        }
        Self { key }
    }

    /// Convenience for a nested path of children.
    pub fn path(&self, indices: &[u64]) -> Self {
        indices.iter().fold(*self, |s, &i| s.child(i))
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut seed = [0u8; 32];
        for (chunk, k) in seed.chunks_exact_mut(8).zip(&self.key) {
            chunk.copy_from_slice(&k.to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }

    /// Generator positioned so that the next `u64` drawn is the `index`-th
    /// value of this stream.
    pub fn rng_at(&self, index: u64) -> ChaCha8Rng {
        let mut rng = self.rng();
        rng.set_word_pos(2 * index as u128);
        rng
    }
}

/// Uniform on `[0, 1)` with 53 random bits.
#[inline]
pub fn unit_f64<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform on `(0, 1]`.
#[inline]
pub fn unit_f64_open_closed<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - unit_f64(rng)
}
