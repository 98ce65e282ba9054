//! Two-stage deterministic hashing for sketch construction.
//!
//! Keys are first mapped to 64-bit tuple identifiers with a MurmurHash3
//! variant ([`hash_key`]), then to the unit interval with golden-ratio
//! multiplicative hashing ([`unit_hash`]). Both stages are seedless so that
//! sketches built on different machines or at different times can be joined.
//!
//! The constants below are part of the on-disk sketch and index formats;
//! changing them invalidates every previously written sketch.

use serde::{Deserialize, Serialize};

/// Multiplier for the unit-interval hash: `round(2^64 / phi)` where phi is
/// the golden ratio. Odd, so multiplication mod 2^64 is a bijection.
pub const UNIT_MULTIPLIER: u64 = 11_400_714_819_323_198_485;

/// Identifies the key-hash algorithm in serialized headers.
pub const HASH_ALGO_MURMUR3_X64_128_LO: u8 = 1;

/// 64-bit identifier of a key, shared across tables.
///
/// Equal key byte-strings always produce equal `KeyHash`es. Collisions between
/// distinct keys follow the birthday bound: with `d` distinct keys the
/// probability of any collision is about `d^2 / 2^65`, i.e. ~2.7e-4 for a
/// hundred million keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KeyHash(pub u64);

impl KeyHash {
    pub fn raw(self) -> u64 {
        self.0
    }
}

/// A real number in `[0, 1)`, a pure function of the [`KeyHash`].
///
/// Produced values sit on the 2^-53 grid, so equality and ordering are exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UnitValue(f64);

impl UnitValue {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl Eq for UnitValue {}

impl PartialOrd for UnitValue {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for UnitValue {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Values are finite and non-negative, total_cmp matches numeric order.
        self.0.total_cmp(&other.0)
    }
}

/// Hashes a key byte-string to its 64-bit tuple identifier.
///
/// This is the low half of MurmurHash3 x64_128 with seed 0. Empty input is
/// valid and maps to 0.
pub fn hash_key(key: &[u8]) -> KeyHash {
    KeyHash(murmur3_x64_128(key, 0).0)
}

/// Maps a [`KeyHash`] to the unit interval via multiplicative hashing.
///
/// Computes `(kh * UNIT_MULTIPLIER mod 2^64) / 2^64`, realized exactly in
/// f64 by keeping the top 53 bits of the product.
pub fn unit_hash(kh: KeyHash) -> UnitValue {
    let product = kh.0.wrapping_mul(UNIT_MULTIPLIER);
    UnitValue((product >> 11) as f64 * (1.0 / (1u64 << 53) as f64))
}

/// The key ordering used everywhere a sketch selects or ranks entries:
/// ascending unit hash, ties broken by the smaller key hash.
pub fn selection_rank(kh: KeyHash) -> (UnitValue, KeyHash) {
    (unit_hash(kh), kh)
}

const C1: u64 = 0x87c3_7b91_1142_53d5;
const C2: u64 = 0x4cf5_ad43_2745_937f;

#[inline]
fn fmix64(mut k: u64) -> u64 {
    k ^= k >> 33;
    k = k.wrapping_mul(0xff51_afd7_ed55_8ccd);
    k ^= k >> 33;
    k = k.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    k ^= k >> 33;
    k
}

/// MurmurHash3 x64_128. Returns `(h1, h2)`; `h1` is the canonical low half.
fn murmur3_x64_128(data: &[u8], seed: u32) -> (u64, u64) {
    let mut h1 = seed as u64;
    let mut h2 = seed as u64;

    let mut blocks = data.chunks_exact(16);
    for block in &mut blocks {
        let mut k1 = u64::from_le_bytes(block[0..8].try_into().unwrap());
        let mut k2 = u64::from_le_bytes(block[8..16].try_into().unwrap());

        k1 = k1.wrapping_mul(C1);
        k1 = k1.rotate_left(31);
        k1 = k1.wrapping_mul(C2);
        h1 ^= k1;
        h1 = h1.rotate_left(27);
        h1 = h1.wrapping_add(h2);
        h1 = h1.wrapping_mul(5).wrapping_add(0x52dc_e729);

        k2 = k2.wrapping_mul(C2);
        k2 = k2.rotate_left(33);
        k2 = k2.wrapping_mul(C1);
        h2 ^= k2;
        h2 = h2.rotate_left(31);
        h2 = h2.wrapping_add(h1);
        h2 = h2.wrapping_mul(5).wrapping_add(0x3849_5ab5);
    }

    let tail = blocks.remainder();
    let mut k1: u64 = 0;
    let mut k2: u64 = 0;
    for (i, &b) in tail.iter().enumerate().rev() {
        if i >= 8 {
            k2 |= (b as u64) << ((i - 8) * 8);
        } else {
            k1 |= (b as u64) << (i * 8);
        }
    }
    if tail.len() > 8 {
        k2 = k2.wrapping_mul(C2);
        k2 = k2.rotate_left(33);
        k2 = k2.wrapping_mul(C1);
        h2 ^= k2;
    }
    if !tail.is_empty() {
        k1 = k1.wrapping_mul(C1);
        k1 = k1.rotate_left(31);
        k1 = k1.wrapping_mul(C2);
        h1 ^= k1;
    }

    h1 ^= data.len() as u64;
    h2 ^= data.len() as u64;
    h1 = h1.wrapping_add(h2);
    h2 = h2.wrapping_add(h1);
    h1 = fmix64(h1);
    h2 = fmix64(h2);
    h1 = h1.wrapping_add(h2);
    h2 = h2.wrapping_add(h1);
    (h1, h2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    /// Reference values frozen from the `murmur3` crate (x64_128, seed 0,
    /// low half); "hello" also matches the widely published vector.
    const VECTORS: &[(&str, u64)] = &[
        ("", 0x0000000000000000),
        ("a", 0x85555565f6597889),
        ("ab", 0x938b11ea16ed1b2e),
        ("hello", 0xcbd8a7b341bd9b02),
        ("2021-01", 0xbc85653e50d2654d),
        ("2021-07", 0x8c156fd4dfa647e1),
        ("The quick brown fox jumps over the lazy dog", 0xe34bbc7bbc071b6c),
    ];

    #[test]
    fn frozen_vectors() {
        for &(input, expected) in VECTORS {
            assert_eq!(hash_key(input.as_bytes()).raw(), expected, "input {input:?}");
        }
    }

    #[test]
    fn deterministic() {
        let a = hash_key(b"2021-01");
        let b = hash_key(b"2021-01");
        assert_eq!(a, b);
        assert_eq!(unit_hash(a), unit_hash(b));
    }

    #[test]
    fn empty_key_is_valid() {
        assert_eq!(hash_key(b"").raw(), 0);
    }

    #[test]
    fn figure_keys_collision_scan() {
        let keys = [
            "2021-01", "2021-02", "2021-03", "2021-04", "2021-05", "2021-06", "2021-07",
        ];
        let hashes: HashSet<u64> = keys.iter().map(|k| hash_key(k.as_bytes()).raw()).collect();
        assert_eq!(hashes.len(), keys.len());
    }

    #[test]
    fn unit_hash_of_zero_is_zero() {
        assert_eq!(unit_hash(KeyHash(0)).value(), 0.0);
    }

    #[test]
    fn unit_hash_range_and_mean() {
        let mut sum = 0.0;
        let n = 1_000_000u64;
        for i in 1..=n {
            let u = unit_hash(KeyHash(i)).value();
            assert!((0.0..1.0).contains(&u));
            sum += u;
        }
        let mean = sum / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }

    /// Kolmogorov-Smirnov uniformity of g = unit_hash(hash_key(.)) over 1e5
    /// distinct keys, against the 1% critical value 1.6276/sqrt(n).
    #[test]
    fn composed_hash_ks_uniformity() {
        let n = 100_000usize;
        let mut values: Vec<f64> = (0..n)
            .map(|i| unit_hash(hash_key(format!("key-{i}").as_bytes())).value())
            .collect();
        values.sort_unstable_by(|a, b| a.total_cmp(b));
        let mut d: f64 = 0.0;
        for (i, v) in values.iter().enumerate() {
            let hi = (i + 1) as f64 / n as f64 - v;
            let lo = v - i as f64 / n as f64;
            d = d.max(hi).max(lo);
        }
        let critical = 1.6276 / (n as f64).sqrt();
        assert!(d < critical, "KS statistic {d} >= {critical}");
    }

    proptest! {
        #[test]
        fn matches_reference_murmur3(key in proptest::collection::vec(any::<u8>(), 0..64)) {
            let expected = murmur3::murmur3_x64_128(&mut std::io::Cursor::new(&key), 0).unwrap();
            let lo = (expected & u128::from(u64::MAX)) as u64;
            prop_assert_eq!(hash_key(&key).raw(), lo);
        }

        #[test]
        fn unit_hash_stays_in_unit_interval(kh in any::<u64>()) {
            let u = unit_hash(KeyHash(kh)).value();
            prop_assert!((0.0..1.0).contains(&u));
        }
    }
}
