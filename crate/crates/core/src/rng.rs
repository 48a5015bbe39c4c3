//! Counter-based keyed hashing.
//!
//! Every random quantity in the crate is a pure function of a key tuple,
//! so values can be addressed in any order without carrying generator state.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const K_STREAM: u64 = 0xD1B5_4A32_D192_ED03;
const K_TIME: u64 = 0xAEF1_7502_108E_F2D9;
const K_SITE: u64 = 0x8CB9_2BA7_2F3D_8DD7;

/// SplitMix64 finalizer.
#[inline(always)]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Prefix hash of `(seed, stream)`; feed the result to [`keyed`].
#[inline]
pub fn stream_key(seed: u64, stream: u64) -> u64 {
    let h = mix64(seed.wrapping_add(GOLDEN));
    mix64(h ^ stream.wrapping_mul(K_STREAM))
}

/// Hash of `(prefix, a, b)`.
#[inline(always)]
pub fn keyed(prefix: u64, a: u64, b: u64) -> u64 {
    let h = mix64(prefix ^ a.wrapping_mul(K_TIME));
    mix64(h ^ b.wrapping_mul(K_SITE).wrapping_add(GOLDEN))
}

/// Maps 64 random bits to the open interval (0, 1).
#[inline(always)]
pub fn open_unit(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Derives a child seed from a root seed and a job label.
pub fn derive_seed(root: u64, label: u64) -> u64 {
    keyed(stream_key(root, 0x5EED), label, 0)
}
