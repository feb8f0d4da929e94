//! Counter-based pseudorandom primitives: a fixed avalanche-quality integer
//! hash plus conversions to uniforms and normals. Every consumer derives its
//! randomness from (seed, indices) tuples, so the same tuple always yields
//! the same value on every platform and thread schedule.

/// Splitmix64 finalizer; full avalanche on 64-bit words.
#[inline]
pub(crate) fn mix64(mut x: u64) -> u64 {
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Hashes a (seed, a, b, c, salt) tuple into one 64-bit word.
#[inline]
pub(crate) fn mix_tuple(seed: u64, a: u64, b: u64, c: u64, salt: u64) -> u64 {
    let mut h = mix64(seed ^ 0x9e3779b97f4a7c15);
    h = mix64(h ^ a.wrapping_mul(0xd1342543de82ef95));
    h = mix64(h ^ b.wrapping_mul(0xaf251af3b0f025b5));
    h = mix64(h ^ c.wrapping_mul(0x9e3779b97f4a7c15));
    mix64(h ^ salt.wrapping_mul(0xb564ef22ec7aece5))
}

/// Uniform in (0, 1]; never returns 0, safe under `ln`.
#[inline]
pub(crate) fn to_unit_open(word: u64) -> f64 {
    ((word >> 11) as f64 + 1.0) / (1u64 << 53) as f64
}

/// Uniform in [0, 1).
#[inline]
pub(crate) fn to_unit_half_open(word: u64) -> f64 {
    (word >> 11) as f64 / (1u64 << 53) as f64
}

/// Box–Muller pair of independent standard normals from two words.
#[inline]
pub(crate) fn to_normal_pair(w1: u64, w2: u64) -> (f64, f64) {
    let radius = (-2.0 * to_unit_open(w1).ln()).sqrt();
    let angle = std::f64::consts::TAU * to_unit_half_open(w2);
    (radius * angle.cos(), radius * angle.sin())
}
