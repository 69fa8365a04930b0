//! Seed derivation helpers for decorrelated deterministic streams.

/// Stride between repetition seed streams.
pub const REP_STRIDE: u64 = 1 << 32;

/// SplitMix64-style mixing of a base seed with a stream index.
pub fn mix(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for repetition `rep` of an experiment with the given base seed.
pub fn rep_seed(base: u64, rep: u64) -> u64 {
    base.wrapping_add(rep.wrapping_mul(REP_STRIDE))
}
