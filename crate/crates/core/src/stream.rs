//! Counter-based random stream.
//!
//! `stream_u64(seed, x)` is the `x`-th output of a SplitMix64 generator
//! started at `seed`. Because each output is a pure function of
//! `(seed, x)`, draws can be made in any order, from any thread, and for
//! any subset of indices, and always agree. This is what makes seeded
//! prime-set membership reproducible under reordering and parallelism.

/// SplitMix64 finalizer; bijective on `u64`.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The `x`-th output of a SplitMix64 stream with the given seed.
#[inline]
pub fn stream_u64(seed: u64, x: u64) -> u64 {
    mix64(seed.wrapping_add(x.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

/// Map a hash output to a uniform double in `[0, 1)` using the top 53 bits.
#[inline]
pub fn unit_f64(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Frozen outputs; any change here silently reshuffles every seeded
    // experiment, so treat these as part of the public contract.
    #[test]
    fn stream_golden_vectors() {
        assert_eq!(stream_u64(0, 0), 0xe220_a839_7b1d_cdaf);
        assert_eq!(stream_u64(42, 0), 0xbdd7_3226_2feb_6e95);
        assert_eq!(stream_u64(42, 1), 0x28ef_e333_b266_f103);
        assert_eq!(stream_u64(42, 2), 0x4752_6757_130f_9f52);
        assert_eq!(stream_u64(42, 997), 0x3a90_2d0c_b7f0_1ce9);
        assert_eq!(stream_u64(0xDEAD_BEEF, 123_456_789), 0x5a09_d787_d30c_f083);
        assert_eq!(stream_u64(1, u64::MAX), 0x5692_161d_100b_05e5);
    }

    #[test]
    fn unit_in_range_and_frozen() {
        let u = unit_f64(stream_u64(42, 0));
        assert_eq!(u, 0.741_564_878_771_823_3);
        for x in 0..10_000u64 {
            let u = unit_f64(stream_u64(7, x));
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn distinct_seeds_decorrelate() {
        let mut same = 0;
        for x in 0..1000 {
            if stream_u64(1, x) == stream_u64(2, x) {
                same += 1;
            }
        }
        assert_eq!(same, 0);
    }
}
