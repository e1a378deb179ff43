//! Counter-based Gaussian draws.
//!
//! Every variate is a pure function of `(seed, level, index, column)`, so any
//! sub-window of a noise path can be regenerated without storing or replaying
//! the stream. Uniforms come from a SplitMix64-style mixing of the key and are
//! mapped to a standard normal by Box–Muller.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn unit_open(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Derives an independent child seed, e.g. one per path or per draw.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix64(mix64(master ^ GOLDEN).wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03)))
}

/// Keyed standard-normal generator.
#[derive(Clone, Copy, Debug)]
pub struct CounterNormal {
    key: u64,
}

impl CounterNormal {
    pub fn new(seed: u64) -> Self {
        Self {
            key: mix64(seed.wrapping_add(GOLDEN)),
        }
    }

    /// Standard normal variate for the given counter.
    #[inline]
    pub fn normal(&self, level: u32, index: i64, column: u32) -> f64 {
        let a = mix64(self.key ^ (index as u64).wrapping_mul(GOLDEN));
        let b = mix64(a ^ (((level as u64) << 32) | column as u64).wrapping_mul(0xD1B5_4A32_D192_ED03));
        let u1 = unit_open(mix64(b ^ 0x632B_E59B_D9B4_E019));
        let u2 = unit_open(mix64(b ^ 0x8CB9_2BA7_2F3D_8DD7));
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
