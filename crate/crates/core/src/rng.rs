//! SplitMix64 pseudo-random number generator.
//!
//! Every random draw in the simulator comes from this generator so that a
//! seed fully determines a run. The recurrence is fixed and must not change:
//! state advances by `0x9E3779B97F4A7C15` per draw, and the output mixing
//! multiplies by `0xBF58476D1CE4E5B9` and `0x94D049BB133111EB`.

/// Deterministic 64-bit generator with a single `u64` of state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    /// Creates a generator whose whole future sequence is fixed by `seed`.
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Returns the next raw 64-bit value.
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Returns a value in `0..bound` by reduction modulo `bound`.
    ///
    /// The slight modulo bias is irrelevant for simulation purposes and the
    /// reduction is trivially portable across implementations.
    ///
    /// # Panics
    ///
    /// Panics if `bound` is zero.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        self.next_u64() % bound
    }

    /// Returns a uniform value in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Returns a signed 64-bit value (the raw draw reinterpreted).
    pub fn next_i64(&mut self) -> i64 {
        self.next_u64() as i64
    }
}
