//! Seeded synthetic input.
//!
//! A plain 64-bit LCG so that any implementation, in any language, can
//! regenerate the same matrices bit for bit from a seed.

use crate::matrix::{MatrixExtents, SignalMatrix};

pub const LCG_MULTIPLIER: u64 = 6364136223846793005;
pub const LCG_INCREMENT: u64 = 1442695040888963407;

#[derive(Debug, Clone)]
pub struct Lcg64 {
    state: u64,
}

impl Lcg64 {
    pub fn new(seed: u64) -> Self {
        Lcg64 { state: seed }
    }

    /// Advances the state, then returns it.
    pub fn next_u64(&mut self) -> u64 {
        self.state = self
            .state
            .wrapping_mul(LCG_MULTIPLIER)
            .wrapping_add(LCG_INCREMENT);
        self.state
    }

    /// High 53 bits of the next state mapped to `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Row-major matrix of uniform `[0, 1)` samples drawn from a fresh generator.
pub fn synthetic_matrix(extents: MatrixExtents, seed: u64) -> SignalMatrix {
    let mut rng = Lcg64::new(seed);
    let data = (0..extents.len()).map(|_| rng.next_f64()).collect();
    SignalMatrix::from_vec(extents, data).expect("length matches extents")
}
