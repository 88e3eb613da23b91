//! PCG32 (XSH-RR) with Box–Muller Gaussians.
//!
//! The stream is fixed bit-for-bit so that synthetic datasets and parameter
//! initialisations can be regenerated by any implementation of the same
//! recipe.

use std::f64::consts::PI;

const MULTIPLIER: u64 = 6364136223846793005;
const DEFAULT_STREAM: u64 = 0xda3e39cb94b95bdb;

#[derive(Clone, Debug, PartialEq)]
pub struct Rng {
    state: u64,
    inc: u64,
    seed: u64,
    spare: Option<f64>,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, DEFAULT_STREAM)
    }

    /// Standard PCG32 seeding: `inc = (stream << 1) | 1`, one step, add seed, one step.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = Rng {
            state: 0,
            inc: (stream << 1) | 1,
            seed,
            spare: None,
        };
        rng.step();
        rng.state = rng.state.wrapping_add(seed);
        rng.step();
        rng
    }

    /// Independent generator for a named purpose, derived from this seed.
    pub fn fork(&self, tag: u64) -> Self {
        Self::with_stream(self.seed ^ tag.wrapping_mul(0x9e3779b97f4a7c15), tag)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn step(&mut self) {
        self.state = self.state.wrapping_mul(MULTIPLIER).wrapping_add(self.inc);
    }

    pub fn next_u32(&mut self) -> u32 {
        let old = self.state;
        self.step();
        let xorshifted = (((old >> 18) ^ old) >> 27) as u32;
        let rot = (old >> 59) as u32;
        xorshifted.rotate_right(rot)
    }

    /// Uniform in the open interval (0, 1): `(u32 + 0.5) / 2^32`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u32() as f64 + 0.5) / 4294967296.0
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Integer in `[0, n)` via the multiply-shift reduction. `n` must be ≥ 1.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n >= 1);
        ((self.next_u32() as u64 * n as u64) >> 32) as usize
    }

    /// Integer in the inclusive range `[lo, hi]`.
    pub fn range_inclusive(&mut self, lo: usize, hi: usize) -> usize {
        lo + self.below(hi - lo + 1)
    }

    /// Standard normal. Uniforms are consumed two at a time; the second
    /// variate of each pair is returned by the following call.
    pub fn gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
