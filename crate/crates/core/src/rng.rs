//! Pinned pseudo-random streams.
//!
//! Both generators are fixed by algorithm so that seeded fixtures reproduce
//! bit-for-bit in any implementation: SplitMix64 for integers, Box–Muller
//! over SplitMix64 doubles for normals.

use core::f64::consts::PI;

/// 2^-53, also the smallest value `next_f64` can return.
const INV_2_53: f64 = 1.0 / (1u64 << 53) as f64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform double in (0, 1): top 53 bits, zero remapped to 2^-53.
    pub fn next_f64(&mut self) -> f64 {
        let x = (self.next_u64() >> 11) as f64 * INV_2_53;
        if x == 0.0 {
            INV_2_53
        } else {
            x
        }
    }

    /// Integer in `0..bound` by modulo reduction. `bound` must be nonzero.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        self.next_u64() % bound
    }
}

/// Standard normal stream. Box–Muller yields pairs; the cosine branch is
/// returned first and the sine branch cached for the next call.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStream {
    inner: SplitMix64,
    cached: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: SplitMix64::new(seed),
            cached: None,
        }
    }

    pub fn next_gaussian(&mut self) -> f64 {
        if let Some(z) = self.cached.take() {
            return z;
        }
        let u1 = self.inner.next_f64();
        let u2 = self.inner.next_f64();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let theta = 2.0 * PI * u2;
        self.cached = Some(r * libm::sin(theta));
        r * libm::cos(theta)
    }

    /// Fills a fresh vector with `n` normals.
    pub fn take_vec(&mut self, n: usize) -> alloc::vec::Vec<f64> {
        (0..n).map(|_| self.next_gaussian()).collect()
    }
}

impl Iterator for GaussianStream {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(self.next_gaussian())
    }
}
