//! Counter-based deterministic random number generation.
//!
//! Every random draw in the workspace flows through [`RngStream`]: the
//! `n`-th output is a pure function of `(seed, n)` (a SplitMix64-style
//! integer hash), so sequences are identical across platforms, build
//! settings, and call sites. Gaussian variates come from the Box-Muller
//! transform applied to the uniform stream; each Gaussian draw consumes
//! exactly two counter steps.

/// Deterministic stream of uniforms/Gaussians addressed by `(seed, counter)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
    counter: u64,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output finalizer: a bijective avalanche mix on 64 bits.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> RngStream {
        RngStream { seed, counter: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// Derive an independent stream for a tagged sub-task (noise draws,
    /// negative sampling, dropout, ...). Forking does not advance `self`,
    /// and distinct tags give decorrelated streams.
    pub fn fork(&self, tag: u64) -> RngStream {
        RngStream {
            seed: mix(self.seed ^ mix(tag.wrapping_add(GOLDEN))),
            counter: 0,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let n = self.counter;
        self.counter += 1;
        mix(self.seed.wrapping_add(n.wrapping_add(1).wrapping_mul(GOLDEN)))
    }

    /// Uniform in `[0, 1)`, 53 mantissa bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `(0, 1]`, safe to pass through `ln`.
    fn uniform_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller; consumes exactly two counter steps.
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = self.uniform_open();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Uniform integer in `[0, n)` via the multiply-shift reduction.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Uniform in `[-limit, limit)`, the Xavier initialization shape.
    pub fn uniform_symmetric(&mut self, limit: f64) -> f64 {
        limit * (2.0 * self.uniform() - 1.0)
    }
}
