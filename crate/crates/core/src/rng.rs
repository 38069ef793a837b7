//! Counter-based pseudo-random numbers for portable, reproducible noise.
//!
//! Noise realizations must be reproducible from a single integer seed, and the
//! algorithm is part of the file-format contract: any implementation of the
//! pipeline must generate the same observation for the same seed. We therefore
//! fix a 64-bit counter generator (SplitMix64 finalizer applied to
//! `seed + counter * GOLDEN`) and Box-Muller for Gaussian draws, rather than
//! depending on a library generator whose stream may change.

use crate::image::Image;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Stateless mixing function: one 64-bit output per (seed, counter) pair.
#[inline]
pub fn mix64(seed: u64, counter: u64) -> u64 {
    let mut z = seed.wrapping_add(counter.wrapping_mul(GOLDEN)).wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Maps a u64 to the open interval (0, 1); never returns 0 so it is safe
/// under `ln`.
#[inline]
fn unit_open(bits: u64) -> f64 {
    // use the top 53 bits, then shift into (0, 1)
    ((bits >> 11) as f64 + 0.5) / 9007199254740992.0
}

/// Sequential convenience wrapper around [`mix64`].
#[derive(Debug, Clone)]
pub struct CounterRng {
    seed: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        CounterRng { seed, counter: 0 }
    }

    pub fn next_u64(&mut self) -> u64 {
        let v = mix64(self.seed, self.counter);
        self.counter += 1;
        v
    }

    /// Uniform draw in (0, 1).
    pub fn next_f64(&mut self) -> f64 {
        unit_open(self.next_u64())
    }

    /// Uniform integer in `[0, n)`.
    pub fn next_below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    /// Standard normal draw via Box-Muller.
    pub fn next_gaussian(&mut self) -> f64 {
        let u1 = self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

/// A full field of N(0, 1) draws indexed by pixel, independent of traversal
/// order: pixel `l` consumes counters `2l` and `2l + 1`.
pub fn gaussian_field(seed: u64, height: usize, width: usize) -> Image {
    Image::from_fn(height, width, |r, c| {
        let l = (r * width + c) as u64;
        let u1 = unit_open(mix64(seed, 2 * l));
        let u2 = unit_open(mix64(seed, 2 * l + 1));
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    })
}
