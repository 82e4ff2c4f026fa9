//! Counter-based random draws: a sample's randomness is a pure function of
//! `(seed, stream, index)`.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Uniform and Gaussian draws for one sample, positioned by `(seed, stream, index)`.
pub(crate) struct Draws {
    rng: ChaCha8Rng,
}

impl Draws {
    pub(crate) fn at(seed: u64, stream: u64, index: u64, words_per_sample: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        // next_u64 consumes two 32-bit words.
        rng.set_word_pos(u128::from(index) * u128::from(words_per_sample) * 2);
        Draws { rng }
    }

    /// Uniform on `[0, 1)`.
    pub(crate) fn unit(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `(0, 1]`.
    pub(crate) fn open_unit(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Box–Muller; consumes `2 · ⌈len/2⌉` words.
    pub(crate) fn normals(&mut self, out: &mut [f64]) {
        for pair in out.chunks_mut(2) {
            let r = (-2.0 * self.open_unit().ln()).sqrt();
            let angle = std::f64::consts::TAU * self.unit();
            pair[0] = r * angle.cos();
            if let Some(second) = pair.get_mut(1) {
                *second = r * angle.sin();
            }
        }
    }
}
