use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Seeded random stream backed by ChaCha20.
///
/// The ChaCha20 keystream is specified independently of platform, and the
/// seed is expanded with `SeedableRng::seed_from_u64` (PCG32), so a seed
/// produces the same draws everywhere. Uniform reals are built from the top
/// 53 bits of each 64-bit word.
#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    rng: ChaCha20Rng,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream for run `index` under a master seed (`seed + index`).
    pub fn derive(master: u64, index: u64) -> Self {
        Self::new(master.wrapping_add(index))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform draw from the open interval (0, 1).
    pub fn uniform_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`; `n` must be non-zero.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        // reject the tail that would bias the modulus
        let zone = u64::MAX - (u64::MAX - n + 1) % n;
        loop {
            let x = self.next_u64();
            if x <= zone {
                return x % n;
            }
        }
    }

    /// Index drawn with probability proportional to `weights` (all >= 0, not all 0).
    pub fn weighted_index(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        assert!(total > 0.0 && total.is_finite(), "weights must have positive finite sum");
        let target = self.uniform_open01() * total;
        let mut acc = 0.0;
        for (i, w) in weights.iter().enumerate() {
            acc += w;
            if target < acc {
                return i;
            }
        }
        // rounding left target at the very top
        weights.iter().rposition(|w| *w > 0.0).unwrap()
    }
}
