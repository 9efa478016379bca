//! Counter-based seeded RNG with labeled sub-seeding.
//!
//! The generator is SplitMix64: a 64-bit base seed plus a step counter.
//! Identical seeds give identical streams, and independent child streams are
//! derived from `(parent base seed, label string)` so adding a consumer of
//! randomness anywhere in the pipeline never reshuffles existing streams.

/// Deterministic RNG. Cloning forks the exact stream position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeededRng {
    base: u64,
    counter: u64,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the label bytes; used only for sub-seed derivation.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng {
            base: seed,
            counter: 0,
        }
    }

    /// The seed this stream was constructed from.
    pub fn seed(&self) -> u64 {
        self.base
    }

    /// Derives an independent child stream from the base seed and a label.
    /// The derivation ignores the parent's counter, so children are stable
    /// no matter how much of the parent stream has been consumed.
    pub fn child(&self, label: &str) -> SeededRng {
        SeededRng::new(mix64(self.base ^ fnv1a(label.as_bytes())))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.base.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform in `[0, 1)` with 53-bit resolution.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[0, n)`. Panics if `n == 0`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        (self.next_u64() % n as u64) as usize
    }

    /// Standard normal via Box-Muller. Each call draws exactly two uniforms,
    /// so the stream position is input-independent.
    pub fn normal(&mut self) -> f64 {
        let u1 = ((self.next_u64() >> 11) + 1) as f64 / (1u64 << 53) as f64; // (0, 1]
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_seed_identical_stream() {
        let mut a = SeededRng::new(42);
        let mut b = SeededRng::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn child_ignores_parent_position() {
        let parent = SeededRng::new(7);
        let mut consumed = parent.clone();
        for _ in 0..10 {
            consumed.next_u64();
        }
        assert_eq!(parent.child("kb"), consumed.child("kb"));
        assert_ne!(parent.child("kb"), parent.child("link"));
    }

    #[test]
    fn uniform_in_range() {
        let mut rng = SeededRng::new(3);
        for _ in 0..1000 {
            let x = rng.uniform(-2.0, 5.0);
            assert!((-2.0..5.0).contains(&x));
        }
    }
}
