//! Seeded, splittable pseudo-random stream.
//!
//! SplitMix64: a 64-bit counter advanced by the golden-ratio increment and
//! passed through a bijective finalizer. Substreams are derived by hashing
//! the parent seed together with a label, so a labelled child never depends
//! on how much of the parent has been consumed.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rng {
    seed: u64,
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self { seed, state: seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream identified by `label`.
    pub fn split(&self, label: u64) -> Rng {
        let child = mix64(self.seed ^ mix64(label.wrapping_add(1).wrapping_mul(GOLDEN)));
        Rng::new(child)
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    /// Uniform double in [0, 1) with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..bound` (bound > 0), by rejection.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0);
        let zone = u64::MAX - u64::MAX % bound;
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % bound;
            }
        }
    }

    pub fn fill_unit(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.next_f64();
        }
    }
}
