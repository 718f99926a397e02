use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded random stream. ChaCha8 is counter based, so a seed gives the same
/// stream on every platform.
#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngState {
    pub const ALGORITHM: &'static str = "chacha8";

    pub fn new(seed: u64) -> Self {
        RngState {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream for a sub-task (replica, cell, ...). The mix is
    /// a fixed bijection of `(seed, stream)` pairs onto `u64`.
    pub fn derive(seed: u64, stream: u64) -> Self {
        RngState::new(splitmix(seed ^ splitmix(stream.wrapping_add(0x9E37_79B9_7F4A_7C15))))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform on the open interval (0, 1).
    pub fn open01(&mut self) -> f64 {
        loop {
            let u: f64 = self.inner.gen();
            if u > 0.0 {
                return u;
            }
        }
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.open01()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    /// `k` distinct indices from `0..n`, in draw order.
    pub fn choose_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        rand::seq::index::sample(&mut self.inner, n, k).into_vec()
    }

    pub fn standard_normal(&mut self) -> f64 {
        // Box-Muller; keeps the stream independent of distribution crates.
        let u1 = self.open01();
        let u2 = self.open01();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = RngState::new(7);
        let mut b = RngState::new(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn neighbouring_seeds_differ() {
        let first = RngState::new(42).next_u64();
        assert_ne!(first, RngState::new(43).next_u64());
    }

    #[test]
    fn derived_streams_differ() {
        let a = RngState::derive(1, 0).next_u64();
        let b = RngState::derive(1, 1).next_u64();
        let c = RngState::derive(2, 0).next_u64();
        assert!(a != b && a != c && b != c);
    }

    #[test]
    fn open_unit_interval() {
        let mut r = RngState::new(3);
        for _ in 0..10_000 {
            let u = r.open01();
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn chooses_distinct_indices() {
        let mut r = RngState::new(5);
        let mut idx = r.choose_indices(50, 12);
        idx.sort_unstable();
        idx.dedup();
        assert_eq!(idx.len(), 12);
        assert!(idx.iter().all(|&i| i < 50));
    }
}
