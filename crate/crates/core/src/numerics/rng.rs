use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::Real;
use crate::error::{argument, Result};

/// Deterministic random stream keyed by `(seed, stream_id)`.
///
/// Backed by ChaCha8, a counter-based generator: every `(seed, stream_id)`
/// pair addresses an independent keystream, so child streams for trials,
/// timesteps or Monte-Carlo chunks can be derived without touching the
/// parent's position.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Child stream; depends only on `(seed, stream_id, child)`, never on how
    /// far `self` has advanced.
    pub fn derive(&self, child: u64) -> RngStream {
        let id = splitmix64(self.stream_id ^ splitmix64(child.wrapping_add(0x9E37_79B9_7F4A_7C15)));
        RngStream::new(self.seed, id)
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    /// Fisher-Yates permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.below(i + 1);
            idx.swap(i, j);
        }
        idx
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `dim` i.i.d. draws from `N(0, sigma²)`.
///
/// The stream advances by `dim` normals even when `sigma == 0`, so stream
/// positions never depend on noise levels.
pub fn gauss_vec<T: Real>(rng: &mut RngStream, dim: usize, sigma: T) -> Result<Vec<T>> {
    if !(sigma >= T::zero()) {
        return Err(argument(format!("sigma must be non-negative, got {sigma}")));
    }
    if dim == 0 {
        return Err(argument("gauss_vec needs dim >= 1"));
    }
    let draws: Vec<f64> = (0..dim).map(|_| rng.standard_normal()).collect();
    if sigma == T::zero() {
        return Ok(vec![T::zero(); dim]);
    }
    Ok(draws.into_iter().map(|z| T::lit(z) * sigma).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_gives_zero_vector() {
        let mut rng = RngStream::new(1, 0);
        assert_eq!(gauss_vec(&mut rng, 3, 0.0f64).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn negative_sigma_rejected() {
        let mut rng = RngStream::new(1, 0);
        assert!(gauss_vec(&mut rng, 3, -1.0f64).is_err());
        assert!(gauss_vec(&mut rng, 3, f64::NAN).is_err());
        assert!(gauss_vec(&mut rng, 0, 1.0f64).is_err());
    }

    #[test]
    fn reseeding_reproduces_draws() {
        let mut rng = RngStream::new(42, 0);
        let x = gauss_vec(&mut rng, 2, 1.0f64).unwrap();
        let y = gauss_vec(&mut rng, 2, 1.0f64).unwrap();
        assert_ne!(x, y);
        let mut again = RngStream::new(42, 0);
        assert_eq!(gauss_vec(&mut again, 2, 1.0f64).unwrap(), x);
        assert_eq!(gauss_vec(&mut again, 2, 1.0f64).unwrap(), y);
    }

    #[test]
    fn sample_variance_of_sigma_two() {
        // 4σ band on the variance estimator: sd(s²) ≈ σ²·sqrt(2/N) = 0.0179.
        let mut rng = RngStream::new(7, 3);
        let xs = gauss_vec(&mut rng, 100_000, 2.0f64).unwrap();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((3.9..=4.1).contains(&var), "variance {var}");
    }

    #[test]
    fn derived_streams_ignore_parent_position() {
        let parent = RngStream::new(5, 11);
        let mut advanced = parent.clone();
        for _ in 0..100 {
            advanced.standard_normal();
        }
        let mut a = parent.derive(3);
        let mut b = advanced.derive(3);
        assert_eq!(a.standard_normal(), b.standard_normal());
        let mut c = parent.derive(4);
        assert_ne!(parent.derive(3).standard_normal(), c.standard_normal());
    }

    #[test]
    fn permutation_is_a_permutation() {
        let mut rng = RngStream::new(0, 0);
        let mut p = rng.permutation(50);
        p.sort_unstable();
        assert_eq!(p, (0..50).collect::<Vec<_>>());
    }
}
