//! Seeded randomness.
//!
//! `SimRng` wraps ChaCha20, which is counter based and platform independent,
//! so a seed fully determines every draw. Gaussians come from
//! `rand_distr::StandardNormal` (ziggurat) and are colored with a covariance
//! factor computed once per covariance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::linalg::{psd_sqrt, Mat, Vector};

#[derive(Debug, Clone)]
pub struct SimRng {
    seed: u64,
    inner: ChaCha20Rng,
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// An independent generator on a separate ChaCha stream.
    ///
    /// Forking does not advance `self`, so adding a fork never perturbs the
    /// parent's sequence.
    pub fn fork(&self, stream: u64) -> SimRng {
        let mut inner = ChaCha20Rng::seed_from_u64(self.seed);
        inner.set_stream(stream.wrapping_add(1));
        SimRng {
            seed: self.seed,
            inner,
        }
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn standard_normal_vec(&mut self, n: usize) -> Vector {
        Vector::from_fn(n, |_, _| self.normal())
    }

    pub fn standard_normal_mat(&mut self, rows: usize, cols: usize) -> Mat {
        // row-major fill so results read naturally in printed matrices
        let data: Vec<f64> = (0..rows * cols).map(|_| self.normal()).collect();
        Mat::from_row_slice(rows, cols, &data)
    }

    /// Draw from N(0, factor factorᵀ).
    pub fn gaussian(&mut self, factor: &Mat) -> Vector {
        let e = self.standard_normal_vec(factor.ncols());
        factor * e
    }

    /// Uniform unit vector in R^n.
    pub fn unit_vec(&mut self, n: usize) -> Vector {
        loop {
            let v = self.standard_normal_vec(n);
            let norm = v.norm();
            if norm > 1e-12 {
                return v / norm;
            }
        }
    }
}

impl rand::RngCore for SimRng {
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

/// Symmetric square-root factor of a covariance, for use with
/// [`SimRng::gaussian`].
pub fn covariance_factor(cov: &Mat) -> Mat {
    psd_sqrt(cov, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_draws() {
        let mut a = SimRng::new(7);
        let mut b = SimRng::new(7);
        for _ in 0..100 {
            assert_eq!(a.normal().to_bits(), b.normal().to_bits());
        }
    }

    #[test]
    fn fork_is_independent_of_parent_progress() {
        let mut a = SimRng::new(3);
        let f1 = a.fork(5);
        a.normal();
        let f2 = a.fork(5);
        let (mut f1, mut f2) = (f1, f2);
        assert_eq!(f1.normal().to_bits(), f2.normal().to_bits());
        let mut g = a.fork(6);
        assert_ne!(f1.normal().to_bits(), g.normal().to_bits());
    }

    #[test]
    fn gaussian_covariance() {
        let cov = Mat::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]);
        let f = covariance_factor(&cov);
        let mut rng = SimRng::new(11);
        let n = 100_000;
        let mut acc = Mat::zeros(2, 2);
        for _ in 0..n {
            let v = rng.gaussian(&f);
            acc += &v * v.transpose();
        }
        acc /= n as f64;
        assert!((acc - cov).amax() < 0.05);
    }
}
