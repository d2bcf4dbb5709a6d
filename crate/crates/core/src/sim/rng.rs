//! Per-replication random streams and the variate generators built on them.
//!
//! Every replication owns a ChaCha8 generator seeded from the master seed
//! with its stream number set to `(study << 32) | replication`. Streams are
//! independent, so a replication's draws never depend on which thread ran it
//! or in what order.
//!
//! Normal and exponential variates are inverse-CDF transforms of a single
//! uniform in `(0, 1)`, which keeps sequences identical across platforms.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

/// Identifies a study in the stream number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamStudy {
    Study1 = 1,
    Study2 = 2,
}

pub fn replication_rng(seed: u64, study: StreamStudy, replication: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((study as u64) << 32) | replication as u64);
    rng
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    Normal::standard().inverse_cdf(u)
}

/// Exponential with mean 1.
pub fn exponential<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    -u.ln()
}

pub fn bernoulli<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    rng.random::<f64>() < p
}

/// Simple random sample without replacement of `n` positions out of `size`, sorted.
pub fn srs_indices<R: Rng + ?Sized>(rng: &mut R, size: usize, n: usize) -> Vec<usize> {
    let mut idx = rand::seq::index::sample(rng, size, n).into_vec();
    idx.sort_unstable();
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| replication_rng(7, StreamStudy::Study1, 3).random()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        let mut r1 = replication_rng(7, StreamStudy::Study1, 3);
        let mut r2 = replication_rng(7, StreamStudy::Study1, 4);
        let mut r3 = replication_rng(7, StreamStudy::Study2, 3);
        let x: u64 = r1.random();
        assert_ne!(x, r2.random::<u64>());
        assert_ne!(x, r3.random::<u64>());
    }

    #[test]
    fn variate_moments() {
        let mut rng = replication_rng(1, StreamStudy::Study1, 0);
        let m = 200_000;
        let z: Vec<f64> = (0..m).map(|_| standard_normal(&mut rng)).collect();
        let e: Vec<f64> = (0..m).map(|_| exponential(&mut rng)).collect();
        let mz = z.iter().sum::<f64>() / m as f64;
        let vz = z.iter().map(|v| (v - mz).powi(2)).sum::<f64>() / m as f64;
        let me = e.iter().sum::<f64>() / m as f64;
        assert!(mz.abs() < 0.01 && (vz - 1.0).abs() < 0.01);
        assert!((me - 1.0).abs() < 0.01 && e.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn srs_is_sorted_and_distinct() {
        let mut rng = replication_rng(2, StreamStudy::Study2, 0);
        let s = srs_indices(&mut rng, 100, 30);
        assert_eq!(s.len(), 30);
        assert!(s.windows(2).all(|w| w[0] < w[1]) && s[29] < 100);
    }
}
