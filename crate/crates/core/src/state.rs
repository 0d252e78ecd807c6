use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Dense real amplitudes over the `2^N` z-basis configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_sites: usize,
    amps: Vec<f64>,
}

impl StateVector {
    pub fn from_amplitudes(amps: Vec<f64>) -> Result<Self> {
        let len = amps.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::DimensionMismatch {
                expected: len.next_power_of_two().max(1),
                got: len,
            });
        }
        Ok(StateVector {
            n_sites: len.trailing_zeros() as usize,
            amps,
        })
    }

    pub fn zeros(n_sites: usize) -> Self {
        StateVector {
            n_sites,
            amps: vec![0.0; 1 << n_sites],
        }
    }

    pub fn basis(n_sites: usize, config: u64) -> Self {
        let mut v = Self::zeros(n_sites);
        v.amps[config as usize] = 1.0;
        v
    }

    /// Normalized Gaussian random state.
    pub fn random(n_sites: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amps = (0..1usize << n_sites)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let mut v = StateVector { n_sites, amps };
        v.normalize();
        v
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [f64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<f64> {
        self.amps
    }

    pub fn dot(&self, other: &StateVector) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(dot(&self.amps, &other.amps))
    }

    pub fn norm(&self) -> f64 {
        dot(&self.amps, &self.amps).sqrt()
    }

    /// Scales to unit norm and returns the previous norm.
    pub fn normalize(&mut self) -> f64 {
        let n = self.norm();
        if n > 0.0 {
            self.amps.par_iter_mut().for_each(|a| *a /= n);
        }
        n
    }
}

/// Serial dot product with independent partial sums so the loop vectorizes.
#[inline]
pub(crate) fn dot_serial(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let (ac, ar) = a.split_at(a.len() - a.len() % 8);
    let (bc, br) = b.split_at(ac.len());
    for (x, y) in ac.chunks_exact(8).zip(bc.chunks_exact(8)) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ar.iter().zip(br).map(|(x, y)| x * y).sum();
    acc.iter().sum::<f64>() + tail
}

/// Chunked dot product whose summation order does not depend on scheduling.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let partial: Vec<f64> = a
        .par_chunks(1 << 14)
        .zip(b.par_chunks(1 << 14))
        .map(|(x, y)| dot_serial(x, y))
        .collect();
    partial.iter().sum()
}

/// `y += a x`
pub(crate) fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    y.par_iter_mut()
        .zip(x.par_iter())
        .for_each(|(y, x)| *y += a * x);
}
