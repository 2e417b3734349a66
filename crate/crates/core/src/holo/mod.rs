//! Holographic phase memory: complex Hebbian storage, partial-cue recall and
//! the capacity benchmark against Modern Hopfield and echo-state baselines.

pub mod capacity;
pub mod esn;
pub mod metrics;
pub mod mhn;
pub mod recall;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use metrics::{aligned_phase_rmse, overlap, phase_rmse, RecallMetrics, SuccessThresholds};
pub use recall::{recall, Cue, RecallConfig, RecallInit, RecallOutcome};

/// Tolerance on `|x_i| = 1` for stored patterns.
pub const UNIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StoreOptions {
    /// Subtract each pattern's mean before forming its outer product.
    pub centering: bool,
    pub zero_diagonal: bool,
}

/// Superposed `W = (1/N) Σ_p x^p (x^p)^H` plus the stored patterns.
#[derive(Debug, Clone, PartialEq)]
pub struct HoloMemory {
    n: usize,
    pub weights: DMatrix<Complex64>,
    stored: Vec<Vec<Complex64>>,
    options: StoreOptions,
}

impl HoloMemory {
    pub fn new(n: usize, options: StoreOptions) -> Self {
        Self {
            n,
            weights: DMatrix::zeros(n, n),
            stored: Vec::new(),
            options,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn stored(&self) -> &[Vec<Complex64>] {
        &self.stored
    }

    pub fn options(&self) -> StoreOptions {
        self.options
    }

    /// Adds patterns to the superposition. Storage is one-shot and
    /// order-independent.
    pub fn store(&mut self, patterns: &[Vec<Complex64>]) -> Result<()> {
        for p in patterns {
            if p.len() != self.n {
                return Err(Error::DimensionMismatch { expected: self.n, got: p.len() });
            }
            if let Some((i, v)) = p.iter().enumerate().find(|(_, v)| (v.norm() - 1.0).abs() > UNIT_TOLERANCE) {
                return Err(Error::InvalidInput(format!("pattern entry {i} has modulus {}, expected 1", v.norm())));
            }
        }
        let scale = 1.0 / self.n as f64;
        for p in patterns {
            let v = if self.options.centering {
                let mean = p.iter().sum::<Complex64>() / self.n as f64;
                p.iter().map(|x| x - mean).collect()
            } else {
                p.clone()
            };
            for i in 0..self.n {
                for j in 0..self.n {
                    self.weights[(i, j)] += v[i] * v[j].conj() * scale;
                }
            }
            self.stored.push(p.clone());
        }
        if self.options.zero_diagonal {
            for i in 0..self.n {
                self.weights[(i, i)] = Complex64::new(0.0, 0.0);
            }
        }
        Ok(())
    }

    /// Raw field `W z`.
    pub fn field(&self, z: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.weights[(i, j)] * z[j]).sum())
            .collect()
    }
}

/// Maps ±1 bits to phasors at phases {0, π}.
pub fn bipolar_to_phasor(bits: &[i8]) -> Vec<Complex64> {
    bits.iter().map(|&b| Complex64::new(f64::from(b.signum()), 0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase;
    use crate::rng::stream_rng;
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_pattern_outer_product() {
        let mut m = HoloMemory::new(2, StoreOptions::default());
        m.store(&[vec![c(1.0, 0.0), c(0.0, 1.0)]]).unwrap();
        let expected = [[c(0.5, 0.0), c(0.0, -0.5)], [c(0.0, 0.5), c(0.5, 0.0)]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((m.weights[(i, j)] - expected[i][j]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn storing_twice_doubles() {
        let p = vec![phase::unit(0.3), phase::unit(-1.2), phase::unit(2.0)];
        let mut once = HoloMemory::new(3, StoreOptions::default());
        once.store(std::slice::from_ref(&p)).unwrap();
        let mut twice = HoloMemory::new(3, StoreOptions::default());
        twice.store(&[p.clone(), p]).unwrap();
        assert!((twice.weights.clone() - once.weights.clone() * c(2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn rejects_non_unit_entries() {
        let mut m = HoloMemory::new(2, StoreOptions::default());
        assert!(m.store(&[vec![c(1.0, 0.0), c(0.5, 0.0)]]).is_err());
    }

    #[test]
    fn orthogonal_patterns_are_eigenvectors() {
        // Fourier modes are mutually orthogonal unit-phasor patterns.
        let n = 8;
        let patterns: Vec<Vec<Complex64>> =
            (0..3).map(|k| (0..n).map(|j| phase::unit(2.0 * PI * (k * j) as f64 / n as f64)).collect()).collect();
        let mut m = HoloMemory::new(n, StoreOptions::default());
        m.store(&patterns).unwrap();
        for p in &patterns {
            let f = m.field(p);
            for (a, b) in f.iter().zip(p) {
                assert!((a - b).norm() < 1e-12);
            }
            assert!((overlap(&f, p).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_diagonal_option() {
        let mut m = HoloMemory::new(4, StoreOptions { centering: true, zero_diagonal: true });
        m.store(&[bipolar_to_phasor(&[1, -1, 1, 1])]).unwrap();
        assert!((0..4).all(|i| m.weights[(i, i)] == c(0.0, 0.0)));
    }

    proptest! {
        #[test]
        fn storage_is_hermitian(seed in 0u64..500, p in 1usize..6, n in 2usize..12) {
            let mut rng = stream_rng("holo", seed, "h");
            let pats: Vec<Vec<Complex64>> = (0..p).map(|_| (0..n).map(|_| phase::unit(rng.random_range(-PI..PI))).collect()).collect();
            let mut m = HoloMemory::new(n, StoreOptions::default());
            m.store(&pats).unwrap();
            prop_assert_eq!(m.weights.clone(), m.weights.adjoint());
        }
    }
}
