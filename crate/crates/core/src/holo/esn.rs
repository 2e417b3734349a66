//! Echo-state network baseline for pattern completion.
//!
//! A pattern is presented one bit per step; a ridge readout on the
//! reservoir state predicts the next bit. Storage means fitting the readout
//! on the clean patterns, so recall depends on what a fading-memory state
//! plus a linear map can disambiguate.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsnParams {
    /// Reservoir size as a multiple of the pattern length.
    pub size_factor: usize,
    pub spectral_radius: f64,
    pub input_scale: f64,
    pub ridge: f64,
}

impl Default for EsnParams {
    fn default() -> Self {
        Self {
            size_factor: 4,
            spectral_radius: 0.9,
            input_scale: 0.5,
            ridge: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EchoState {
    w_res: DMatrix<f64>,
    w_in: DVector<f64>,
    readout: Option<DVector<f64>>,
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|v| v.norm()).fold(0.0, f64::max)
}

impl EchoState {
    pub fn new<R: Rng + ?Sized>(n: usize, params: &EsnParams, rng: &mut R) -> Result<Self> {
        let size = params.size_factor.max(1) * n;
        let raw = DMatrix::from_fn(size, size, |_, _| rng.random_range(-1.0..1.0));
        let rho = spectral_radius(&raw);
        if !(rho > 0.0) {
            return Err(Error::InvalidInput("degenerate reservoir".into()));
        }
        let w_res = raw * (params.spectral_radius / rho);
        let w_in = DVector::from_fn(size, |_, _| rng.random_range(-params.input_scale..params.input_scale));
        Ok(Self { w_res, w_in, readout: None })
    }

    pub fn size(&self) -> usize {
        self.w_in.len()
    }

    fn step(&self, x: &DVector<f64>, u: f64) -> DVector<f64> {
        (&self.w_res * x + &self.w_in * u).map(f64::tanh)
    }

    /// States after each input bit, with a trailing bias feature.
    fn states(&self, bits: &[f64]) -> Vec<DVector<f64>> {
        let mut x = DVector::zeros(self.size());
        bits.iter()
            .map(|&u| {
                x = self.step(&x, u);
                x.clone().insert_row(self.size(), 1.0)
            })
            .collect()
    }

    /// Fits the next-bit readout by ridge regression on clean patterns.
    pub fn fit(&mut self, patterns: &[Vec<f64>], ridge: f64) -> Result<()> {
        let d = self.size() + 1;
        let mut gram = DMatrix::<f64>::identity(d, d) * ridge;
        let mut rhs = DVector::<f64>::zeros(d);
        for p in patterns {
            for (s, &target) in self.states(&p[..p.len() - 1]).iter().zip(&p[1..]) {
                gram += s * s.transpose();
                rhs += s * target;
            }
        }
        let chol = gram
            .cholesky()
            .ok_or_else(|| Error::InvalidInput("ridge system is not positive definite".into()))?;
        self.readout = Some(chol.solve(&rhs));
        Ok(())
    }

    /// Completes a query: the first bit is taken as given, each later bit is
    /// the sign of the readout after the previous query bits.
    pub fn complete(&self, query: &[f64]) -> Vec<f64> {
        let Some(w) = &self.readout else {
            return query.to_vec();
        };
        let mut out = Vec::with_capacity(query.len());
        if let Some(&first) = query.first() {
            out.push(first);
        }
        for s in self.states(&query[..query.len().saturating_sub(1)]) {
            out.push(if w.dot(&s) >= 0.0 { 1.0 } else { -1.0 });
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn reservoir_is_rescaled_to_target_radius() {
        let mut rng = stream_rng("esn", 0, "r");
        let e = EchoState::new(8, &EsnParams::default(), &mut rng).unwrap();
        assert_eq!(e.size(), 32);
        assert!((spectral_radius(&e.w_res) - 0.9).abs() < 1e-9);
    }

    #[test]
    fn single_clean_pattern_is_reproduced() {
        let mut rng = stream_rng("esn", 1, "r");
        let p: Vec<f64> = (0..16).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        let mut e = EchoState::new(16, &EsnParams::default(), &mut rng).unwrap();
        e.fit(std::slice::from_ref(&p), 1e-6).unwrap();
        assert_eq!(e.complete(&p), p);
    }
}
