use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::{self, AMPLITUDE_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessThresholds {
    pub min_overlap: f64,
    pub max_rmse: f64,
}

impl Default for SuccessThresholds {
    fn default() -> Self {
        Self {
            min_overlap: 0.7,
            max_rmse: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecallMetrics {
    pub overlap: f64,
    /// Unaligned RMSE; the success rule uses this one.
    pub phase_rmse: f64,
    /// RMSE after removing the mean phase offset (reported variant).
    pub aligned_rmse: f64,
    pub success: bool,
    pub converged: bool,
    pub steps: usize,
}

impl RecallMetrics {
    pub fn evaluate(state: &[Complex64], target: &[Complex64], thresholds: SuccessThresholds) -> Result<Self> {
        let overlap = overlap(state, target)?;
        let phase_rmse = phase_rmse(state, target)?;
        let aligned_rmse = aligned_phase_rmse(state, target)?;
        Ok(Self {
            overlap,
            phase_rmse,
            aligned_rmse,
            success: overlap >= thresholds.min_overlap && phase_rmse <= thresholds.max_rmse,
            converged: false,
            steps: 0,
        })
    }
}

fn check_dims(state: &[Complex64], target: &[Complex64]) -> Result<()> {
    if state.len() != target.len() {
        return Err(Error::DimensionMismatch {
            expected: target.len(),
            got: state.len(),
        });
    }
    Ok(())
}

/// `(1/N') |Σ (z_i/|z_i|) conj(x_i)|` over the N' nodes with usable amplitude.
pub fn overlap(state: &[Complex64], target: &[Complex64]) -> Result<f64> {
    check_dims(state, target)?;
    let (sum, count) = state
        .iter()
        .zip(target)
        .filter(|(z, _)| z.norm() >= AMPLITUDE_EPS)
        .fold((Complex64::new(0.0, 0.0), 0usize), |(s, k), (z, x)| (s + z / z.norm() * x.conj(), k + 1));
    if count == 0 {
        return Err(Error::UndefinedMetric("overlap of an all-zero state"));
    }
    Ok((sum.norm() / count as f64).min(1.0))
}

fn rmse_with_offset(state: &[Complex64], target: &[Complex64], offset: f64) -> f64 {
    let n = state.len() as f64;
    let ss: f64 = state
        .iter()
        .zip(target)
        .map(|(z, x)| phase::wrap(z.arg() - offset - x.arg()).powi(2))
        .sum();
    (ss / n).sqrt()
}

/// `sqrt((1/N) Σ wrap(φ_i − φ*_i)²)` with no gauge alignment.
pub fn phase_rmse(state: &[Complex64], target: &[Complex64]) -> Result<f64> {
    check_dims(state, target)?;
    if state.iter().all(|z| z.norm() < AMPLITUDE_EPS) {
        return Err(Error::UndefinedMetric("phase error of an all-zero state"));
    }
    Ok(rmse_with_offset(state, target, 0.0))
}

/// Phase RMSE after rotating the state by its mean offset from the target.
pub fn aligned_phase_rmse(state: &[Complex64], target: &[Complex64]) -> Result<f64> {
    check_dims(state, target)?;
    let s: Complex64 = state
        .iter()
        .zip(target)
        .filter(|(z, _)| z.norm() >= AMPLITUDE_EPS)
        .map(|(z, x)| z / z.norm() * x.conj())
        .sum();
    if s.norm() < AMPLITUDE_EPS {
        return phase_rmse(state, target);
    }
    Ok(rmse_with_offset(state, target, s.arg()))
}
