//! Linear readout from oscillator phases and amplitudes.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub cos: bool,
    pub sin: bool,
    pub amplitude: bool,
}

impl Default for FeatureSet {
    fn default() -> Self {
        Self {
            cos: true,
            sin: true,
            amplitude: true,
        }
    }
}

impl FeatureSet {
    pub fn dim(&self, nodes: usize) -> usize {
        nodes * (usize::from(self.cos) + usize::from(self.sin) + usize::from(self.amplitude))
    }

    /// `[cos φ; sin φ; r]` restricted to the enabled blocks.
    pub fn features(&self, z: &[Complex64]) -> DVector<f64> {
        let mut out = Vec::with_capacity(self.dim(z.len()));
        if self.cos {
            out.extend(z.iter().map(|v| v.arg().cos()));
        }
        if self.sin {
            out.extend(z.iter().map(|v| v.arg().sin()));
        }
        if self.amplitude {
            out.extend(z.iter().map(|v| v.norm()));
        }
        DVector::from_vec(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ReadoutMode {
    Regression,
    /// Argmax over the listed output rows.
    WinnerTakeAll { outputs: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutHead {
    pub w_out: DMatrix<f64>,
    pub features: FeatureSet,
    pub mode: ReadoutMode,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decoded {
    Vector(DVector<f64>),
    Action(usize),
}

impl ReadoutHead {
    pub fn zeros(outputs: usize, nodes: usize, features: FeatureSet, mode: ReadoutMode) -> Self {
        Self {
            w_out: DMatrix::zeros(outputs, features.dim(nodes)),
            features,
            mode,
        }
    }

    pub fn scores(&self, z: &[Complex64]) -> Result<DVector<f64>> {
        let f = self.features.features(z);
        if f.len() != self.w_out.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.w_out.ncols(),
                got: f.len(),
            });
        }
        Ok(&self.w_out * f)
    }
}

/// Regression output or winner-take-all action (ties to the lowest index).
pub fn decode_action(head: &ReadoutHead, z: &[Complex64]) -> Result<Decoded> {
    let scores = head.scores(z)?;
    match &head.mode {
        ReadoutMode::Regression => Ok(Decoded::Vector(scores)),
        ReadoutMode::WinnerTakeAll { outputs } => {
            let mut best: Option<(usize, f64)> = None;
            for &o in outputs {
                let s = *scores.get(o).ok_or_else(|| Error::InvalidInput(format!("output row {o} out of range")))?;
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((o, s));
                }
            }
            best.map(|(o, _)| Decoded::Action(o))
                .ok_or_else(|| Error::InvalidInput("winner-take-all needs a non-empty output subset".into()))
        }
    }
}

/// Argmax with ties broken toward the lowest index.
pub fn argmax_lowest(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0
}
