use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::phase::AMPLITUDE_EPS;

/// Coupling / retrieval operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// `Σ Â_ij W_ij (e^{iθ} z_j − z_i)`.
    #[default]
    Diffusive,
    /// Coherence-weighted sum of contributions.
    GateOnly,
    /// Coherence-weighted magnitudes rotated into the raw field phase.
    GateRotate,
}

/// Gated field for one node from its contributions `c_j`.
///
/// Weights are `g_j ∝ exp(β_coh cos Δ_j)` with `Δ_j` the angle between `c_j`
/// and the raw field `f = Σ c_j`, normalised over `j`. The result is scaled
/// by the contributor count so that perfectly aligned inputs reproduce `f`.
/// Returns `None` when `|f|` is too small for its phase to be defined.
pub fn gated_node_field(contribs: &[Complex64], kernel: Kernel, beta_coh: f64) -> Option<Complex64> {
    if contribs.is_empty() {
        return Some(Complex64::new(0.0, 0.0));
    }
    let raw: Complex64 = contribs.iter().sum();
    let raw_norm = raw.norm();
    if raw_norm < AMPLITUDE_EPS {
        return None;
    }
    let cos_delta = |c: &Complex64| {
        let m = c.norm();
        if m < AMPLITUDE_EPS {
            0.0
        } else {
            (c * raw.conj()).re / (m * raw_norm)
        }
    };
    // exp(β(cosΔ − 1)) keeps the exponent ≤ 0; the shift cancels on normalisation.
    let (num, den) = contribs.iter().fold((Complex64::new(0.0, 0.0), 0.0), |(num, den), c| {
        let g = (beta_coh * (cos_delta(c) - 1.0)).exp();
        let term = match kernel {
            Kernel::GateRotate => Complex64::new(c.norm(), 0.0),
            _ => *c,
        };
        (num + term * g, den + g)
    });
    let scaled = num * (contribs.len() as f64 / den);
    Some(match kernel {
        Kernel::GateRotate => scaled * (raw / raw_norm),
        _ => scaled,
    })
}
