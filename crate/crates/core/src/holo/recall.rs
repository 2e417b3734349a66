use num_complex::Complex64;
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::metrics::{RecallMetrics, SuccessThresholds};
use super::HoloMemory;
use crate::error::{Error, Result};
use crate::graph::{gated_node_field, imex_node, Kernel};
use crate::phase::{self, AMPLITUDE_EPS};

/// Partial assignment: clamped node indices and their cue phases.
#[derive(Debug, Clone, PartialEq)]
pub struct Cue {
    pub clamped: Vec<usize>,
    pub phases: Vec<f64>,
}

impl Cue {
    /// Clamps a uniformly chosen `fraction` of nodes to the pattern's phases.
    pub fn from_pattern<R: Rng + ?Sized>(pattern: &[Complex64], fraction: f64, rng: &mut R) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::param("fraction", "clamped fraction must lie in (0, 1]"));
        }
        let n = pattern.len();
        let k = ((fraction * n as f64).round() as usize).clamp(1, n);
        let mut clamped = index::sample(rng, n, k).into_vec();
        clamped.sort_unstable();
        let phases = clamped.iter().map(|&i| pattern[i].arg()).collect();
        Ok(Self { clamped, phases })
    }

    pub fn full(pattern: &[Complex64]) -> Self {
        Self {
            clamped: (0..pattern.len()).collect(),
            phases: pattern.iter().map(|v| v.arg()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RecallInit {
    /// Free nodes start near the target phase, offset by the jitter.
    #[default]
    JitteredTarget,
    /// Free nodes start at uniformly random phases.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallConfig {
    pub kernel: Kernel,
    pub beta_coh: f64,
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    pub dt: f64,
    /// Free-node frequencies are drawn from U(−detuning, detuning) in the
    /// frame co-rotating with the clamped cue.
    pub detuning: f64,
    pub max_steps: usize,
    /// Per-step phase change regarded as stationary.
    pub tolerance: f64,
    /// Consecutive stationary steps needed to stop.
    pub patience: usize,
    pub init_amplitude: f64,
    pub init: RecallInit,
    /// Apply the jitter to clamped cue phases as well as free nodes.
    pub jitter_cue: bool,
    pub thresholds: SuccessThresholds,
}

impl Default for RecallConfig {
    fn default() -> Self {
        Self {
            kernel: Kernel::GateRotate,
            beta_coh: 3.0,
            alpha: 1.0,
            beta: 1.0,
            kappa: 0.5,
            dt: 0.05,
            detuning: 0.2,
            max_steps: 2000,
            tolerance: 1e-4,
            patience: 10,
            init_amplitude: 0.1,
            init: RecallInit::JitteredTarget,
            jitter_cue: true,
            thresholds: SuccessThresholds::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecallOutcome {
    pub state: Vec<Complex64>,
    pub metrics: RecallMetrics,
}

/// Field at node `i` under the chosen kernel. The plain kernel reads the
/// superposed memory directly, `Σ_j W_ij z_j`.
pub(crate) fn memory_node_field(
    memory: &HoloMemory,
    z: &[Complex64],
    i: usize,
    kernel: Kernel,
    beta_coh: f64,
    scratch: &mut Vec<Complex64>,
) -> Complex64 {
    let row = memory.weights.row(i);
    match kernel {
        Kernel::Diffusive => row.iter().zip(z).map(|(w, v)| w * v).sum(),
        Kernel::GateOnly | Kernel::GateRotate => {
            scratch.clear();
            scratch.extend(row.iter().zip(z).filter(|(w, _)| **w != Complex64::new(0.0, 0.0)).map(|(w, v)| w * v));
            gated_node_field(scratch, kernel, beta_coh).unwrap_or_else(|| scratch.iter().sum())
        }
    }
}

/// Clamped Stuart–Landau recall from a partial cue.
pub fn recall<R: Rng + ?Sized>(
    memory: &HoloMemory,
    cue: &Cue,
    target: &[Complex64],
    jitter: f64,
    cfg: &RecallConfig,
    rng: &mut R,
) -> Result<RecallOutcome> {
    let n = memory.n();
    if target.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: target.len() });
    }
    if cue.clamped.is_empty() || cue.clamped.len() != cue.phases.len() || cue.clamped.iter().any(|&i| i >= n) {
        return Err(Error::InvalidInput("cue must clamp at least one valid node".into()));
    }
    if !(jitter >= 0.0) {
        return Err(Error::param("jitter", "must be >= 0"));
    }
    let noise = Normal::new(0.0, jitter).map_err(|e| Error::param("jitter", e.to_string()))?;
    let mut is_clamped = vec![false; n];
    let mut clamp_value = vec![Complex64::new(0.0, 0.0); n];
    for (&i, &p) in cue.clamped.iter().zip(&cue.phases) {
        is_clamped[i] = true;
        let offset = if cfg.jitter_cue { noise.sample(rng) } else { 0.0 };
        clamp_value[i] = phase::unit(p + offset);
    }
    let mut z: Vec<Complex64> = (0..n)
        .map(|i| {
            if is_clamped[i] {
                clamp_value[i]
            } else {
                let ph = match cfg.init {
                    RecallInit::JitteredTarget => target[i].arg() + noise.sample(rng),
                    RecallInit::Random => rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
                };
                Complex64::from_polar(cfg.init_amplitude, ph)
            }
        })
        .collect();
    let omega: Vec<f64> = (0..n)
        .map(|_| if cfg.detuning > 0.0 { rng.random_range(-cfg.detuning..cfg.detuning) } else { 0.0 })
        .collect();

    let mut scratch = Vec::with_capacity(n);
    let mut still = 0;
    let mut converged = false;
    let mut steps = 0;
    while steps < cfg.max_steps {
        let field: Vec<Complex64> = (0..n)
            .map(|i| if is_clamped[i] { Complex64::new(0.0, 0.0) } else { memory_node_field(memory, &z, i, cfg.kernel, cfg.beta_coh, &mut scratch) })
            .collect();
        let mut max_change: f64 = 0.0;
        for i in 0..n {
            if is_clamped[i] {
                continue;
            }
            let next = imex_node(z[i], cfg.alpha, omega[i], cfg.beta, 0.0, field[i] * cfg.kappa, cfg.dt);
            if !next.is_finite() {
                return Err(Error::IntegrationDivergence { node: i, step: steps as u64 });
            }
            if next.norm() >= AMPLITUDE_EPS && z[i].norm() >= AMPLITUDE_EPS {
                max_change = max_change.max(phase::wrap(next.arg() - z[i].arg()).abs());
            } else {
                max_change = f64::INFINITY;
            }
            z[i] = next;
        }
        steps += 1;
        still = if max_change < cfg.tolerance { still + 1 } else { 0 };
        if still >= cfg.patience {
            converged = true;
            break;
        }
    }
    let mut metrics = RecallMetrics::evaluate(&z, target, cfg.thresholds)?;
    metrics.converged = converged;
    metrics.steps = steps;
    Ok(RecallOutcome { state: z, metrics })
}

/// Asynchronous phase-only retrieval `z_i ← e^{i arg f_i}` in index order,
/// until no phase moves by more than `tol` in a sweep. Returns the number
/// of sweeps used and whether a fixed point was reached.
pub fn iterate_phases(
    memory: &HoloMemory,
    z: &mut [Complex64],
    kernel: Kernel,
    beta_coh: f64,
    max_sweeps: usize,
    tol: f64,
) -> (usize, bool) {
    let mut scratch = Vec::with_capacity(z.len());
    for sweep in 1..=max_sweeps {
        let mut moved: f64 = 0.0;
        for i in 0..z.len() {
            let f = memory_node_field(memory, z, i, kernel, beta_coh, &mut scratch);
            if f.norm() < AMPLITUDE_EPS {
                continue;
            }
            let next = f / f.norm();
            moved = moved.max((next - z[i]).norm());
            z[i] = next;
        }
        if moved <= tol {
            return (sweep, true);
        }
    }
    (max_sweeps, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::holo::{bipolar_to_phasor, StoreOptions};
    use crate::rng::stream_rng;

    fn random_bipolar(n: usize, rng: &mut impl Rng) -> Vec<Complex64> {
        let bits: Vec<i8> = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        bipolar_to_phasor(&bits)
    }

    #[test]
    fn full_cue_is_exact() {
        let mut rng = stream_rng("recall", 0, "x");
        let pats: Vec<_> = (0..3).map(|_| random_bipolar(16, &mut rng)).collect();
        let mut m = HoloMemory::new(16, StoreOptions::default());
        m.store(&pats).unwrap();
        let out = recall(&m, &Cue::full(&pats[0]), &pats[0], 0.3, &RecallConfig { jitter_cue: false, ..RecallConfig::default() }, &mut rng).unwrap();
        assert!((out.metrics.overlap - 1.0).abs() < 1e-12);
        assert!(out.metrics.phase_rmse < 1e-12);
        assert!(out.metrics.success);
    }

    #[test]
    fn cue_fraction_is_validated() {
        let mut rng = stream_rng("recall", 0, "x");
        let p = random_bipolar(8, &mut rng);
        assert!(Cue::from_pattern(&p, 0.0, &mut rng).is_err());
        assert_eq!(Cue::from_pattern(&p, 0.25, &mut rng).unwrap().clamped.len(), 2);
    }

    #[test]
    fn iterative_retrieval_cleans_a_noisy_query() {
        let mut rng = stream_rng("recall", 2, "it");
        let n = 64;
        let pats: Vec<_> = (0..3).map(|_| random_bipolar(n, &mut rng)).collect();
        let mut m = HoloMemory::new(n, StoreOptions { centering: false, zero_diagonal: true });
        m.store(&pats).unwrap();
        let mut q = pats[1].clone();
        for v in q.iter_mut().take(6) {
            *v = -*v;
        }
        let (_, fixed) = iterate_phases(&m, &mut q, Kernel::GateRotate, 3.0, 50, 1e-12);
        assert!(fixed);
        assert_eq!(q, pats[1]);
    }

    #[test]
    fn mean_overlap_degrades_with_jitter() {
        let mut rng = stream_rng("recall", 3, "mono");
        let n = 32;
        let pats: Vec<_> = (0..3).map(|_| random_bipolar(n, &mut rng)).collect();
        let mut m = HoloMemory::new(n, StoreOptions::default());
        m.store(&pats).unwrap();
        let cfg = RecallConfig { max_steps: 300, kernel: Kernel::Diffusive, ..RecallConfig::default() };
        let mean_at = |sigma: f64| {
            let mut r = stream_rng("recall", 3, "trials");
            (0..24)
                .map(|_| {
                    let cue = Cue::from_pattern(&pats[0], 0.3, &mut r).unwrap();
                    recall(&m, &cue, &pats[0], sigma, &cfg, &mut r).unwrap().metrics.overlap
                })
                .sum::<f64>()
                / 24.0
        };
        let levels: Vec<f64> = [0.0, 0.5, 1.0, 2.0].iter().map(|&s| mean_at(s)).collect();
        assert!(levels.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{levels:?}");
    }
}
