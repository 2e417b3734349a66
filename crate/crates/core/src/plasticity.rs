//! Three-factor plasticity: coincidence, dual eligibility traces, gates,
//! modulator / PRP dynamics, weight updates and homeostasis.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CoincidenceForm {
    /// cos(φ_j − φ_i)
    #[default]
    PhaseOnly,
    /// |z_i||z_j| cos(φ_j − φ_i)
    PhaseAmp,
    /// Re(z_i conj(z_j))
    ComplexRe,
}

/// Per-edge coincidence drive `h_ij`.
pub fn coincidence(z: &[Complex64], edges: &[(usize, usize)], form: CoincidenceForm) -> Vec<f64> {
    edges
        .iter()
        .map(|&(i, j)| {
            let (zi, zj) = (z[i], z[j]);
            match form {
                CoincidenceForm::PhaseOnly => (zj.arg() - zi.arg()).cos(),
                CoincidenceForm::PhaseAmp => zi.norm() * zj.norm() * (zj.arg() - zi.arg()).cos(),
                CoincidenceForm::ComplexRe => (zi * zj.conj()).re,
            }
        })
        .collect()
}

/// Activity gate `u_ij = 1[|z_i||z_j| > θ_u]`.
pub fn activity_gate(z: &[Complex64], edges: &[(usize, usize)], theta_u: f64) -> Vec<bool> {
    edges.iter().map(|&(i, j)| z[i].norm() * z[j].norm() > theta_u).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceParams {
    pub tau_f: f64,
    pub tau_s: f64,
    pub k_f: f64,
    pub k_s: f64,
}

impl Default for TraceParams {
    fn default() -> Self {
        Self {
            tau_f: 0.2,
            tau_s: 5.0,
            k_f: 1.0,
            k_s: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulatorParams {
    pub tau_m: f64,
    pub tau_p: f64,
    pub prp_threshold: f64,
    pub prp_gain: f64,
}

impl Default for ModulatorParams {
    fn default() -> Self {
        Self {
            tau_m: 0.5,
            tau_p: 20.0,
            prp_threshold: 0.1,
            prp_gain: 1.0,
        }
    }
}

/// Traces and neuromodulatory scalars for one simulation.
///
/// Traces are stored per structural edge, so they can never be non-zero
/// off the adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct PlasticityState {
    edges: Vec<(usize, usize)>,
    pub e_fast: Vec<f64>,
    pub e_slow: Vec<f64>,
    pub traces: TraceParams,
    pub modulator: f64,
    pub prp: f64,
    pub modulation: ModulatorParams,
}

impl PlasticityState {
    pub fn new(edges: Vec<(usize, usize)>, traces: TraceParams, modulation: ModulatorParams) -> Result<Self> {
        for (name, v) in [
            ("tau_f", traces.tau_f),
            ("tau_s", traces.tau_s),
            ("tau_m", modulation.tau_m),
            ("tau_p", modulation.tau_p),
        ] {
            if !(v > 0.0) {
                return Err(Error::param(name, "time constants must be > 0"));
            }
        }
        let m = edges.len();
        Ok(Self {
            edges,
            e_fast: vec![0.0; m],
            e_slow: vec![0.0; m],
            traces,
            modulator: 0.0,
            prp: 0.0,
            modulation,
        })
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn reset_traces(&mut self) {
        self.e_fast.fill(0.0);
        self.e_slow.fill(0.0);
    }

    /// Exact-exponential trace step; the slow trace integrates the fast
    /// value from before this step's drive.
    pub fn update_traces(&mut self, h: &[f64], dt: f64) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::param("dt", "must be > 0"));
        }
        if h.len() != self.edges.len() {
            return Err(Error::DimensionMismatch {
                expected: self.edges.len(),
                got: h.len(),
            });
        }
        let p = &self.traces;
        let df = (-dt / p.tau_f).exp();
        let ds = (-dt / p.tau_s).exp();
        for ((ef, es), &hv) in self.e_fast.iter_mut().zip(self.e_slow.iter_mut()).zip(h) {
            let old = *ef;
            *ef = old * df + dt * p.k_f * hv;
            *es = *es * ds + dt * p.k_s * old;
        }
        Ok(())
    }

    /// Decays M, adds this step's pulses, then updates PRP from the new M.
    pub fn update_modulator(&mut self, pulses: &[f64], dt: f64) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::param("dt", "must be > 0"));
        }
        if let Some(&a) = pulses.iter().find(|&&a| !(a >= 0.0) || !a.is_finite()) {
            return Err(Error::InvalidInput(format!("pulse amplitude must be finite and >= 0, got {a}")));
        }
        let p = &self.modulation;
        self.modulator = self.modulator * (-dt / p.tau_m).exp() + pulses.iter().sum::<f64>();
        let drive = if self.modulator > p.prp_threshold { p.prp_gain } else { 0.0 };
        self.prp = self.prp * (-dt / p.tau_p).exp() + dt * drive;
        Ok(())
    }

    pub fn mean_abs_fast(&self) -> f64 {
        mean_abs(&self.e_fast)
    }

    pub fn mean_abs_slow(&self) -> f64 {
        mean_abs(&self.e_slow)
    }

    /// `step,M,PRP,mean|e_fast|,mean|e_slow|`
    pub fn csv_row(&self, step: u64) -> String {
        format!(
            "{step},{},{},{},{}",
            self.modulator,
            self.prp,
            self.mean_abs_fast(),
            self.mean_abs_slow()
        )
    }
}

fn mean_abs(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().map(|x| x.abs()).sum::<f64>() / v.len() as f64
    }
}

/// Source of the phase compared against the gate window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GateReference {
    /// Exogenous clock with phase `frequency · t`.
    MasterClock { frequency: f64 },
    /// Phase of the network mean field arg(Σz).
    MeanField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum GateConfig {
    Always,
    PhaseWindow {
        reference: GateReference,
        center: f64,
        half_width: f64,
    },
    SpindleBurst {
        /// `(start_step, duration_steps)`, ordered and non-overlapping.
        epochs: Vec<(u64, u64)>,
    },
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig::Always
    }
}

impl GateConfig {
    /// Regular bursts of `burst` steps every `period` steps over `total` steps.
    pub fn spindles(total: u64, period: u64, burst: u64) -> Self {
        let epochs = (0..total)
            .step_by(period.max(1) as usize)
            .map(|s| (s, burst.min(total - s)))
            .collect();
        GateConfig::SpindleBurst { epochs }
    }

    /// Default NREM spindle train: 20-step bursts every 200 steps.
    pub fn default_spindles(total: u64) -> Self {
        Self::spindles(total, 200, 20)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            GateConfig::Always => Ok(()),
            GateConfig::PhaseWindow { half_width, .. } => {
                if *half_width > 0.0 && *half_width <= PI {
                    Ok(())
                } else {
                    Err(Error::param("half_width", "must lie in (0, π]"))
                }
            }
            GateConfig::SpindleBurst { epochs } => {
                let ordered = epochs.windows(2).all(|w| w[0].0 + w[0].1 <= w[1].0);
                if ordered {
                    Ok(())
                } else {
                    Err(Error::param("epochs", "burst epochs must be ordered and non-overlapping"))
                }
            }
        }
    }

    /// Reference phase for the window at time `t` given the network state.
    pub fn reference_phase(&self, z: &[Complex64], t: f64) -> f64 {
        match self {
            GateConfig::PhaseWindow {
                reference: GateReference::MasterClock { frequency },
                ..
            } => phase::wrap(frequency * t),
            GateConfig::PhaseWindow {
                reference: GateReference::MeanField,
                ..
            } => phase::mean_field_phase(z).unwrap_or(0.0),
            _ => 0.0,
        }
    }

    /// Number of open steps in `0..total` for a burst schedule.
    pub fn open_steps(&self, total: u64) -> Option<u64> {
        match self {
            GateConfig::Always => Some(total),
            GateConfig::SpindleBurst { epochs } => {
                Some(epochs.iter().map(|&(s, d)| (s + d).min(total).saturating_sub(s.min(total))).sum())
            }
            GateConfig::PhaseWindow { .. } => None,
        }
    }
}

/// Gate value: 1 inside the open window `(−Δ, Δ)` or a burst epoch.
pub fn gate_value(gate: &GateConfig, ref_phase: f64, step: u64) -> bool {
    match gate {
        GateConfig::Always => true,
        GateConfig::PhaseWindow { center, half_width, .. } => phase::wrap(ref_phase - center).abs() < *half_width,
        GateConfig::SpindleBurst { epochs } => epochs.iter().any(|&(s, d)| step >= s && step < s + d),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    #[default]
    Fast,
    Slow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModulatorSource {
    #[default]
    M,
    Prp,
    /// Constant 1: used where the gate alone licenses plasticity.
    Unit,
}

impl ModulatorSource {
    pub fn level(self, state: &PlasticityState) -> f64 {
        match self {
            ModulatorSource::M => state.modulator,
            ModulatorSource::Prp => state.prp,
            ModulatorSource::Unit => 1.0,
        }
    }
}

/// `ΔW_ij = η · gate · mod · u_ij · e_ij` on structural edges.
///
/// Returns Σ|ΔW| actually applied. When `cap` is set the update is scaled
/// so the running total never exceeds it; the remaining allowance is
/// decremented in place.
#[allow(clippy::too_many_arguments)]
pub fn apply_three_factor(
    weights: &mut DMatrix<f64>,
    state: &PlasticityState,
    gate: bool,
    eta: f64,
    trace: TraceKind,
    source: ModulatorSource,
    sparsity: Option<&[bool]>,
    cap: Option<&mut f64>,
) -> f64 {
    let scale = if gate { eta * source.level(state) } else { 0.0 };
    if scale == 0.0 {
        return 0.0;
    }
    let e = match trace {
        TraceKind::Fast => &state.e_fast,
        TraceKind::Slow => &state.e_slow,
    };
    let active = |k: usize| sparsity.is_none_or(|u| u[k]);
    let total: f64 = (0..e.len()).filter(|&k| active(k)).map(|k| (scale * e[k]).abs()).sum();
    let factor = match cap {
        Some(remaining) => {
            let f = if total > *remaining && total > 0.0 { *remaining / total } else { 1.0 };
            *remaining = (*remaining - total * f).max(0.0);
            f
        }
        None => 1.0,
    };
    for (k, &(i, j)) in state.edges().iter().enumerate() {
        if active(k) {
            weights[(i, j)] += factor * scale * e[k];
        }
    }
    total * factor
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Homeostasis {
    #[default]
    None,
    /// W ← (1 − rate) W
    LinearDecay { rate: f64 },
    /// Phase noise on the lowest-magnitude `percentile`% of each group.
    AdaptivePhaseNoise { percentile: f64, noise_scale: f64 },
    /// w ← w (1 − strength · exp(−|w| / scale)): weak weights shrink more.
    NonlinearShrinkage { strength: f64, scale: f64 },
}

impl Homeostasis {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Homeostasis::None => Ok(()),
            Homeostasis::LinearDecay { rate } if (0.0..1.0).contains(&rate) => Ok(()),
            Homeostasis::LinearDecay { .. } => Err(Error::param("decay_rate", "must lie in [0, 1)")),
            Homeostasis::AdaptivePhaseNoise { percentile, noise_scale } => {
                if percentile > 0.0 && percentile < 100.0 && noise_scale >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::param("percentile", "must lie in (0, 100) with noise_scale >= 0"))
                }
            }
            Homeostasis::NonlinearShrinkage { strength, scale } => {
                if (0.0..=1.0).contains(&strength) && scale > 0.0 {
                    Ok(())
                } else {
                    Err(Error::param("strength", "strength in [0, 1] and scale > 0 required"))
                }
            }
        }
    }
}

/// A weight that homeostasis can rescale or phase-perturb.
pub trait WeightEntry: Copy {
    fn magnitude(self) -> f64;
    fn scaled(self, s: f64) -> Self;
    /// Rotates a complex weight by ξ; real weights take the real part, cos ξ.
    fn rotated(self, xi: f64) -> Self;
}

impl WeightEntry for f64 {
    fn magnitude(self) -> f64 {
        self.abs()
    }
    fn scaled(self, s: f64) -> Self {
        self * s
    }
    fn rotated(self, xi: f64) -> Self {
        self * xi.cos()
    }
}

impl WeightEntry for Complex64 {
    fn magnitude(self) -> f64 {
        self.norm()
    }
    fn scaled(self, s: f64) -> Self {
        self * s
    }
    fn rotated(self, xi: f64) -> Self {
        self * phase::unit(xi)
    }
}

/// Indices of the `floor(percentile% · len)` smallest-magnitude entries.
pub fn lowest_percentile<T: WeightEntry>(group: &[T], percentile: f64) -> Vec<usize> {
    let k = ((percentile * group.len() as f64) / 100.0).floor() as usize;
    let mut idx: Vec<usize> = (0..group.len()).collect();
    idx.sort_by(|&a, &b| group[a].magnitude().total_cmp(&group[b].magnitude()).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Applies homeostasis to one group of weights (e.g. one action's matrix).
pub fn homeostasis_group<T: WeightEntry, R: Rng + ?Sized>(group: &mut [T], mode: &Homeostasis, rng: &mut R) -> Result<()> {
    mode.validate()?;
    match *mode {
        Homeostasis::None => {}
        Homeostasis::LinearDecay { rate } => group.iter_mut().for_each(|w| *w = w.scaled(1.0 - rate)),
        Homeostasis::AdaptivePhaseNoise { percentile, noise_scale } => {
            let noise = Normal::new(0.0, noise_scale).map_err(|e| Error::param("noise_scale", e.to_string()))?;
            for k in lowest_percentile(group, percentile) {
                group[k] = group[k].rotated(noise.sample(rng));
            }
        }
        Homeostasis::NonlinearShrinkage { strength, scale } => {
            group
                .iter_mut()
                .for_each(|w| *w = w.scaled(1.0 - strength * (-w.magnitude() / scale).exp()));
        }
    }
    Ok(())
}

/// Homeostasis over the structural edges of a real weight matrix, treated
/// as a single group.
pub fn homeostasis_edges<R: Rng + ?Sized>(
    weights: &mut DMatrix<f64>,
    edges: &[(usize, usize)],
    mode: &Homeostasis,
    rng: &mut R,
) -> Result<()> {
    let mut vals: Vec<f64> = edges.iter().map(|&(i, j)| weights[(i, j)]).collect();
    homeostasis_group(&mut vals, mode, rng)?;
    for (&(i, j), v) in edges.iter().zip(vals) {
        weights[(i, j)] = v;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Adjacency;
    use crate::rng::stream_rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn state(edges: Vec<(usize, usize)>) -> PlasticityState {
        PlasticityState::new(edges, TraceParams::default(), ModulatorParams::default()).unwrap()
    }

    #[test]
    fn coincidence_forms() {
        let u = |p: f64| phase::unit(p);
        let edges = [(0, 1)];
        for form in [CoincidenceForm::PhaseOnly, CoincidenceForm::PhaseAmp, CoincidenceForm::ComplexRe] {
            assert!((coincidence(&[u(0.3), u(0.3)], &edges, form)[0] - 1.0).abs() < 1e-12);
            assert!((coincidence(&[u(0.3), u(0.3 + PI)], &edges, form)[0] + 1.0).abs() < 1e-12);
            let z = [Complex64::new(2.0, 0.0), Complex64::new(0.5, 0.0)];
            assert!((coincidence(&z, &edges, form)[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pure_decay_of_fast_trace() {
        let mut s = state(vec![(0, 1)]);
        s.traces.tau_f = 0.2;
        s.e_fast[0] = 1.0;
        s.update_traces(&[0.0], 0.2).unwrap();
        assert!((s.e_fast[0] - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn constant_drive_reaches_geometric_fixed_point() {
        let mut s = state(vec![(0, 1)]);
        let (dt, tau) = (0.05, 0.2);
        s.traces.tau_f = tau;
        for _ in 0..2000 {
            s.update_traces(&[1.0], dt).unwrap();
        }
        // e* = dt·k_f·h / (1 − e^{−dt/τ})
        let fixed = dt / (1.0 - (-dt / tau).exp());
        assert!((s.e_fast[0] - fixed).abs() < 1e-12);
    }

    #[test]
    fn impulse_slow_trace_lags_fast() {
        let mut s = state(vec![(0, 1)]);
        let dt = 0.05;
        let (mut fast, mut slow) = (Vec::new(), Vec::new());
        for t in 0..400 {
            s.update_traces(&[if t == 0 { 1.0 } else { 0.0 }], dt).unwrap();
            fast.push(s.e_fast[0]);
            slow.push(s.e_slow[0]);
        }
        // Oracle: direct convolution of the two exponential kernels.
        let (af, as_) = ((-dt / s.traces.tau_f).exp(), (-dt / s.traces.tau_s).exp());
        for (t, &v) in slow.iter().enumerate() {
            let oracle: f64 = (0..t).map(|k| dt * dt * af.powi(k as i32) * as_.powi((t - 1 - k) as i32)).sum();
            assert!((v - oracle).abs() < 1e-12, "t={t}");
        }
        let argmax = |v: &[f64]| v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert!(argmax(&slow) >= argmax(&fast) + 1);
        let tail = slow.len() - 1;
        assert!((slow[tail] / slow[tail - 1] - as_).abs() < 1e-3);
    }

    #[test]
    fn modulator_examples() {
        let mut s = state(vec![]);
        s.modulation.tau_m = 0.5;
        s.modulator = 1.0;
        s.update_modulator(&[], 0.5).unwrap();
        assert!((s.modulator - (-1f64).exp()).abs() < 1e-15);

        let mut s = state(vec![]);
        s.update_modulator(&[2.0], 0.01).unwrap();
        assert_eq!(s.modulator, 2.0);
        assert!(s.update_modulator(&[-0.1], 0.01).is_err());
    }

    #[test]
    fn prp_under_sustained_modulator() {
        let mut s = state(vec![]);
        s.modulation = ModulatorParams {
            tau_m: 1e9,
            tau_p: 2.0,
            prp_threshold: 0.5,
            prp_gain: 0.7,
        };
        s.modulator = 1.0;
        let dt = 0.001;
        let steps = 3000;
        for _ in 0..steps {
            s.update_modulator(&[], dt).unwrap();
        }
        let t = dt * steps as f64;
        let analytic = 0.7 * 2.0 * (1.0 - (-t / 2.0f64).exp());
        assert!((s.prp - analytic).abs() / analytic < 1e-3);
    }

    #[test]
    fn gate_examples() {
        assert!(gate_value(&GateConfig::Always, 1.3, 99));
        let g = GateConfig::PhaseWindow {
            reference: GateReference::MeanField,
            center: 0.4,
            half_width: 0.5,
        };
        assert!(gate_value(&g, 0.4, 0));
        assert!(!gate_value(&g, 0.9, 0));
        assert!(!gate_value(&g, -0.1, 0));
        let b = GateConfig::default_spindles(1000);
        assert!(gate_value(&b, 0.0, 0) && gate_value(&b, 0.0, 219) && !gate_value(&b, 0.0, 220));
    }

    #[test]
    fn three_factor_examples() {
        let adj = Adjacency::from_edges(2, [(0, 1)]).unwrap();
        let mut s = state(adj.edges());
        s.e_fast = vec![0.5, 0.0];
        s.modulator = 2.0;
        let mut w = DMatrix::zeros(2, 2);
        let total = apply_three_factor(&mut w, &s, true, 0.1, TraceKind::Fast, ModulatorSource::M, None, None);
        assert!((w[(0, 1)] - 0.1).abs() < 1e-15 && w[(1, 0)] == 0.0);
        assert!((total - 0.1).abs() < 1e-15);

        let before = w.clone();
        apply_three_factor(&mut w, &s, false, 0.1, TraceKind::Fast, ModulatorSource::M, None, None);
        assert_eq!(w, before);
        s.modulator = 0.0;
        apply_three_factor(&mut w, &s, true, 0.1, TraceKind::Fast, ModulatorSource::M, None, None);
        assert_eq!(w, before);
    }

    #[test]
    fn capped_update_respects_budget() {
        let adj = Adjacency::complete(3);
        let mut s = state(adj.edges());
        s.e_fast.fill(1.0);
        let mut w = DMatrix::zeros(3, 3);
        let mut remaining = 0.3;
        let used = apply_three_factor(&mut w, &s, true, 1.0, TraceKind::Fast, ModulatorSource::Unit, None, Some(&mut remaining));
        assert!((used - 0.3).abs() < 1e-12 && remaining == 0.0);
        assert!((w.iter().map(|v| v.abs()).sum::<f64>() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn homeostasis_examples() {
        let mut rng = stream_rng("plasticity", 0, "h");
        let mut w = vec![1.0; 5];
        homeostasis_group(&mut w, &Homeostasis::LinearDecay { rate: 0.1 }, &mut rng).unwrap();
        assert!(w.iter().all(|&v| (v - 0.9).abs() < 1e-15));
        let before = w.clone();
        homeostasis_group(&mut w, &Homeostasis::LinearDecay { rate: 0.0 }, &mut rng).unwrap();
        assert_eq!(w, before);
        assert!(Homeostasis::LinearDecay { rate: 1.0 }.validate().is_err());

        let mut s = vec![0.1, 1.0];
        homeostasis_group(&mut s, &Homeostasis::NonlinearShrinkage { strength: 0.5, scale: 0.5 }, &mut rng).unwrap();
        assert!(1.0 - s[0] / 0.1 > 1.0 - s[1] / 1.0);
    }

    #[test]
    fn adaptive_noise_touches_exactly_the_lowest_decile() {
        let mut rng = stream_rng("plasticity", 1, "noise");
        let mags: Vec<f64> = (0..100).map(|_| rng.random_range(0.01..1.0)).collect();
        let mut w: Vec<Complex64> = mags.iter().map(|&m| Complex64::from_polar(m, rng.random_range(-PI..PI))).collect();
        let before = w.clone();
        homeostasis_group(&mut w, &Homeostasis::AdaptivePhaseNoise { percentile: 10.0, noise_scale: 1.0 }, &mut rng).unwrap();
        // Oracle: the ten smallest magnitudes by explicit sort.
        let mut order: Vec<usize> = (0..100).collect();
        order.sort_by(|&a, &b| mags[a].total_cmp(&mags[b]));
        let expected: std::collections::BTreeSet<usize> = order[..10].iter().copied().collect();
        let changed: std::collections::BTreeSet<usize> = (0..100).filter(|&k| w[k] != before[k]).collect();
        assert_eq!(changed, expected);
        for k in 0..100 {
            assert!((w[k].norm() - before[k].norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn spindle_gate_budget_is_exact() {
        let g = GateConfig::spindles(1000, 200, 20);
        let open = (0..1000).filter(|&t| gate_value(&g, 0.0, t)).count() as u64;
        assert_eq!(Some(open), g.open_steps(1000));
        assert_eq!(open, 100);
    }

    proptest! {
        #[test]
        fn zero_drive_decay_is_exact(ef in -5.0f64..5.0, es in -5.0f64..5.0, dt in 0.001f64..1.0,
                                     tau_f in 0.05f64..1.0, tau_s in 0.5f64..10.0) {
            let mut s = PlasticityState::new(vec![(0, 1)], TraceParams { tau_f, tau_s, k_f: 1.0, k_s: 0.0 },
                                             ModulatorParams::default()).unwrap();
            s.e_fast[0] = ef;
            s.e_slow[0] = es;
            s.update_traces(&[0.0], dt).unwrap();
            prop_assert_eq!(s.e_fast[0], ef * (-dt / tau_f).exp());
            prop_assert_eq!(s.e_slow[0], es * (-dt / tau_s).exp());
            if ef != 0.0 {
                prop_assert!(s.e_fast[0].abs() < ef.abs());
            }
        }

        #[test]
        fn spindle_gate_counts(period in 5u64..300, burst in 1u64..50, total in 1u64..2000) {
            let burst = burst.min(period);
            let g = GateConfig::spindles(total, period, burst);
            prop_assert!(g.validate().is_ok());
            let open = (0..total).filter(|&t| gate_value(&g, 0.0, t)).count() as u64;
            let full = total / period;
            let rem = total % period;
            prop_assert_eq!(open, full * burst + rem.min(burst));
        }

        #[test]
        fn phase_window_counts_within_one_per_cycle(half in 0.1f64..3.0, center in -PI..PI, cycles in 1usize..20) {
            let g = GateConfig::PhaseWindow { reference: GateReference::MasterClock { frequency: 1.0 }, center, half_width: half };
            let dt = 0.01;
            let steps = (cycles as f64 * 2.0 * PI / dt) as u64;
            let open = (0..steps).filter(|&k| {
                let t = k as f64 * dt;
                gate_value(&g, g.reference_phase(&[], t), k)
            }).count() as f64;
            let expected = cycles as f64 * (2.0 * half / dt);
            prop_assert!((open - expected).abs() <= cycles as f64 + 1.0);
        }

        #[test]
        fn updates_are_local(e in prop::collection::vec(-1.0f64..1.0, 6), k in 0usize..6, bump in 0.1f64..1.0) {
            let adj = Adjacency::complete(3);
            let mut s = PlasticityState::new(adj.edges(), TraceParams::default(), ModulatorParams::default()).unwrap();
            s.e_fast = e.clone();
            s.modulator = 1.0;
            let mut w1 = DMatrix::zeros(3, 3);
            apply_three_factor(&mut w1, &s, true, 0.3, TraceKind::Fast, ModulatorSource::M, None, None);
            s.e_fast[k] += bump;
            let mut w2 = DMatrix::zeros(3, 3);
            apply_three_factor(&mut w2, &s, true, 0.3, TraceKind::Fast, ModulatorSource::M, None, None);
            for (idx, &(i, j)) in s.edges().iter().enumerate() {
                if idx != k {
                    prop_assert_eq!(w1[(i, j)], w2[(i, j)]);
                }
            }
        }

        #[test]
        fn linear_decay_contracts(w in prop::collection::vec(-2.0f64..2.0, 1..20), rate in 0.001f64..0.99) {
            prop_assume!(w.iter().any(|&v| v != 0.0));
            let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let mut after = w.clone();
            homeostasis_group(&mut after, &Homeostasis::LinearDecay { rate }, &mut stream_rng("p", 0, "x")).unwrap();
            prop_assert!(norm(&after) < norm(&w));
        }
    }
}
