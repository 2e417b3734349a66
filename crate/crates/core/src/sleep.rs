//! Wake → NREM → REM learning loop, synchrony guardrails, phase scramble
//! and weight-norm budget accounting.

use std::fmt;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{InputSignal, PhasorGraph};
use crate::phase;
use crate::plasticity::{
    apply_three_factor, coincidence, gate_value, homeostasis_edges, CoincidenceForm, GateConfig, Homeostasis, ModulatorSource,
    PlasticityState, TraceKind,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SleepPhase {
    Wake,
    Nrem,
    Rem,
}

impl fmt::Display for SleepPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SleepPhase::Wake => "wake",
            SleepPhase::Nrem => "nrem",
            SleepPhase::Rem => "rem",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub phase: SleepPhase,
    pub steps: u64,
    pub eta: f64,
    pub gate: GateConfig,
    pub homeostasis: Homeostasis,
    pub input_enabled: bool,
    pub trace: TraceKind,
    pub source: ModulatorSource,
    /// Optional cap on Σ|ΔW| over the whole segment.
    pub update_cap: Option<f64>,
}

impl Segment {
    /// Fast-trace × M updates with input on.
    pub fn wake(steps: u64, eta: f64) -> Self {
        Self {
            phase: SleepPhase::Wake,
            steps,
            eta,
            gate: GateConfig::Always,
            homeostasis: Homeostasis::None,
            input_enabled: true,
            trace: TraceKind::Fast,
            source: ModulatorSource::M,
            update_cap: None,
        }
    }

    /// Slow-trace × PRP capture under the default spindle train, then decay.
    pub fn nrem(steps: u64, eta: f64, decay_rate: f64) -> Self {
        Self {
            phase: SleepPhase::Nrem,
            steps,
            eta,
            gate: GateConfig::default_spindles(steps),
            homeostasis: Homeostasis::LinearDecay { rate: decay_rate },
            input_enabled: false,
            trace: TraceKind::Slow,
            source: ModulatorSource::Prp,
            update_cap: None,
        }
    }

    /// Offline replay segment; replay content is supplied by the hook.
    pub fn rem(steps: u64, eta: f64) -> Self {
        Self {
            phase: SleepPhase::Rem,
            steps,
            eta,
            gate: GateConfig::Always,
            homeostasis: Homeostasis::None,
            input_enabled: false,
            trace: TraceKind::Fast,
            source: ModulatorSource::Unit,
            update_cap: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BudgetMode {
    /// Flag violations and leave W alone.
    #[default]
    Record,
    /// Rescale W back onto the budget sphere after each violation.
    Project,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SleepSchedule {
    pub segments: Vec<Segment>,
    pub budget: Option<f64>,
    pub budget_mode: BudgetMode,
    pub dt: f64,
    pub coincidence: CoincidenceForm,
}

impl SleepSchedule {
    pub fn new(segments: Vec<Segment>, dt: f64) -> Self {
        Self {
            segments,
            budget: None,
            budget_mode: BudgetMode::Record,
            dt,
            coincidence: CoincidenceForm::PhaseOnly,
        }
    }

    /// Wake → NREM → REM.
    pub fn cycle(wake: Segment, nrem: Segment, rem: Segment, dt: f64) -> Self {
        Self::new(vec![wake, nrem, rem], dt)
    }

    /// NREM → REM → NREM with the NREM budget split across both halves.
    pub fn wedged(nrem: Segment, rem: Segment, dt: f64) -> Self {
        let first = nrem.steps / 2;
        let mut a = nrem.clone();
        a.steps = first;
        a.gate = GateConfig::default_spindles(first);
        let mut b = nrem;
        b.steps -= first;
        b.gate = GateConfig::default_spindles(b.steps);
        Self::new(vec![a, rem, b], dt)
    }

    pub fn total_steps(&self) -> u64 {
        self.segments.iter().map(|s| s.steps).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::param("segments", "schedule must not be empty"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::param("dt", "must be > 0"));
        }
        if let Some(b) = self.budget {
            if !(b > 0.0) {
                return Err(Error::param("budget", "must be > 0"));
            }
        }
        for s in &self.segments {
            if !(s.eta >= 0.0) {
                return Err(Error::param("eta", "learning rates must be >= 0"));
            }
            if s.input_enabled != (s.phase == SleepPhase::Wake) {
                return Err(Error::param("input_enabled", "input is on in wake and off in NREM/REM"));
            }
            s.gate.validate()?;
            s.homeostasis.validate()?;
        }
        Ok(())
    }
}

/// Per-step callbacks that connect a task to the loop.
pub trait EnvHook {
    /// External drive for a wake step.
    fn input(&mut self, _phase: SleepPhase, _step: u64, _graph: &PhasorGraph) -> Option<InputSignal> {
        None
    }

    /// Modulator pulses (reward, progress) landing in this step.
    fn pulses(&mut self, _phase: SleepPhase, _step: u64, _graph: &PhasorGraph) -> Vec<f64> {
        Vec::new()
    }

    /// Runs right after integration: clamps, scrambles, guardrails, replay.
    fn post_step(&mut self, _phase: SleepPhase, _step: u64, _graph: &mut PhasorGraph) {}
}

/// A hook that does nothing.
pub struct NoHook;

impl EnvHook for NoHook {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub step: u64,
    pub phase: SleepPhase,
    pub r: f64,
    pub weight_norm: f64,
    pub modulator: f64,
    pub prp: f64,
}

impl MetricRow {
    /// `step,phase,R,‖W‖_F,M,PRP`
    pub fn csv(&self) -> String {
        format!("{},{},{},{},{},{}", self.step, self.phase, self.r, self.weight_norm, self.modulator, self.prp)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CycleReport {
    pub rows: Vec<MetricRow>,
    pub unstable: bool,
    pub budget_violations: u64,
    /// Gate-open update steps per segment.
    pub gated_steps: Vec<u64>,
    /// Σ|ΔW| applied per segment.
    pub update_mass: Vec<f64>,
    /// Set when integration diverged; rows hold the partial run.
    pub aborted: Option<Error>,
}

impl CycleReport {
    pub fn r_trace(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.r).collect()
    }
}

/// Executes the schedule in order. See [`EnvHook`] for task plumbing.
///
/// Each step: coincidence on the pre-step state, integrate, hook, traces,
/// pulses and modulator, gate, weight update, homeostasis, diagnostics.
pub fn run_cycle<H: EnvHook + ?Sized, R: Rng + ?Sized>(
    graph: &mut PhasorGraph,
    plasticity: &mut PlasticityState,
    schedule: &SleepSchedule,
    hook: &mut H,
    rng: &mut R,
) -> Result<CycleReport> {
    schedule.validate()?;
    let edges = plasticity.edges().to_vec();
    let dt = schedule.dt;
    let mut report = CycleReport::default();
    let mut global = 0u64;
    for seg in &schedule.segments {
        let mut gated = 0u64;
        let mut mass = 0.0;
        let mut allowance = seg.update_cap;
        for local in 0..seg.steps {
            let h = coincidence(&graph.z, &edges, schedule.coincidence);
            let input = if seg.input_enabled { hook.input(seg.phase, global, graph) } else { None };
            if let Err(e) = graph.step(input.as_ref(), dt) {
                report.aborted = Some(e);
                report.gated_steps.push(gated);
                report.update_mass.push(mass);
                return Ok(report);
            }
            hook.post_step(seg.phase, global, graph);
            plasticity.update_traces(&h, dt)?;
            let pulses = hook.pulses(seg.phase, global, graph);
            plasticity.update_modulator(&pulses, dt)?;
            let t = global as f64 * dt;
            let open = gate_value(&seg.gate, seg.gate.reference_phase(&graph.z, t), local);
            if open && seg.eta > 0.0 {
                gated += 1;
                mass += apply_three_factor(&mut graph.weights, plasticity, true, seg.eta, seg.trace, seg.source, None, allowance.as_mut());
            }
            if seg.homeostasis != Homeostasis::None {
                homeostasis_edges(&mut graph.weights, &edges, &seg.homeostasis, rng)?;
            }
            let norm = graph.weight_norm();
            if let Some(b) = schedule.budget {
                if norm > b {
                    report.unstable = true;
                    report.budget_violations += 1;
                    if schedule.budget_mode == BudgetMode::Project {
                        let s = b / norm;
                        for &(i, j) in &edges {
                            graph.weights[(i, j)] *= s;
                        }
                    }
                }
            }
            report.rows.push(MetricRow {
                step: global,
                phase: seg.phase,
                r: graph.order_parameter().unwrap_or(0.0),
                weight_norm: graph.weight_norm(),
                modulator: plasticity.modulator,
                prp: plasticity.prp,
            });
            global += 1;
        }
        report.gated_steps.push(gated);
        report.update_mass.push(mass);
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuardrailConfig {
    pub target_r: f64,
    pub band: (f64, f64),
    pub kappa_gain: f64,
    pub kick_strength: f64,
    pub rescue_jitter: f64,
    pub collapse_threshold: f64,
}

impl Default for GuardrailConfig {
    fn default() -> Self {
        Self {
            target_r: 0.76,
            band: (0.6, 0.9),
            kappa_gain: 0.05,
            kick_strength: 1.0,
            rescue_jitter: 0.5,
            collapse_threshold: 0.95,
        }
    }
}

impl GuardrailConfig {
    /// All mechanisms switched off.
    pub fn disabled() -> Self {
        Self {
            kappa_gain: 0.0,
            kick_strength: 0.0,
            rescue_jitter: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.band;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(Error::param("band", "need 0 <= R_lo < R_hi <= 1"));
        }
        if self.kappa_gain < 0.0 || self.kick_strength < 0.0 || self.rescue_jitter < 0.0 {
            return Err(Error::param("gains", "must be >= 0"));
        }
        Ok(())
    }
}

/// κ feedback toward the target, repulsive kicks above the band, and rescue
/// jitter at collapse.
pub fn apply_guardrails<R: Rng + ?Sized>(graph: &mut PhasorGraph, cfg: &GuardrailConfig, r: f64, rng: &mut R) {
    if cfg.kappa_gain > 0.0 {
        graph.dynamics.kappa = (graph.dynamics.kappa - cfg.kappa_gain * (r - cfg.target_r)).max(0.0);
    }
    if cfg.kick_strength > 0.0 && r > cfg.band.1 {
        if let Some(psi) = phase::mean_field_phase(&graph.z) {
            let size = cfg.kick_strength * (r - cfg.band.1);
            for (i, z) in graph.z.iter_mut().enumerate() {
                let offset = phase::wrap(z.arg() - psi);
                let dir = if offset > 1e-12 {
                    1.0
                } else if offset < -1e-12 {
                    -1.0
                } else if i % 2 == 0 {
                    1.0
                } else {
                    -1.0
                };
                *z *= phase::unit(dir * size);
            }
        }
    }
    if cfg.rescue_jitter > 0.0 && r >= cfg.collapse_threshold {
        let noise = Normal::new(0.0, cfg.rescue_jitter).expect("validated scale");
        for z in graph.z.iter_mut() {
            *z *= phase::unit(noise.sample(rng));
        }
    }
}

/// Randomly permutes phases across nodes, leaving every amplitude in place.
///
/// The phase multiset is unchanged, so R is too; what is destroyed is which
/// node carries which phase.
pub fn phase_scramble<R: Rng + ?Sized>(z: &mut [Complex64], rng: &mut R) {
    let mut phases: Vec<f64> = z.iter().map(|v| v.arg()).collect();
    phases.shuffle(rng);
    for (v, p) in z.iter_mut().zip(phases) {
        *v = Complex64::from_polar(v.norm(), p);
    }
}

/// True when every R in the trailing `window` samples is at or above `threshold`.
pub fn collapsed(r_trace: &[f64], window: usize, threshold: f64) -> bool {
    r_trace.len() >= window && window > 0 && r_trace[r_trace.len() - window..].iter().all(|&r| r >= threshold)
}

/// "Fully stable": at least 80% of seeds stayed within budget.
pub fn fully_stable(unstable_flags: &[bool]) -> bool {
    !unstable_flags.is_empty() && unstable_flags.iter().filter(|&&u| !u).count() as f64 >= 0.8 * unstable_flags.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Adjacency, Dynamics};
    use crate::plasticity::{ModulatorParams, TraceParams};
    use crate::rng::stream_rng;
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::PI;

    fn setup(n: usize, seed: u64) -> (PhasorGraph, PlasticityState) {
        let mut rng = stream_rng("sleep", seed, "ic");
        let z0: Vec<Complex64> = (0..n).map(|_| phase::unit(rng.random_range(-PI..PI))).collect();
        let omega: Vec<f64> = (0..n).map(|_| rng.random_range(0.8..1.2)).collect();
        let adj = Adjacency::complete(n);
        let ps = PlasticityState::new(adj.edges(), TraceParams::default(), ModulatorParams::default()).unwrap();
        let mut g = PhasorGraph::new(adj, omega, Dynamics::default(), z0).unwrap();
        g.weights.iter_mut().for_each(|w| *w *= 0.5);
        (g, ps)
    }

    struct Rewarding;
    impl EnvHook for Rewarding {
        fn pulses(&mut self, _: SleepPhase, step: u64, _: &PhasorGraph) -> Vec<f64> {
            if step % 10 == 0 { vec![1.0] } else { vec![] }
        }
    }

    #[test]
    fn zero_learning_rates_leave_weights_untouched() {
        let (mut g, mut ps) = setup(6, 0);
        let w0 = g.weights.clone();
        let sched = SleepSchedule::cycle(Segment::wake(200, 0.0), Segment::nrem(200, 0.0, 0.0), Segment::rem(100, 0.0), 0.05);
        run_cycle(&mut g, &mut ps, &sched, &mut Rewarding, &mut stream_rng("sleep", 0, "run")).unwrap();
        assert_eq!(g.weights, w0);
    }

    #[test]
    fn untagged_nrem_is_pure_forgetting() {
        let (mut g, mut ps) = setup(6, 1);
        let before = g.weight_norm();
        let sched = SleepSchedule::new(vec![Segment::nrem(400, 0.5, 0.001)], 0.05);
        let rep = run_cycle(&mut g, &mut ps, &sched, &mut NoHook, &mut stream_rng("sleep", 1, "run")).unwrap();
        assert!(g.weight_norm() < before);
        assert!(rep.rows.windows(2).all(|w| w[1].weight_norm < w[0].weight_norm));
    }

    #[test]
    fn budget_violations_are_recorded_or_projected() {
        for mode in [BudgetMode::Record, BudgetMode::Project] {
            let (mut g, mut ps) = setup(4, 2);
            let mut sched = SleepSchedule::new(vec![Segment::wake(300, 2.0)], 0.05);
            sched.budget = Some(1.0);
            sched.budget_mode = mode;
            let rep = run_cycle(&mut g, &mut ps, &sched, &mut Rewarding, &mut stream_rng("sleep", 2, "run")).unwrap();
            assert!(rep.unstable && rep.budget_violations > 0);
            match mode {
                BudgetMode::Record => assert!(g.weight_norm() > 1.0),
                BudgetMode::Project => assert!(g.weight_norm() <= 1.0 + 1e-12),
            }
        }
    }

    #[test]
    fn input_flags_are_validated() {
        let mut bad = Segment::nrem(10, 0.1, 0.0);
        bad.input_enabled = true;
        assert!(SleepSchedule::new(vec![bad], 0.05).validate().is_err());
        assert!(SleepSchedule::new(vec![], 0.05).validate().is_err());
    }

    #[test]
    fn wedged_schedule_shape() {
        let s = SleepSchedule::wedged(Segment::nrem(400, 0.1, 0.0), Segment::rem(100, 0.0), 0.05);
        let phases: Vec<SleepPhase> = s.segments.iter().map(|x| x.phase).collect();
        assert_eq!(phases, vec![SleepPhase::Nrem, SleepPhase::Rem, SleepPhase::Nrem]);
        assert_eq!(s.total_steps(), 500);
    }

    #[test]
    fn guardrail_examples() {
        let (mut g, _) = setup(8, 3);
        let cfg = GuardrailConfig::default();
        let kappa = g.dynamics.kappa;
        let z = g.z.clone();
        apply_guardrails(&mut g, &cfg, cfg.target_r, &mut stream_rng("sleep", 3, "g"));
        assert_eq!(g.dynamics.kappa, kappa);
        assert_eq!(g.z, z);

        let mut locked = g.clone();
        locked.z = (0..8).map(|k| phase::unit(0.3 + 1e-3 * k as f64)).collect();
        let before = locked.z.clone();
        apply_guardrails(&mut locked, &cfg, 1.0, &mut stream_rng("sleep", 3, "g"));
        assert!(locked.dynamics.kappa < kappa);
        assert_ne!(locked.z, before);
    }

    #[test]
    fn kicks_push_away_from_mean_field() {
        let (mut g, _) = setup(3, 4);
        g.z = vec![phase::unit(-0.1), phase::unit(0.0), phase::unit(0.1)];
        let cfg = GuardrailConfig { kappa_gain: 0.0, rescue_jitter: 0.0, band: (0.0, 0.5), kick_strength: 0.2, ..GuardrailConfig::default() };
        apply_guardrails(&mut g, &cfg, 1.0, &mut stream_rng("sleep", 4, "g"));
        assert!((g.z[0].arg() + 0.2).abs() < 1e-12);
        assert!((g.z[1].arg() + 0.1).abs() < 1e-12);
        assert!((g.z[2].arg() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn scramble_examples() {
        let mut rng = stream_rng("sleep", 5, "s");
        let mut one = vec![Complex64::from_polar(0.7, 1.1)];
        let before = one.clone();
        phase_scramble(&mut one, &mut rng);
        assert_eq!(one, before);

        let mut z: Vec<Complex64> = (0..16).map(|k| Complex64::from_polar(0.1 + k as f64 * 0.05, rng.random_range(-PI..PI))).collect();
        let amps: Vec<f64> = z.iter().map(|v| v.norm()).collect();
        let r = phase::order_parameter(&z).unwrap();
        phase_scramble(&mut z, &mut rng);
        for (v, a) in z.iter().zip(&amps) {
            assert!((v.norm() - a).abs() < 1e-12);
        }
        assert!((phase::order_parameter(&z).unwrap() - r).abs() < 1e-12);
    }

    #[test]
    fn stability_and_collapse_helpers() {
        assert!(fully_stable(&[false, false, false, false, true]));
        assert!(!fully_stable(&[false, false, false, true, true]));
        assert!(collapsed(&[0.1, 0.96, 0.99], 2, 0.95));
        assert!(!collapsed(&[0.96, 0.94, 0.99], 2, 0.95));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn zero_gain_guardrails_are_identity(seed in 0u64..1000, r in 0.0f64..1.0) {
            let (mut g, _) = setup(5, seed);
            let (z, kappa) = (g.z.clone(), g.dynamics.kappa);
            apply_guardrails(&mut g, &GuardrailConfig::disabled(), r, &mut stream_rng("sleep", seed, "g"));
            prop_assert_eq!(g.z, z);
            prop_assert_eq!(g.dynamics.kappa, kappa);
        }

        #[test]
        fn homeostasis_only_nrem_contracts(seed in 0u64..200, decay in 0.0f64..0.01) {
            let (mut g, mut ps) = setup(5, seed);
            let before = g.weight_norm();
            let sched = SleepSchedule::new(vec![Segment::nrem(100, 1.0, decay)], 0.05);
            run_cycle(&mut g, &mut ps, &sched, &mut NoHook, &mut stream_rng("sleep", seed, "r")).unwrap();
            prop_assert!(g.weight_norm() <= before);
        }
    }
}
