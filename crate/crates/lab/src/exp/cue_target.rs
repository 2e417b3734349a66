//! Cue→target phase-locking task shared by the consolidation experiments.
//!
//! Nodes `0..cue` are cues, the next `target` nodes are targets, the rest
//! are distractors. A wake trial co-drives cues and targets in phase, waits
//! a short gap, then delivers a reward pulse. The score is how tightly the
//! targets lock to the cue group when the network later runs free.

use std::f64::consts::PI;

use num_complex::Complex64;
use phasor_core::graph::{Adjacency, Dynamics, InputSignal, Normalization, PhasorGraph};
use phasor_core::phase;
use phasor_core::plasticity::{GateConfig, Homeostasis, ModulatorParams, PlasticityState, TraceParams};
use phasor_core::rng::{RngKey, StreamRng};
use phasor_core::sleep::{phase_scramble, run_cycle, BudgetMode, EnvHook, Segment, SleepPhase, SleepSchedule};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::LabResult;
use crate::experiment::ensure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub cue_nodes: usize,
    pub target_nodes: usize,
    pub distractor_nodes: usize,
    pub kappa: f64,
    pub cue_omega: f64,
    pub target_omega: f64,
    /// Distractor frequencies are drawn from this range.
    pub distractor_omega: (f64, f64),
    pub drive: f64,
    /// Distractors are co-driven during trials, offset by a fresh phase in
    /// (−jitter, jitter) each trial.
    pub distractor_drive: f64,
    pub distractor_jitter: f64,
    pub dt: f64,
    pub present_steps: u64,
    pub gap_steps: u64,
    pub reward: f64,
    pub trials_per_cycle: u64,
    pub cycles: usize,
    pub nrem_steps: u64,
    pub nrem_decay: f64,
    /// Free-running steps before the first spindle burst.
    pub spindle_offset: u64,
    pub spindle_period: u64,
    pub spindle_burst: u64,
    pub test_steps: u64,
    /// Phase diffusion (radians per √step) during the free-running test.
    pub test_noise: f64,
    /// At test the cue is presented again while distractors are driven at
    /// a conflicting phase offset.
    pub test_cue_drive: f64,
    pub test_distractor_drive: f64,
    pub test_context_phase: f64,
    pub traces: TraceParams,
    pub modulator: ModulatorParams,
}

impl TaskConfig {
    pub fn n(&self) -> usize {
        self.cue_nodes + self.target_nodes + self.distractor_nodes
    }

    pub fn validate(&self) -> LabResult<()> {
        ensure(self.cue_nodes >= 1 && self.target_nodes >= 1, "cue_nodes", "need cue and target nodes")?;
        ensure(self.kappa >= 0.0, "kappa", "must be >= 0")?;
        ensure(self.dt > 0.0, "dt", "must be positive")?;
        ensure(self.present_steps >= 1, "present_steps", "must be positive")?;
        ensure(self.trials_per_cycle >= 1 && self.cycles >= 1, "cycles", "need at least one trial and cycle")?;
        ensure(self.test_steps >= 2, "test_steps", "must be at least 2")?;
        ensure(self.test_noise >= 0.0, "test_noise", "must be >= 0")?;
        ensure(self.distractor_jitter >= 0.0, "distractor_jitter", "must be >= 0")?;
        ensure(self.distractor_omega.0 <= self.distractor_omega.1, "distractor_omega", "need lo <= hi")?;
        ensure(self.spindle_period >= 1 && self.spindle_burst >= 1, "spindle_period", "must be positive")?;
        ensure(self.reward >= 0.0, "reward", "must be >= 0")
    }

    fn trial_len(&self) -> u64 {
        self.present_steps + self.gap_steps
    }

    fn targets(&self) -> std::ops::Range<usize> {
        self.cue_nodes..self.cue_nodes + self.target_nodes
    }
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            cue_nodes: 4,
            target_nodes: 4,
            distractor_nodes: 8,
            kappa: 1.0,
            cue_omega: 1.0,
            target_omega: 1.1,
            distractor_omega: (3.0, 6.0),
            drive: 2.0,
            distractor_drive: 8.0,
            distractor_jitter: 0.0,
            dt: 0.05,
            present_steps: 40,
            gap_steps: 4,
            reward: 1.0,
            trials_per_cycle: 5,
            cycles: 4,
            nrem_steps: 600,
            nrem_decay: 0.002,
            spindle_offset: 150,
            spindle_period: 200,
            spindle_burst: 20,
            test_steps: 600,
            test_noise: 0.3,
            test_cue_drive: 2.0,
            test_distractor_drive: 8.0,
            test_context_phase: PI,
            traces: TraceParams::default(),
            modulator: ModulatorParams::default(),
        }
    }
}

/// Offline phase following each wake block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Offline {
    None,
    Coherent,
    Scrambled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plan {
    pub eta_wake: f64,
    pub eta_nrem: f64,
    pub offline: Offline,
    pub budget: Option<f64>,
    /// Cap on Σ|ΔW| per NREM segment.
    pub nrem_cap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub score: f64,
    pub unstable: bool,
    pub final_norm: f64,
    pub nrem_gated_steps: u64,
    pub nrem_mass: f64,
    /// `(step, R, ‖W‖_F)` every tenth learning step.
    pub trace: Vec<(u64, f64, f64)>,
    pub weights: nalgebra::DMatrix<f64>,
}

struct Hook<'a> {
    cfg: &'a TaskConfig,
    wake_step: u64,
    scramble: bool,
    rng: StreamRng,
    stimuli: StreamRng,
    distractor_phases: Vec<f64>,
}

impl EnvHook for Hook<'_> {
    fn input(&mut self, _phase: SleepPhase, _step: u64, graph: &PhasorGraph) -> Option<InputSignal> {
        let t = self.wake_step % self.cfg.trial_len();
        if t >= self.cfg.present_steps {
            return None;
        }
        let driven = self.cfg.cue_nodes + self.cfg.target_nodes;
        if t == 0 {
            let stimuli = &mut self.stimuli;
            let j = self.cfg.distractor_jitter;
            self.distractor_phases = (driven..graph.n()).map(|_| if j > 0.0 { stimuli.random_range(-j..j) } else { 0.0 }).collect();
        }
        let carrier = self.cfg.cue_omega * self.wake_step as f64 * self.cfg.dt;
        Some(InputSignal::Additive(
            (0..graph.n())
                .map(|i| {
                    if i < driven {
                        phase::unit(carrier) * self.cfg.drive
                    } else {
                        phase::unit(carrier + self.distractor_phases[i - driven]) * self.cfg.distractor_drive
                    }
                })
                .collect(),
        ))
    }

    fn pulses(&mut self, phase: SleepPhase, _step: u64, _graph: &PhasorGraph) -> Vec<f64> {
        let last = self.wake_step % self.cfg.trial_len() == self.cfg.trial_len() - 1;
        if phase == SleepPhase::Wake && last && self.cfg.reward > 0.0 {
            vec![self.cfg.reward]
        } else {
            Vec::new()
        }
    }

    fn post_step(&mut self, phase: SleepPhase, _step: u64, graph: &mut PhasorGraph) {
        match phase {
            SleepPhase::Wake => self.wake_step += 1,
            SleepPhase::Nrem if self.scramble => phase_scramble(&mut graph.z, &mut self.rng),
            _ => {}
        }
    }
}

fn random_phases(n: usize, rng: &mut StreamRng) -> Vec<Complex64> {
    (0..n).map(|_| phase::unit(rng.random_range(-PI..PI))).collect()
}

/// Cued recall against a conflicting context: mean over targets of
/// (1 + cos(φ_target − φ_cue)) / 2, with φ_cue the presented drive phase,
/// while the cue is presented and the
/// distractors are driven off-phase.
pub fn lock_score(cfg: &TaskConfig, graph: &PhasorGraph, rng: &mut StreamRng) -> phasor_core::Result<f64> {
    let mut g = graph.clone();
    g.z = random_phases(g.n(), rng);
    let noise = Normal::new(0.0, cfg.test_noise).map_err(|e| phasor_core::Error::InvalidInput(e.to_string()))?;
    let driven = cfg.cue_nodes + cfg.target_nodes;
    let burn = cfg.test_steps / 2;
    let mut acc = 0.0;
    let mut count = 0usize;
    for s in 0..cfg.test_steps {
        let carrier = cfg.cue_omega * s as f64 * cfg.dt;
        let input = InputSignal::Additive(
            (0..g.n())
                .map(|i| {
                    if i < cfg.cue_nodes {
                        phase::unit(carrier) * cfg.test_cue_drive
                    } else if i < driven {
                        Complex64::new(0.0, 0.0)
                    } else {
                        phase::unit(carrier + cfg.test_context_phase) * cfg.test_distractor_drive
                    }
                })
                .collect(),
        );
        g.step(Some(&input), cfg.dt)?;
        for z in g.z.iter_mut() {
            *z *= phase::unit(noise.sample(rng));
        }
        if s < burn {
            continue;
        }
        for t in cfg.targets() {
            acc += (1.0 + (g.z[t].arg() - carrier).cos()) / 2.0;
            count += 1;
        }
    }
    Ok(acc / count as f64)
}

/// Runs wake blocks (optionally each followed by NREM) from zero couplings
/// and scores the final network.
pub fn train(cfg: &TaskConfig, plan: &Plan, key: &RngKey) -> phasor_core::Result<Outcome> {
    let n = cfg.n();
    let mut rng = key.stream("network");
    let omega: Vec<f64> = (0..n)
        .map(|i| {
            if i < cfg.cue_nodes {
                cfg.cue_omega
            } else if i < cfg.cue_nodes + cfg.target_nodes {
                cfg.target_omega
            } else {
                rng.random_range(cfg.distractor_omega.0..=cfg.distractor_omega.1)
            }
        })
        .collect();
    // No edges inside the cue group or inside the target group.
    let group = |i: usize| if i < cfg.cue_nodes { 0 } else if i < cfg.cue_nodes + cfg.target_nodes { 1 } else { 2 + i };
    let adj = Adjacency::from_edges(n, (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|&(i, j)| i != j && group(i) != group(j)))?;
    let dynamics = Dynamics {
        kappa: cfg.kappa,
        normalization: Normalization::Raw,
        ..Dynamics::default()
    };
    let z0 = random_phases(n, &mut rng);
    let mut graph = PhasorGraph::new(adj.clone(), omega, dynamics, z0)?;
    graph.weights.fill(0.0);
    let mut plasticity = PlasticityState::new(adj.edges(), cfg.traces.clone(), cfg.modulator.clone())?;

    let wake = Segment::wake(cfg.trials_per_cycle * cfg.trial_len(), plan.eta_wake);
    let nrem = Segment {
        update_cap: plan.nrem_cap,
        homeostasis: Homeostasis::LinearDecay { rate: cfg.nrem_decay },
        gate: GateConfig::SpindleBurst {
            epochs: (cfg.spindle_offset..cfg.nrem_steps)
                .step_by(cfg.spindle_period.max(1) as usize)
                .map(|s| (s, cfg.spindle_burst.min(cfg.nrem_steps - s)))
                .collect(),
        },
        ..Segment::nrem(cfg.nrem_steps, plan.eta_nrem, cfg.nrem_decay)
    };
    let mut segments = Vec::new();
    for _ in 0..cfg.cycles {
        segments.push(wake.clone());
        if plan.offline != Offline::None {
            segments.push(nrem.clone());
        }
    }
    let mut schedule = SleepSchedule::new(segments, cfg.dt);
    schedule.budget = plan.budget;
    schedule.budget_mode = BudgetMode::Record;
    let mut hook = Hook {
        cfg,
        wake_step: 0,
        scramble: plan.offline == Offline::Scrambled,
        rng: key.stream("scramble"),
        stimuli: key.stream("stimuli"),
        distractor_phases: Vec::new(),
    };
    let report = run_cycle(&mut graph, &mut plasticity, &schedule, &mut hook, &mut key.stream("cycle"))?;
    if report.aborted.is_some() {
        // Divergence counts as a failed, unstable run.
        return Ok(Outcome {
            score: 0.0,
            unstable: true,
            final_norm: f64::INFINITY,
            nrem_gated_steps: 0,
            nrem_mass: 0.0,
            trace: Vec::new(),
            weights: graph.weights,
        });
    }
    let nrem_idx = schedule.segments.iter().enumerate().filter(|(_, s)| s.phase == SleepPhase::Nrem).map(|(i, _)| i);
    let (mut gated, mut mass) = (0, 0.0);
    for i in nrem_idx {
        gated += report.gated_steps[i];
        mass += report.update_mass[i];
    }
    let score = lock_score(cfg, &graph, &mut key.stream("test")).unwrap_or(0.0);
    let trace = report.rows.iter().step_by(10).map(|r| (r.step, r.r, r.weight_norm)).collect();
    Ok(Outcome {
        score,
        unstable: report.unstable,
        final_norm: graph.weight_norm(),
        nrem_gated_steps: gated,
        nrem_mass: mass,
        trace,
        weights: graph.weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn untrained_network_scores_near_half() {
        let cfg = TaskConfig::default();
        let plan = Plan {
            eta_wake: 0.0,
            eta_nrem: 0.0,
            offline: Offline::None,
            budget: None,
            nrem_cap: None,
        };
        let out = train(&cfg, &plan, &RngKey::new("cue-target-test", 0)).unwrap();
        assert!((out.score - 0.5).abs() < 0.15, "score {}", out.score);
        assert_eq!(out.final_norm, 0.0);
    }
}
