//! Compression progress as a learning signal. A linear forecaster learns a
//! sinusoid that alternates with unpredictable noise blocks. Updates are
//! three-factor: error-tagged eligibility times a modulator driven by the
//! progress detector. The control replays the same pulses at shuffled times.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use phasor_core::graph::{topology, Dynamics, InputMode, InputSignal, PhasorGraph};
use phasor_core::plasticity::{apply_three_factor, ModulatorParams, ModulatorSource, PlasticityState, TraceKind, TraceParams};
use phasor_core::progress::{shuffle_onto, ProgressDetector, ProgressParams, Pulse};
use phasor_core::rng::RngKey;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::artifact::{f, PlotSpec, Table};
use crate::config::Profile;
use crate::error::LabResult;
use crate::experiment::{check_seeds, ensure, grid, CellKey, Experiment, ExperimentConfig};
use crate::stats::mean;

pub const CONDITIONS: [&str; 2] = ["real", "shuffled"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seeds: Vec<u64>,
    /// Steps per block; blocks alternate predictable / noise, starting predictable.
    pub block_len: usize,
    pub blocks: usize,
    /// Radians per step of the predictable sinusoid.
    pub signal_freq: f64,
    /// Half-width of the uniform noise in unpredictable blocks.
    pub noise_amp: f64,
    pub taps: usize,
    pub eta: f64,
    pub trace_dt: f64,
    pub tau_f: f64,
    pub tau_m: f64,
    pub progress: ProgressParams,
    /// Predictable blocks at the end used for the final error.
    pub final_blocks: usize,
    pub substrate_nodes: usize,
    pub substrate_kappa: f64,
    pub substrate_dt: f64,
}

impl ExperimentConfig for Config {
    fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    fn validate(&self) -> LabResult<()> {
        check_seeds(&self.seeds)?;
        ensure(self.block_len >= 2 * self.progress.window_len, "block_len", "must cover two detector windows")?;
        ensure(self.blocks >= 2 * (self.final_blocks + 1), "blocks", "too few blocks for the final window")?;
        ensure(self.final_blocks >= 1, "final_blocks", "must be positive")?;
        ensure(self.taps >= 2, "taps", "need at least 2 taps")?;
        ensure(self.noise_amp > 0.0, "noise_amp", "must be positive")?;
        ensure(self.eta > 0.0, "eta", "must be positive")?;
        ensure(self.trace_dt > 0.0 && self.tau_f > 0.0 && self.tau_m > 0.0, "tau_f", "time constants must be positive")?;
        ensure(self.substrate_nodes >= 3, "substrate_nodes", "need at least 3 nodes")?;
        self.progress.validate().map_err(|e| crate::error::LabError::config("progress", e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    /// Mean squared error per block.
    pub block_error: Vec<f64>,
    pub pulses: Vec<Pulse>,
    /// Fractional drop from the first predictable block to the final ones.
    pub reduction: f64,
    /// Share of predictable blocks (after the first) that drew a pulse.
    pub reliability: f64,
    /// Mean steps from predictable-block onset to its first pulse.
    pub lag: f64,
    pub final_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionStats {
    pub condition: String,
    pub reduction: f64,
    pub reliability: f64,
    pub causality_lag: f64,
    pub final_r: f64,
    pub pulses: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub conditions: Vec<ConditionStats>,
    /// real reduction / shuffled reduction
    pub shuffle_ratio: f64,
    pub shuffle_control_fails: bool,
}

impl Summary {
    pub fn get(&self, condition: &str) -> Option<&ConditionStats> {
        self.conditions.iter().find(|c| c.condition == condition)
    }
}

fn stream(cfg: &Config, key: &RngKey) -> Vec<f64> {
    let mut rng = key.stream("input");
    let mut xs = Vec::with_capacity(cfg.blocks * cfg.block_len);
    for b in 0..cfg.blocks {
        let phase = rng.random_range(0.0..2.0 * PI);
        for t in 0..cfg.block_len {
            xs.push(if b % 2 == 0 {
                (cfg.signal_freq * t as f64 + phase).sin()
            } else {
                rng.random_range(-cfg.noise_amp..cfg.noise_amp)
            });
        }
    }
    xs
}

enum Schedule<'a> {
    Detector,
    Fixed(&'a [Pulse]),
}

struct Trajectory {
    errors: Vec<f64>,
    pulses: Vec<Pulse>,
    evaluations: Vec<u64>,
}

/// One pass over the stream. Features at step t are the last `taps` inputs;
/// the target is the next input.
fn learn(cfg: &Config, xs: &[f64], schedule: Schedule) -> phasor_core::Result<Trajectory> {
    let edges: Vec<(usize, usize)> = (0..cfg.taps).map(|k| (0, k)).collect();
    let mut state = PlasticityState::new(
        edges,
        TraceParams { tau_f: cfg.tau_f, ..TraceParams::default() },
        ModulatorParams { tau_m: cfg.tau_m, ..ModulatorParams::default() },
    )?;
    let mut w = DMatrix::zeros(1, cfg.taps);
    let mut detector = ProgressDetector::new(cfg.progress.clone())?;
    let mut errors = Vec::with_capacity(xs.len());
    let mut h = vec![0.0; cfg.taps];
    let mut next_fixed = 0;
    for t in 0..xs.len() - 1 {
        let feat: Vec<f64> = (0..cfg.taps).map(|k| if t >= k { xs[t - k] } else { 0.0 }).collect();
        let pred: f64 = feat.iter().enumerate().map(|(k, x)| w[(0, k)] * x).sum();
        let err = xs[t + 1] - pred;
        errors.push(err * err);
        h.iter_mut().zip(&feat).for_each(|(hk, x)| *hk = err * x);
        state.update_traces(&h, cfg.trace_dt)?;
        let step = t as u64;
        let pulse = match schedule {
            Schedule::Detector => detector.observe(step, err * err)?,
            Schedule::Fixed(p) => {
                if next_fixed < p.len() && p[next_fixed].step == step {
                    next_fixed += 1;
                    Some(p[next_fixed - 1].amplitude)
                } else {
                    None
                }
            }
        };
        if matches!(schedule, Schedule::Fixed(_)) {
            detector.observe(step, err * err)?;
        }
        state.update_modulator(pulse.as_slice(), cfg.trace_dt)?;
        apply_three_factor(&mut w, &state, true, cfg.eta, TraceKind::Fast, ModulatorSource::M, None, None);
    }
    let pulses = match schedule {
        Schedule::Detector => detector.pulses(),
        Schedule::Fixed(p) => p.to_vec(),
    };
    let evaluations = detector.evaluations().iter().map(|e| e.step).collect();
    Ok(Trajectory { errors, pulses, evaluations })
}

fn substrate_r(cfg: &Config, xs: &[f64], key: &RngKey) -> phasor_core::Result<f64> {
    let n = cfg.substrate_nodes;
    let mut rng = key.stream("substrate");
    let z0: Vec<Complex64> = (0..n).map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI))).collect();
    let dynamics = Dynamics {
        kappa: cfg.substrate_kappa,
        ..Dynamics::default()
    };
    let mut g = PhasorGraph::new(topology::ring(n, 1)?, vec![1.0; n], dynamics, z0)?;
    for &x in xs {
        g.step(Some(&InputSignal::from_real(InputMode::OmegaMod, vec![x; n])), cfg.substrate_dt)?;
    }
    g.order_parameter()
}

pub struct S202;

impl Experiment for S202 {
    type Config = Config;
    type Output = Cell;
    type Summary = Summary;

    const ID: &'static str = "s2-02";
    const CLAIM: &'static str = "compression-progress pulses drive learning only when delivered at the right time";
    const MODULES: &'static [&'static str] = &["intrinsic-progress", "plasticity", "phasor-graph"];

    fn config(profile: Profile) -> Config {
        Config {
            seeds: (0..if profile == Profile::Fast { 12 } else { 30 }).collect(),
            block_len: 80,
            blocks: 60,
            signal_freq: 2.0 * PI / 20.0,
            noise_amp: 3.0,
            taps: 4,
            eta: 0.2,
            trace_dt: 0.1,
            tau_f: 0.5,
            tau_m: 0.5,
            progress: ProgressParams {
                threshold: 2.0,
                ..ProgressParams::with_window(20)
            },
            final_blocks: 5,
            substrate_nodes: 8,
            substrate_kappa: 0.5,
            substrate_dt: 0.05,
        }
    }

    fn cells(cfg: &Config) -> Vec<CellKey> {
        grid(CONDITIONS, &cfg.seeds)
    }

    fn run_cell(cfg: &Config, key: &CellKey) -> phasor_core::Result<Cell> {
        let root = RngKey::new(S202::ID, key.seed);
        let xs = stream(cfg, &root);
        let real = learn(cfg, &xs, Schedule::Detector)?;
        let traj = if key.condition == "shuffled" {
            let shuffled = shuffle_onto(&real.pulses, &real.evaluations, &mut root.stream("shuffle"))?;
            learn(cfg, &xs, Schedule::Fixed(&shuffled))?
        } else {
            real
        };
        let bl = cfg.block_len;
        let block_error: Vec<f64> = traj.errors.chunks(bl).map(mean).collect();
        let predictable: Vec<usize> = (0..block_error.len()).filter(|b| b % 2 == 0).collect();
        let first = block_error[0];
        let last: Vec<f64> = predictable.iter().rev().take(cfg.final_blocks).map(|&b| block_error[b]).collect();
        let reduction = (first - mean(&last)) / first;
        let mut hit = 0;
        let mut lags = Vec::new();
        for &b in predictable.iter().skip(1) {
            let range = (b * bl) as u64..((b + 1) * bl) as u64;
            if let Some(p) = traj.pulses.iter().find(|p| range.contains(&p.step)) {
                hit += 1;
                lags.push((p.step - range.start) as f64);
            }
        }
        Ok(Cell {
            reliability: hit as f64 / (predictable.len() - 1) as f64,
            lag: if lags.is_empty() { f64::NAN } else { mean(&lags) },
            final_r: substrate_r(cfg, &xs, &root)?,
            block_error,
            pulses: traj.pulses,
            reduction,
        })
    }

    fn metrics(out: &Cell) -> Table {
        let mut t = Table::new(["block", "predictable", "mse"]);
        for (b, e) in out.block_error.iter().enumerate() {
            t.push(vec![b.to_string(), (b % 2 == 0).to_string(), f(*e)]);
        }
        t
    }

    fn summarize(_cfg: &Config, cells: &[(CellKey, &Cell)]) -> Summary {
        let conditions: Vec<ConditionStats> = CONDITIONS
            .iter()
            .map(|&c| {
                let of: Vec<&Cell> = cells.iter().filter(|(k, _)| k.condition == c).map(|(_, o)| *o).collect();
                let col = |g: fn(&Cell) -> f64| mean(&of.iter().map(|o| g(o)).filter(|v| v.is_finite()).collect::<Vec<_>>());
                ConditionStats {
                    condition: c.to_string(),
                    reduction: col(|o| o.reduction),
                    reliability: col(|o| o.reliability),
                    causality_lag: col(|o| o.lag),
                    final_r: col(|o| o.final_r),
                    pulses: col(|o| o.pulses.len() as f64),
                }
            })
            .collect();
        let real = conditions[0].reduction;
        let shuffled = conditions[1].reduction;
        Summary {
            shuffle_ratio: real / shuffled,
            shuffle_control_fails: real > 0.0 && real >= 2.0 * shuffled,
            conditions,
        }
    }

    fn summary_table(s: &Summary) -> Table {
        let mut t = Table::new(["condition", "reliability", "causality_lag", "final_r", "error_reduction", "pulses", "shuffle_control_fails"]);
        for c in &s.conditions {
            t.push(vec![
                c.condition.clone(),
                f(c.reliability),
                f(c.causality_lag),
                f(c.final_r),
                f(c.reduction),
                f(c.pulses),
                s.shuffle_control_fails.to_string(),
            ]);
        }
        t
    }

    fn plot(_s: &Summary) -> PlotSpec {
        PlotSpec::new("bar", "condition", "error_reduction", "Prediction-error reduction, real vs shuffled pulse timing")
    }
}
