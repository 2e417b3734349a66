//! Gate and eligibility-delay ablation on two concurrent tasks sharing one
//! weight matrix: a dense next-step prediction stream and sparse cue→target
//! associations whose reward arrives several steps after the cue.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use phasor_core::plasticity::{apply_three_factor, ModulatorParams, ModulatorSource, PlasticityState, TraceKind, TraceParams};
use phasor_core::rng::RngKey;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::artifact::{f, PlotSpec, Table};
use crate::config::Profile;
use crate::error::LabResult;
use crate::experiment::{check_seeds, ensure, grid, CellKey, Experiment, ExperimentConfig};
use crate::stats::mean;

pub const CONDITIONS: [&str; 4] = ["full", "no_gate", "no_delay", "neither"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seeds: Vec<u64>,
    pub steps: usize,
    pub taps: usize,
    pub signal_freq: f64,
    pub noise: f64,
    /// Associations (cue k → target k).
    pub associations: usize,
    /// A cue appears every `cue_period` steps, cycling through the set.
    pub cue_period: usize,
    pub reward_delay: usize,
    pub eta: f64,
    pub dt: f64,
    pub tau_f: f64,
    /// Trace time constant when delay is ablated.
    pub tau_instant: f64,
    /// Dense updates open only above this absolute error.
    pub gate_error: f64,
    /// Tail fraction of the stream used for MSE.
    pub tail: f64,
}

impl ExperimentConfig for Config {
    fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    fn validate(&self) -> LabResult<()> {
        check_seeds(&self.seeds)?;
        ensure(self.taps >= 2, "taps", "need at least 2 taps")?;
        ensure(self.associations >= 1, "associations", "must be positive")?;
        ensure(self.cue_period > self.reward_delay, "cue_period", "must exceed reward_delay")?;
        ensure(self.dt > 0.0 && self.tau_f > 0.0 && self.tau_instant > 0.0, "tau_f", "time constants must be positive")?;
        ensure(self.tail > 0.0 && self.tail <= 1.0, "tail", "must be in (0, 1]")?;
        ensure(self.steps > self.cue_period * self.associations, "steps", "too short to present every cue")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub dense_mse: f64,
    pub capacity: usize,
    /// Squared error per step.
    pub errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionStats {
    pub condition: String,
    pub dense_mse: f64,
    /// Percent change relative to the full model.
    pub mse_change_pct: f64,
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub conditions: Vec<ConditionStats>,
}

impl Summary {
    pub fn get(&self, condition: &str) -> Option<&ConditionStats> {
        self.conditions.iter().find(|c| c.condition == condition)
    }
}

pub struct S204;

impl Experiment for S204 {
    type Config = Config;
    type Output = Cell;
    type Summary = Summary;

    const ID: &'static str = "s2-04";
    const CLAIM: &'static str = "delayed eligibility is required for sparse credit while the surprise gate protects dense learning";
    const MODULES: &'static [&'static str] = &["plasticity"];

    fn config(profile: Profile) -> Config {
        Config {
            seeds: (0..if profile == Profile::Fast { 5 } else { 20 }).collect(),
            steps: 4000,
            taps: 4,
            signal_freq: 2.0 * PI / 25.0,
            noise: 0.05,
            associations: 4,
            cue_period: 50,
            reward_delay: 5,
            eta: 0.5,
            dt: 0.1,
            tau_f: 1.0,
            tau_instant: 0.01,
            gate_error: 0.05,
            tail: 0.25,
        }
    }

    fn cells(cfg: &Config) -> Vec<CellKey> {
        grid(CONDITIONS, &cfg.seeds)
    }

    fn run_cell(cfg: &Config, key: &CellKey) -> phasor_core::Result<Cell> {
        let gated = matches!(key.condition.as_str(), "full" | "no_delay");
        let delayed = matches!(key.condition.as_str(), "full" | "no_gate");
        let (t, k) = (cfg.taps, cfg.associations);
        // Row 0 predicts the stream from the taps; rows 1..=k read the cues.
        let dense_edges: Vec<(usize, usize)> = (0..t).map(|c| (0, c)).collect();
        let assoc_edges: Vec<(usize, usize)> = (1..=k).flat_map(|r| (0..k).map(move |c| (r, t + c))).collect();
        let traces = TraceParams {
            tau_f: if delayed { cfg.tau_f } else { cfg.tau_instant },
            ..TraceParams::default()
        };
        let mut dense = PlasticityState::new(dense_edges, traces.clone(), ModulatorParams::default())?;
        let mut assoc = PlasticityState::new(assoc_edges.clone(), traces, ModulatorParams::default())?;
        let mut w = DMatrix::zeros(1 + k, t + k);
        let mut rng = RngKey::new(S204::ID, key.seed).stream("stream");
        let phase = rng.random_range(0.0..2.0 * PI);
        let xs: Vec<f64> = (0..=cfg.steps)
            .map(|i| (cfg.signal_freq * i as f64 + phase).sin() + rng.random_range(-cfg.noise..cfg.noise))
            .collect();
        let mut errors = Vec::with_capacity(cfg.steps);
        let mut h_dense = vec![0.0; t];
        let mut h_assoc = vec![0.0; assoc_edges.len()];
        for i in 0..cfg.steps {
            let feat: Vec<f64> = (0..t).map(|c| if i >= c { xs[i - c] } else { 0.0 }).collect();
            let pred: f64 = feat.iter().enumerate().map(|(c, x)| w[(0, c)] * x).sum();
            let err = xs[i + 1] - pred;
            errors.push(err * err);
            h_dense.iter_mut().zip(&feat).for_each(|(h, x)| *h = err * x);
            dense.update_traces(&h_dense, cfg.dt)?;
            // Tonic modulation for the dense stream.
            dense.modulator = 1.0;
            let open = !gated || err.abs() > cfg.gate_error;
            apply_three_factor(&mut w, &dense, open, cfg.eta, TraceKind::Fast, ModulatorSource::M, None, None);

            // Cue and its target co-active for one step; reward follows.
            let phase_in = i % cfg.cue_period;
            let cue = (i / cfg.cue_period) % k;
            for (h, &(r, c)) in h_assoc.iter_mut().zip(&assoc_edges) {
                *h = if phase_in == 0 && r == cue + 1 && c == t + cue { 1.0 } else { 0.0 };
            }
            assoc.update_traces(&h_assoc, cfg.dt)?;
            let reward = if phase_in == cfg.reward_delay { vec![1.0] } else { vec![] };
            assoc.update_modulator(&reward, cfg.dt)?;
            // Surprise gate: closed once the cue already recalls its target.
            let known = w[(cue + 1, t + cue)] >= 1.0;
            apply_three_factor(&mut w, &assoc, !gated || !known, cfg.eta, TraceKind::Fast, ModulatorSource::M, None, None);
        }
        let capacity = (0..k)
            .filter(|&c| {
                let col: Vec<f64> = (1..=k).map(|r| w[(r, t + c)]).collect();
                let best = (0..k).fold(0, |b, r| if col[r] > col[b] { r } else { b });
                best == c && col[c] > 0.5
            })
            .count();
        let tail = ((cfg.steps as f64) * cfg.tail).ceil() as usize;
        Ok(Cell {
            dense_mse: mean(&errors[errors.len() - tail..]),
            capacity,
            errors,
        })
    }

    fn metrics(out: &Cell) -> Table {
        let mut t = Table::new(["step", "sq_error"]);
        for (i, e) in out.errors.iter().enumerate().step_by(10) {
            t.push(vec![i.to_string(), f(*e)]);
        }
        t
    }

    fn summarize(_cfg: &Config, cells: &[(CellKey, &Cell)]) -> Summary {
        let stats: Vec<(String, f64, f64)> = CONDITIONS
            .iter()
            .map(|&c| {
                let of: Vec<&Cell> = cells.iter().filter(|(k, _)| k.condition == c).map(|(_, o)| *o).collect();
                let mse = mean(&of.iter().map(|o| o.dense_mse).collect::<Vec<_>>());
                let cap = mean(&of.iter().map(|o| o.capacity as f64).collect::<Vec<_>>());
                (c.to_string(), mse, cap)
            })
            .collect();
        let base = stats[0].1;
        Summary {
            conditions: stats
                .into_iter()
                .map(|(condition, dense_mse, capacity)| ConditionStats {
                    mse_change_pct: 100.0 * (dense_mse - base) / base,
                    condition,
                    dense_mse,
                    capacity,
                })
                .collect(),
        }
    }

    fn summary_table(s: &Summary) -> Table {
        let mut t = Table::new(["condition", "dense_mse", "mse_change_pct", "capacity"]);
        for c in &s.conditions {
            t.push(vec![c.condition.clone(), f(c.dense_mse), f(c.mse_change_pct), f(c.capacity)]);
        }
        t
    }

    fn plot(_s: &Summary) -> PlotSpec {
        PlotSpec::new("bar", "condition", "dense_mse", "Gate and delay ablation")
    }
}
