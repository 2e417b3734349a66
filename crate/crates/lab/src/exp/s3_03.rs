//! Synchrony guardrails during a strongly coupled sleep run. Without
//! control the network locks to R ≈ 1; phase guardrails hold it in a band,
//! while modulating α alone cannot break the lock.

use std::f64::consts::PI;

use num_complex::Complex64;
use phasor_core::graph::{Adjacency, Dynamics, PhasorGraph};
use phasor_core::phase;
use phasor_core::plasticity::{Homeostasis, ModulatorParams, PlasticityState, TraceParams};
use phasor_core::rng::{RngKey, StreamRng};
use phasor_core::sleep::{apply_guardrails, collapsed, run_cycle, EnvHook, GuardrailConfig, Segment, SleepPhase, SleepSchedule};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::artifact::{f, PlotSpec, Table};
use crate::config::Profile;
use crate::error::{LabError, LabResult};
use crate::experiment::{check_seeds, ensure, grid, CellKey, Experiment, ExperimentConfig};
use crate::stats::mean;

pub const CONDITIONS: [&str; 3] = ["unguarded", "guarded", "alpha_only"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seeds: Vec<u64>,
    pub n: usize,
    pub kappa: f64,
    pub omega_std: f64,
    pub dt: f64,
    pub steps: u64,
    pub nrem_eta: f64,
    pub guardrails: GuardrailConfig,
    /// Proportional gain of the amplitude-only controller on α.
    pub alpha_gain: f64,
    pub alpha_range: (f64, f64),
    /// Trailing samples that must all sit at or above the threshold.
    pub collapse_window: usize,
}

impl ExperimentConfig for Config {
    fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    fn validate(&self) -> LabResult<()> {
        check_seeds(&self.seeds)?;
        ensure(self.n >= 2, "n", "need at least 2 oscillators")?;
        ensure(self.kappa >= 0.0, "kappa", "must be >= 0")?;
        ensure(self.omega_std >= 0.0, "omega_std", "must be >= 0")?;
        ensure(self.dt > 0.0, "dt", "must be positive")?;
        ensure(self.collapse_window >= 1 && self.collapse_window as u64 <= self.steps, "collapse_window", "must be in 1..=steps")?;
        ensure(self.alpha_range.0 > 0.0 && self.alpha_range.0 < self.alpha_range.1, "alpha_range", "need 0 < lo < hi")?;
        self.guardrails.validate().map_err(|e| LabError::config("guardrails", e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub r_trace: Vec<f64>,
    pub final_r: f64,
    pub collapsed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionStats {
    pub condition: String,
    pub collapse_rate: f64,
    pub mean_final_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub target_r: f64,
    pub conditions: Vec<ConditionStats>,
}

impl Summary {
    pub fn collapse_rate(&self, condition: &str) -> Option<f64> {
        self.conditions.iter().find(|c| c.condition == condition).map(|c| c.collapse_rate)
    }
}

enum Control {
    None,
    Phase(GuardrailConfig),
    Alpha { gain: f64, target: f64, range: (f64, f64) },
}

struct Guard {
    control: Control,
    rng: StreamRng,
}

impl EnvHook for Guard {
    fn post_step(&mut self, _phase: SleepPhase, _step: u64, graph: &mut PhasorGraph) {
        let Some(r) = phase::order_parameter(&graph.z) else {
            return;
        };
        match &self.control {
            Control::None => {}
            Control::Phase(cfg) => apply_guardrails(graph, cfg, r, &mut self.rng),
            Control::Alpha { gain, target, range } => {
                let a = graph.dynamics.alpha - gain * (r - target);
                graph.dynamics.alpha = a.clamp(range.0, range.1);
            }
        }
    }
}

pub struct S303;

impl Experiment for S303 {
    type Config = Config;
    type Output = Cell;
    type Summary = Summary;

    const ID: &'static str = "s3-03";
    const CLAIM: &'static str = "phase guardrails prevent synchrony collapse during sleep; amplitude control does not";
    const MODULES: &'static [&'static str] = &["sleep-scheduler", "phasor-graph"];

    fn config(profile: Profile) -> Config {
        Config {
            seeds: (0..if profile == Profile::Fast { 20 } else { 100 }).collect(),
            n: 32,
            kappa: 1.5,
            omega_std: 0.1,
            dt: 0.05,
            steps: 2000,
            nrem_eta: 0.01,
            guardrails: GuardrailConfig::default(),
            alpha_gain: 0.05,
            alpha_range: (0.1, 2.0),
            collapse_window: 200,
        }
    }

    fn cells(cfg: &Config) -> Vec<CellKey> {
        grid(CONDITIONS, &cfg.seeds)
    }

    fn run_cell(cfg: &Config, key: &CellKey) -> phasor_core::Result<Cell> {
        // Same network and initial state for every condition.
        let root = RngKey::new(S303::ID, key.seed);
        let mut ic = root.stream("ic");
        let n = cfg.n;
        let z0: Vec<Complex64> = (0..n).map(|_| phase::unit(ic.random_range(-PI..PI))).collect();
        let spread = Normal::new(1.0, cfg.omega_std).expect("validated omega_std");
        let omega: Vec<f64> = (0..n).map(|_| spread.sample(&mut ic)).collect();
        let adj = Adjacency::complete(n);
        let mut plasticity = PlasticityState::new(adj.edges(), TraceParams::default(), ModulatorParams::default())?;
        let dynamics = Dynamics {
            kappa: cfg.kappa,
            ..Dynamics::default()
        };
        let mut graph = PhasorGraph::new(adj, omega, dynamics, z0)?;
        let nrem = Segment {
            homeostasis: Homeostasis::None,
            ..Segment::nrem(cfg.steps, cfg.nrem_eta, 0.0)
        };
        let schedule = SleepSchedule::new(vec![nrem], cfg.dt);
        let control = match key.condition.as_str() {
            "guarded" => Control::Phase(cfg.guardrails.clone()),
            "alpha_only" => Control::Alpha {
                gain: cfg.alpha_gain,
                target: cfg.guardrails.target_r,
                range: cfg.alpha_range,
            },
            _ => Control::None,
        };
        let mut hook = Guard {
            control,
            rng: root.stream("guard"),
        };
        let report = run_cycle(&mut graph, &mut plasticity, &schedule, &mut hook, &mut root.stream("cycle"))?;
        if let Some(e) = report.aborted {
            return Err(e);
        }
        let r_trace = report.r_trace();
        Ok(Cell {
            final_r: *r_trace.last().unwrap_or(&0.0),
            collapsed: collapsed(&r_trace, cfg.collapse_window, cfg.guardrails.collapse_threshold),
            r_trace,
        })
    }

    fn metrics(out: &Cell) -> Table {
        let mut t = Table::new(["step", "r"]);
        for (i, r) in out.r_trace.iter().enumerate().step_by(10) {
            t.push(vec![i.to_string(), f(*r)]);
        }
        t
    }

    fn summarize(cfg: &Config, cells: &[(CellKey, &Cell)]) -> Summary {
        Summary {
            target_r: cfg.guardrails.target_r,
            conditions: CONDITIONS
                .iter()
                .map(|&c| {
                    let of: Vec<&Cell> = cells.iter().filter(|(k, _)| k.condition == c).map(|(_, o)| *o).collect();
                    ConditionStats {
                        condition: c.to_string(),
                        collapse_rate: mean(&of.iter().map(|o| f64::from(u8::from(o.collapsed))).collect::<Vec<_>>()),
                        mean_final_r: mean(&of.iter().map(|o| o.final_r).collect::<Vec<_>>()),
                    }
                })
                .collect(),
        }
    }

    fn summary_table(s: &Summary) -> Table {
        let mut t = Table::new(["condition", "collapse_rate", "mean_final_r"]);
        for c in &s.conditions {
            t.push(vec![c.condition.clone(), f(c.collapse_rate), f(c.mean_final_r)]);
        }
        t
    }

    fn plot(s: &Summary) -> PlotSpec {
        let mut p = PlotSpec::new("bar", "condition", "collapse_rate", "Synchrony collapse during sleep");
        p.annotations.push(crate::artifact::Annotation {
            kind: "hline".into(),
            label: "target R".into(),
            from: s.target_r,
            to: s.target_r,
        });
        p
    }
}
