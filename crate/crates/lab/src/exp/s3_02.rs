//! Does NREM consolidation need coherent phase structure? Coherent and
//! phase-scrambled offline phases get the same spindle gate schedule and the
//! same cap on Σ|ΔW|; only the phase relations during capture differ.

use phasor_core::rng::RngKey;
use serde::{Deserialize, Serialize};

use super::cue_target::{train, Offline, Outcome, Plan, TaskConfig};
use crate::artifact::{f, PlotSpec, Table};
use crate::config::Profile;
use crate::error::LabResult;
use crate::experiment::{check_seeds, ensure, grid, CellKey, Experiment, ExperimentConfig};
use crate::stats::{mean, welch_greater};

pub const CONDITIONS: [&str; 2] = ["coherent", "scrambled"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seeds: Vec<u64>,
    pub task: TaskConfig,
    pub eta_wake: f64,
    pub eta_nrem: f64,
    /// Σ|ΔW| allowed per NREM segment, identical for both conditions.
    pub nrem_update_cap: f64,
}

impl ExperimentConfig for Config {
    fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    fn validate(&self) -> LabResult<()> {
        check_seeds(&self.seeds)?;
        self.task.validate()?;
        ensure(self.eta_wake >= 0.0 && self.eta_nrem >= 0.0, "eta_nrem", "learning rates must be >= 0")?;
        ensure(self.nrem_update_cap > 0.0, "nrem_update_cap", "must be positive")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub baseline: f64,
    pub consolidated: Outcome,
    /// Relative retention gain over the wake-only run of the same seed.
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionStats {
    pub condition: String,
    pub mean_gain: f64,
    pub mean_score: f64,
    pub mean_baseline: f64,
    pub gated_steps: f64,
    pub update_mass: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub conditions: Vec<ConditionStats>,
    pub welch_t: f64,
    /// One-sided p for coherent gain > scrambled gain.
    pub p_value: f64,
}

impl Summary {
    pub fn get(&self, condition: &str) -> Option<&ConditionStats> {
        self.conditions.iter().find(|c| c.condition == condition)
    }
}

pub struct S302;

impl Experiment for S302 {
    type Config = Config;
    type Output = Cell;
    type Summary = Summary;

    const ID: &'static str = "s3-02";
    const CLAIM: &'static str = "NREM capture improves retention only when phase relations stay coherent";
    const MODULES: &'static [&'static str] = &["sleep-scheduler", "plasticity", "agent-env"];

    fn config(profile: Profile) -> Config {
        Config {
            seeds: (0..if profile == Profile::Fast { 30 } else { 60 }).collect(),
            task: TaskConfig::default(),
            eta_wake: 3e-4,
            eta_nrem: 2e-3,
            nrem_update_cap: 10.0,
        }
    }

    fn cells(cfg: &Config) -> Vec<CellKey> {
        grid(CONDITIONS, &cfg.seeds)
    }

    fn run_cell(cfg: &Config, key: &CellKey) -> phasor_core::Result<Cell> {
        // Both conditions and the baseline share the seed's network and stimuli.
        let rng = RngKey::new(S302::ID, key.seed);
        let offline = if key.condition == "coherent" { Offline::Coherent } else { Offline::Scrambled };
        let plan = Plan {
            eta_wake: cfg.eta_wake,
            eta_nrem: cfg.eta_nrem,
            offline,
            budget: None,
            nrem_cap: Some(cfg.nrem_update_cap),
        };
        let baseline = train(&cfg.task, &Plan { offline: Offline::None, ..plan }, &rng)?.score;
        let consolidated = train(&cfg.task, &plan, &rng)?;
        Ok(Cell {
            gain: (consolidated.score - baseline) / baseline,
            baseline,
            consolidated,
        })
    }

    fn metrics(out: &Cell) -> Table {
        let mut t = Table::new(["step", "r", "weight_norm"]);
        for &(s, r, w) in &out.consolidated.trace {
            t.push(vec![s.to_string(), f(r), f(w)]);
        }
        t
    }

    fn summarize(_cfg: &Config, cells: &[(CellKey, &Cell)]) -> Summary {
        let gains = |c: &str| -> Vec<f64> { cells.iter().filter(|(k, _)| k.condition == c).map(|(_, o)| o.gain).collect() };
        let conditions = CONDITIONS
            .iter()
            .map(|&c| {
                let of: Vec<&Cell> = cells.iter().filter(|(k, _)| k.condition == c).map(|(_, o)| *o).collect();
                let col = |g: &dyn Fn(&Cell) -> f64| mean(&of.iter().map(|o| g(o)).collect::<Vec<_>>());
                ConditionStats {
                    condition: c.to_string(),
                    mean_gain: col(&|o| o.gain),
                    mean_score: col(&|o| o.consolidated.score),
                    mean_baseline: col(&|o| o.baseline),
                    gated_steps: col(&|o| o.consolidated.nrem_gated_steps as f64),
                    update_mass: col(&|o| o.consolidated.nrem_mass),
                    runs: of.len(),
                }
            })
            .collect();
        let test = welch_greater(&gains("coherent"), &gains("scrambled"));
        Summary {
            conditions,
            welch_t: test.map_or(f64::NAN, |w| w.t),
            p_value: test.map_or(f64::NAN, |w| w.p_greater),
        }
    }

    fn summary_table(s: &Summary) -> Table {
        let mut t = Table::new(["condition", "mean_gain", "mean_score", "mean_baseline", "gated_steps", "update_mass", "runs", "p_value"]);
        for c in &s.conditions {
            t.push(vec![
                c.condition.clone(),
                f(c.mean_gain),
                f(c.mean_score),
                f(c.mean_baseline),
                f(c.gated_steps),
                f(c.update_mass),
                c.runs.to_string(),
                f(s.p_value),
            ]);
        }
        t
    }

    fn plot(_s: &Summary) -> PlotSpec {
        PlotSpec::new("bar", "condition", "mean_gain", "Retention gain from NREM, coherent vs scrambled")
    }
}
