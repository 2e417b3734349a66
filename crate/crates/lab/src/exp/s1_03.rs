//! Delay-induced multistability: identical oscillators with instantaneous
//! coupling all reach the same synchronized state, while delayed coupling
//! lets different initial conditions settle on different attractors.

use phasor_core::graph::{topology, Adjacency, Dynamics, PhasorGraph};
use phasor_core::phase;
use phasor_core::rng::RngKey;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::artifact::{f, PlotSpec, Table};
use crate::config::Profile;
use crate::error::LabResult;
use crate::experiment::{check_seeds, ensure, grid, CellKey, Experiment, ExperimentConfig};
use crate::stats::{mean, variance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// One seed per initial condition.
    pub seeds: Vec<u64>,
    pub n: usize,
    /// Ring neighbours per side; `0` means all-to-all.
    pub ring_k: usize,
    pub kappa: f64,
    pub omega: f64,
    pub delay_steps: usize,
    pub dt: f64,
    pub steps: usize,
    pub tail: usize,
    pub record_every: usize,
    /// Final R values closer than this count as the same attractor.
    pub attractor_resolution: f64,
}

impl ExperimentConfig for Config {
    fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    fn validate(&self) -> LabResult<()> {
        check_seeds(&self.seeds)?;
        ensure(self.n >= 3, "n", "need at least 3 nodes")?;
        ensure(self.delay_steps >= 1, "delay_steps", "the delayed condition needs a positive delay")?;
        ensure(self.dt > 0.0, "dt", "must be positive")?;
        ensure(self.tail >= 1 && self.tail <= self.steps, "tail", "must be in 1..=steps")?;
        ensure(self.record_every >= 1, "record_every", "must be positive")?;
        ensure(self.attractor_resolution > 0.0, "attractor_resolution", "must be positive")
    }
}

pub const CONDITIONS: [&str; 2] = ["instantaneous", "delayed"];

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub delayed: bool,
    pub final_r: f64,
    pub trace: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionStats {
    pub condition: String,
    pub mean_r: f64,
    pub std_r: f64,
    pub attractors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub conditions: Vec<ConditionStats>,
}

/// Number of clusters of sorted values separated by more than `res`.
pub fn count_clusters(values: &[f64], res: f64) -> usize {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return 0;
    }
    1 + v.windows(2).filter(|w| w[1] - w[0] > res).count()
}

pub struct S103;

impl Experiment for S103 {
    type Config = Config;
    type Output = Trial;
    type Summary = Summary;

    const ID: &'static str = "s1-03";
    const CLAIM: &'static str = "delayed coupling yields initial-condition-dependent attractors absent without delay";
    const MODULES: &'static [&'static str] = &["phasor-graph"];

    fn config(profile: Profile) -> Config {
        Config {
            seeds: (0..if profile == Profile::Fast { 8 } else { 32 }).collect(),
            n: 10,
            ring_k: 0,
            kappa: 0.5,
            omega: 1.0,
            delay_steps: 40,
            dt: 0.05,
            steps: 6000,
            tail: 500,
            record_every: 50,
            attractor_resolution: 0.05,
        }
    }

    fn cells(cfg: &Config) -> Vec<CellKey> {
        grid(CONDITIONS, &cfg.seeds)
    }

    fn run_cell(cfg: &Config, key: &CellKey) -> phasor_core::Result<Trial> {
        let delayed = key.condition == "delayed";
        let mut rng = RngKey::new(S103::ID, key.seed).stream("initial");
        let z0: Vec<_> = (0..cfg.n).map(|_| phase::unit(rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))).collect();
        let adj = if cfg.ring_k == 0 { Adjacency::complete(cfg.n) } else { topology::ring(cfg.n, cfg.ring_k)? };
        let dynamics = Dynamics {
            kappa: cfg.kappa,
            delay_steps: if delayed { cfg.delay_steps } else { 0 },
            ..Dynamics::default()
        };
        let mut g = PhasorGraph::new(adj, vec![cfg.omega; cfg.n], dynamics, z0)?;
        let (mut trace, mut tail) = (Vec::new(), Vec::new());
        for t in 1..=cfg.steps {
            g.step(None, cfg.dt)?;
            let r = g.order_parameter()?;
            if t % cfg.record_every == 0 {
                trace.push((t, r));
            }
            if t > cfg.steps - cfg.tail {
                tail.push(r);
            }
        }
        Ok(Trial {
            delayed,
            final_r: mean(&tail),
            trace,
        })
    }

    fn metrics(out: &Trial) -> Table {
        let mut t = Table::new(["step", "r"]);
        for &(s, r) in &out.trace {
            t.push(vec![s.to_string(), f(r)]);
        }
        t
    }

    fn summarize(cfg: &Config, cells: &[(CellKey, &Trial)]) -> Summary {
        let conditions = CONDITIONS
            .iter()
            .map(|&c| {
                let rs: Vec<f64> = cells.iter().filter(|(k, _)| k.condition == c).map(|(_, t)| t.final_r).collect();
                ConditionStats {
                    condition: c.into(),
                    mean_r: mean(&rs),
                    std_r: variance(&rs).sqrt(),
                    attractors: count_clusters(&rs, cfg.attractor_resolution),
                }
            })
            .collect();
        Summary { conditions }
    }

    fn summary_table(s: &Summary) -> Table {
        let mut t = Table::new(["condition", "mean_r", "std_r", "attractors"]);
        for c in &s.conditions {
            t.push(vec![c.condition.clone(), f(c.mean_r), f(c.std_r), c.attractors.to_string()]);
        }
        t
    }

    fn plot(_s: &Summary) -> PlotSpec {
        PlotSpec::new("line", "step", "r", "R(t) per initial condition").data("metrics/").series("condition")
    }
}

#[cfg(test)]
mod tests {
    use super::count_clusters;

    #[test]
    fn clusters_split_on_gaps() {
        assert_eq!(count_clusters(&[0.1, 0.12, 0.5, 0.52, 0.9], 0.05), 3);
        assert_eq!(count_clusters(&[], 0.05), 0);
    }
}
