//! Critical window of the synchronization transition: final R across
//! random initial conditions for a sweep of coupling strengths.

use phasor_core::graph::{Adjacency, Dynamics, Normalization, PhasorGraph};
use phasor_core::phase;
use phasor_core::rng::RngKey;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::artifact::{f, Annotation, PlotSpec, Table};
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
    pub kappas: Vec<f64>,
    pub omega_range: (f64, f64),
    pub dt: f64,
    pub steps: usize,
    /// R is averaged over this many final steps.
    pub tail: usize,
    pub record_every: usize,
}

impl ExperimentConfig for Config {
    fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    fn validate(&self) -> LabResult<()> {
        check_seeds(&self.seeds)?;
        ensure(self.n >= 2, "n", "need at least two oscillators")?;
        ensure(self.kappas.len() >= 3, "kappas", "need at least three coupling values")?;
        ensure(self.kappas.iter().all(|k| *k >= 0.0), "kappas", "must be non-negative")?;
        ensure(self.omega_range.0 <= self.omega_range.1, "omega_range", "lower bound above upper")?;
        ensure(self.dt > 0.0, "dt", "must be positive")?;
        ensure(self.tail >= 1 && self.tail <= self.steps, "tail", "must be in 1..=steps")?;
        ensure(self.record_every >= 1, "record_every", "must be positive")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub kappa: f64,
    pub final_r: f64,
    pub trace: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaStats {
    pub kappa: f64,
    pub mean_r: f64,
    pub var_r: f64,
    pub trials: usize,
    pub in_window: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub per_kappa: Vec<KappaStats>,
    pub final_r: Vec<(f64, f64)>,
    pub peak_index: usize,
    pub interior_peak: bool,
    pub window: (f64, f64),
}

pub struct S104;

fn condition(k: f64) -> String {
    format!("kappa={k:.3}")
}

impl Experiment for S104 {
    type Config = Config;
    type Output = Trial;
    type Summary = Summary;

    const ID: &'static str = "s1-04";
    const CLAIM: &'static str = "final-R variance across initial conditions peaks inside the coupling sweep (critical window)";
    const MODULES: &'static [&'static str] = &["phasor-graph"];

    fn config(profile: Profile) -> Config {
        let seeds = match profile {
            Profile::Fast => 25,
            Profile::Paper => 50,
        };
        Config {
            seeds: (0..seeds).collect(),
            n: 20,
            kappas: (0..10).map(|i| 0.05 + 0.05 * i as f64).collect(),
            omega_range: (0.8, 1.2),
            dt: 0.05,
            steps: 4000,
            tail: 400,
            record_every: 50,
        }
    }

    fn cells(cfg: &Config) -> Vec<CellKey> {
        grid(cfg.kappas.iter().map(|&k| condition(k)), &cfg.seeds)
    }

    fn run_cell(cfg: &Config, key: &CellKey) -> phasor_core::Result<Trial> {
        let kappa = cfg.kappas.iter().copied().find(|&k| condition(k) == key.condition).expect("cell from grid");
        // The initial condition (phases and frequencies) depends on the seed
        // only, so every coupling value sees the same draws.
        let mut rng = RngKey::new(S104::ID, key.seed).stream("initial");
        let omega = (0..cfg.n).map(|_| rng.random_range(cfg.omega_range.0..=cfg.omega_range.1)).collect();
        let z0 = (0..cfg.n).map(|_| phase::unit(rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))).collect();
        let dynamics = Dynamics {
            kappa,
            normalization: Normalization::Row,
            ..Dynamics::default()
        };
        let mut g = PhasorGraph::new(Adjacency::complete(cfg.n), omega, dynamics, z0)?;
        let mut trace = Vec::new();
        let mut tail = Vec::with_capacity(cfg.tail);
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
            kappa,
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
        let mut per_kappa: Vec<KappaStats> = cfg
            .kappas
            .iter()
            .map(|&k| {
                let rs: Vec<f64> = cells.iter().filter(|(_, t)| t.kappa == k).map(|(_, t)| t.final_r).collect();
                KappaStats {
                    kappa: k,
                    mean_r: mean(&rs),
                    var_r: variance(&rs),
                    trials: rs.len(),
                    in_window: false,
                }
            })
            .collect();
        let peak_index = per_kappa
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.var_r.total_cmp(&b.1.var_r))
            .map_or(0, |(i, _)| i);
        let peak = per_kappa[peak_index].var_r;
        for s in &mut per_kappa {
            s.in_window = s.var_r > 0.5 * peak;
        }
        let inside: Vec<f64> = per_kappa.iter().filter(|s| s.in_window).map(|s| s.kappa).collect();
        let window = (
            inside.iter().copied().fold(f64::INFINITY, f64::min),
            inside.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        );
        Summary {
            interior_peak: peak_index > 0 && peak_index + 1 < per_kappa.len(),
            peak_index,
            final_r: cells.iter().map(|(_, t)| (t.kappa, t.final_r)).collect(),
            per_kappa,
            window,
        }
    }

    fn summary_table(s: &Summary) -> Table {
        let mut t = Table::new(["kappa", "mean_r", "var_r", "trials", "critical_window"]);
        for k in &s.per_kappa {
            t.push(vec![f(k.kappa), f(k.mean_r), f(k.var_r), k.trials.to_string(), k.in_window.to_string()]);
        }
        t
    }

    fn plot(s: &Summary) -> PlotSpec {
        let mut p = PlotSpec::new("scatter", "kappa", "final_r", "Final synchrony across initial conditions").data("summary.json#summary.final_r");
        p.annotations.push(Annotation {
            kind: "x_band".into(),
            label: "variance > 50% of peak".into(),
            from: s.window.0,
            to: s.window.1,
        });
        p
    }
}
