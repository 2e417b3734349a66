//! Delayed credit assignment. A causal subset of edges is phase-aligned
//! during a brief event; a modulator pulse follows after a controlled
//! delay. Credit consistency asks how many of the largest resulting weight
//! changes land on causal edges, relative to chance.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use phasor_core::plasticity::{apply_three_factor, ModulatorParams, ModulatorSource, PlasticityState, TraceKind, TraceParams};
use phasor_core::rng::RngKey;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::artifact::{f, PlotSpec, Table};
use crate::config::Profile;
use crate::error::LabResult;
use crate::experiment::{check_seeds, ensure, grid, CellKey, Experiment, ExperimentConfig};
use crate::stats::mean;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seeds: Vec<u64>,
    /// Nodes of the directed all-to-all edge set.
    pub nodes: usize,
    pub causal_edges: usize,
    pub tau_f: Vec<f64>,
    /// Delays between event end and pulse, in steps.
    pub delays: Vec<usize>,
    pub episodes: usize,
    pub dt: f64,
    pub lead_in: usize,
    pub event_steps: usize,
    /// Causal phase differences are U(−w, w) during the event; all other
    /// differences are U(−π, π).
    pub event_half_width: f64,
    pub after_pulse: usize,
    pub eta: f64,
    pub pulse: f64,
}

impl ExperimentConfig for Config {
    fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    fn validate(&self) -> LabResult<()> {
        check_seeds(&self.seeds)?;
        ensure(self.nodes >= 2, "nodes", "need at least 2 nodes")?;
        let edges = self.nodes * (self.nodes - 1);
        ensure(self.causal_edges >= 1 && self.causal_edges < edges, "causal_edges", "must be in 1..edges")?;
        ensure(self.tau_f.len() >= 2 && self.tau_f.iter().all(|t| *t > 0.0), "tau_f", "need at least two positive time constants")?;
        ensure(!self.delays.is_empty(), "delays", "must be non-empty")?;
        ensure(self.episodes >= 1, "episodes", "must be positive")?;
        ensure(self.dt > 0.0, "dt", "must be positive")?;
        ensure(self.event_steps >= 1, "event_steps", "must be positive")?;
        ensure(self.event_half_width > 0.0 && self.event_half_width <= PI, "event_half_width", "must be in (0, π]")?;
        ensure(self.pulse > 0.0, "pulse", "must be positive")
    }
}

fn condition(tau: f64, delay: usize) -> String {
    format!("tau_f={tau:.2}/delay={delay}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub tau_f: f64,
    pub delay: usize,
    /// Per-episode consistency (top-k precision over chance).
    pub consistency: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Point {
    pub tau_f: f64,
    pub delay: usize,
    pub consistency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub points: Vec<Point>,
    /// (delay, longest-τ consistency / shortest-τ consistency)
    pub ratio: Vec<(usize, f64)>,
    pub ratio_monotone: bool,
}

/// Precision of the `k` largest updates over the chance rate `k / len`.
pub fn top_k_consistency(dw: &[f64], causal: &[bool], k: usize) -> f64 {
    let mut idx: Vec<usize> = (0..dw.len()).collect();
    // Stable sort: ties keep index order.
    idx.sort_by(|&a, &b| dw[b].total_cmp(&dw[a]));
    let hits = idx[..k].iter().filter(|&&i| causal[i]).count();
    let chance = causal.iter().filter(|&&c| c).count() as f64 / dw.len() as f64;
    (hits as f64 / k as f64) / chance
}

pub struct S203;

impl Experiment for S203 {
    type Config = Config;
    type Output = Cell;
    type Summary = Summary;

    const ID: &'static str = "s2-03";
    const CLAIM: &'static str = "longer eligibility traces keep credit on causal edges under delayed modulation";
    const MODULES: &'static [&'static str] = &["plasticity"];

    fn config(profile: Profile) -> Config {
        Config {
            seeds: (0..if profile == Profile::Fast { 10 } else { 30 }).collect(),
            nodes: 10,
            causal_edges: 9,
            tau_f: vec![0.1, 0.3, 1.0, 3.0],
            delays: vec![0, 10, 20, 40, 60],
            episodes: 150,
            dt: 0.1,
            lead_in: 20,
            event_steps: 20,
            event_half_width: 2.3,
            after_pulse: 10,
            eta: 1.0,
            pulse: 1.0,
        }
    }

    fn cells(cfg: &Config) -> Vec<CellKey> {
        let conds: Vec<String> = cfg.tau_f.iter().flat_map(|&t| cfg.delays.iter().map(move |&d| condition(t, d))).collect();
        grid(conds, &cfg.seeds)
    }

    fn run_cell(cfg: &Config, key: &CellKey) -> phasor_core::Result<Cell> {
        let (tau_f, delay) = cfg
            .tau_f
            .iter()
            .flat_map(|&t| cfg.delays.iter().map(move |&d| (t, d)))
            .find(|&(t, d)| condition(t, d) == key.condition)
            .expect("cell from grid");
        let n = cfg.nodes;
        let edges: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).collect();
        let m = edges.len();
        // Identical causal sets and phase streams for every (τ, delay).
        let root = RngKey::new(S203::ID, key.seed);
        let mut crng = root.stream("causal");
        let mut order: Vec<usize> = (0..m).collect();
        order.shuffle(&mut crng);
        let mut causal = vec![false; m];
        order[..cfg.causal_edges].iter().for_each(|&k| causal[k] = true);
        let mut prng = root.stream("phases");
        let traces = TraceParams { tau_f, ..TraceParams::default() };
        let mut consistency = Vec::with_capacity(cfg.episodes);
        let mut h = vec![0.0; m];
        for _ in 0..cfg.episodes {
            let mut state = PlasticityState::new(edges.clone(), traces.clone(), ModulatorParams::default())?;
            let mut w = DMatrix::zeros(n, n);
            let pulse_at = cfg.lead_in + cfg.event_steps + delay;
            // The phase stream is drawn for the longest delay so episodes
            // stay aligned across conditions.
            let max_delay = cfg.delays.iter().copied().max().unwrap_or(0);
            let total = cfg.lead_in + cfg.event_steps + max_delay + cfg.after_pulse;
            for t in 0..total {
                let in_event = (cfg.lead_in..cfg.lead_in + cfg.event_steps).contains(&t);
                for (k, hk) in h.iter_mut().enumerate() {
                    let width = if in_event && causal[k] { cfg.event_half_width } else { PI };
                    *hk = prng.random_range(-width..width).cos();
                }
                if t > pulse_at + cfg.after_pulse {
                    continue;
                }
                state.update_traces(&h, cfg.dt)?;
                let pulses: &[f64] = if t == pulse_at { &[cfg.pulse] } else { &[] };
                state.update_modulator(pulses, cfg.dt)?;
                apply_three_factor(&mut w, &state, true, cfg.eta, TraceKind::Fast, ModulatorSource::M, None, None);
            }
            let dw: Vec<f64> = edges.iter().map(|&(i, j)| w[(i, j)]).collect();
            consistency.push(top_k_consistency(&dw, &causal, cfg.causal_edges));
        }
        Ok(Cell { tau_f, delay, consistency })
    }

    fn metrics(out: &Cell) -> Table {
        let mut t = Table::new(["episode", "consistency"]);
        for (i, c) in out.consistency.iter().enumerate() {
            t.push(vec![i.to_string(), f(*c)]);
        }
        t
    }

    fn summarize(cfg: &Config, cells: &[(CellKey, &Cell)]) -> Summary {
        let mut points = Vec::new();
        for &t in &cfg.tau_f {
            for &d in &cfg.delays {
                let all: Vec<f64> = cells
                    .iter()
                    .filter(|(_, c)| c.tau_f == t && c.delay == d)
                    .flat_map(|(_, c)| c.consistency.iter().copied())
                    .collect();
                points.push(Point {
                    tau_f: t,
                    delay: d,
                    consistency: mean(&all),
                });
            }
        }
        let lo = cfg.tau_f.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = cfg.tau_f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let at = |t: f64, d: usize| points.iter().find(|p| p.tau_f == t && p.delay == d).map_or(f64::NAN, |p| p.consistency);
        let mut delays = cfg.delays.clone();
        delays.sort_unstable();
        let ratio: Vec<(usize, f64)> = delays.iter().map(|&d| (d, at(hi, d) / at(lo, d))).collect();
        Summary {
            ratio_monotone: ratio.windows(2).all(|w| w[1].1 <= w[0].1),
            points,
            ratio,
        }
    }

    fn summary_table(s: &Summary) -> Table {
        let mut t = Table::new(["tau_f", "delay", "consistency"]);
        for p in &s.points {
            t.push(vec![f(p.tau_f), p.delay.to_string(), f(p.consistency)]);
        }
        t
    }

    fn plot(_s: &Summary) -> PlotSpec {
        PlotSpec::new("line", "delay", "consistency", "Credit consistency vs modulator delay").series("tau_f")
    }
}

#[cfg(test)]
mod tests {
    use super::top_k_consistency;

    #[test]
    fn perfect_and_chance_precision() {
        let causal = [true, false, false, false];
        assert_eq!(top_k_consistency(&[1.0, 0.0, 0.0, 0.0], &causal, 1), 4.0);
        assert_eq!(top_k_consistency(&[0.0, 1.0, 0.0, 0.0], &causal, 1), 0.0);
    }
}
