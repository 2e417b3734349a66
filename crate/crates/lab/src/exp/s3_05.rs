//! Reversal learning on a 10-node phasor network (4 input, 4 hidden,
//! 1 output, 1 bias). Blocks A → B → A; recovery is the number of trials
//! into the final A block until the 10-trial moving accuracy reaches 0.9.

use nalgebra::DMatrix;
use phasor_core::graph::{Adjacency, Dynamics, InputSignal, Normalization, PhasorGraph};
use phasor_core::phase::unit;
use phasor_core::plasticity::{
    apply_three_factor, coincidence, homeostasis_edges, CoincidenceForm, Homeostasis, ModulatorParams, ModulatorSource, PlasticityState,
    TraceKind, TraceParams,
};
use phasor_core::rng::{RngKey, StreamRng};
use phasor_core::sleep::phase_scramble;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::artifact::{f, PlotSpec, Table};
use crate::config::Profile;
use crate::error::LabResult;
use crate::experiment::{check_seeds, ensure, grid, CellKey, Experiment, ExperimentConfig};
use crate::stats::{mean, trials_to_criterion};

pub const CONDITIONS: [&str; 6] = ["wake", "nrem", "rem", "nrem_rem", "nrem_rem_no_replay", "nrem_rem_scramble"];

const INPUTS: std::ops::Range<usize> = 0..4;
const HIDDEN: std::ops::Range<usize> = 4..8;
const OUT: usize = 8;
const BIAS: usize = 9;
const NODES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seeds: Vec<u64>,
    pub block_trials: usize,
    pub kappa: f64,
    pub drive: f64,
    pub dt: f64,
    pub settle_steps: usize,
    /// Std of the Gaussian added to the decision variable.
    pub decision_noise: f64,
    pub eta_wake: f64,
    pub baseline_rate: f64,
    pub sleep_every: usize,
    pub rem_replays: usize,
    pub eta_rem: f64,
    pub old_bias: f64,
    pub nrem_steps: usize,
    pub eta_nrem: f64,
    pub nrem_downscale: f64,
    pub window: usize,
    pub criterion: f64,
}

impl ExperimentConfig for Config {
    fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    fn validate(&self) -> LabResult<()> {
        check_seeds(&self.seeds)?;
        ensure(self.block_trials >= self.window && self.window > 0, "block_trials", "blocks must hold at least one window")?;
        ensure(self.dt > 0.0 && self.settle_steps > 1, "settle_steps", "need dt > 0 and at least two steps")?;
        ensure(self.sleep_every > 0, "sleep_every", "must be positive")?;
        ensure((0.0..=1.0).contains(&self.old_bias), "old_bias", "must be a probability")?;
        ensure((0.0..1.0).contains(&self.nrem_downscale), "nrem_downscale", "must lie in [0, 1)")?;
        ensure(self.criterion > 0.0 && self.criterion <= 1.0, "criterion", "must lie in (0, 1]")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Sleep {
    nrem: bool,
    rem: bool,
    replay: bool,
    scramble: bool,
}

fn sleep_of(condition: &str) -> Sleep {
    let (nrem, rem) = match condition {
        "wake" => (false, false),
        "nrem" => (true, false),
        "rem" => (false, true),
        _ => (true, true),
    };
    Sleep {
        nrem,
        rem,
        replay: rem && condition != "nrem_rem_no_replay",
        scramble: condition == "nrem_rem_scramble",
    }
}

struct Net {
    graph: PhasorGraph,
    plasticity: PlasticityState,
    pattern: [f64; 4],
    noise: StreamRng,
    /// Running mean of wake reward.
    baseline: f64,
}

impl Net {
    fn new(cfg: &Config, rng: &mut StreamRng, noise: StreamRng) -> phasor_core::Result<Self> {
        let edges = INPUTS
            .flat_map(|i| HIDDEN.map(move |h| (i, h)))
            .chain(HIDDEN.map(|h| (h, OUT)))
            .chain([(BIAS, OUT)]);
        let adj = Adjacency::from_edges(NODES, edges)?;
        let dynamics = Dynamics {
            kappa: cfg.kappa,
            normalization: Normalization::Raw,
            ..Dynamics::default()
        };
        let mut graph = PhasorGraph::new(adj, vec![1.0; NODES], dynamics, vec![unit(0.0); NODES])?;
        // Feed-forward only: hidden hears inputs, output hears hidden and bias.
        let mut w = DMatrix::zeros(NODES, NODES);
        for h in HIDDEN {
            for i in INPUTS {
                w[(h, i)] = rng.random_range(-1.5..1.5);
            }
            w[(OUT, h)] = 0.1 * rng.sample::<f64, _>(StandardNormal);
        }
        w[(OUT, BIAS)] = 0.1 * rng.sample::<f64, _>(StandardNormal);
        graph.weights = w;
        let plastic: Vec<(usize, usize)> = HIDDEN.map(|h| (OUT, h)).chain([(OUT, BIAS)]).collect();
        let plasticity = PlasticityState::new(plastic, TraceParams::default(), ModulatorParams::default())?;
        let pattern = [0; 4].map(|_| rng.random_range(-PI..PI));
        Ok(Self {
            graph,
            plasticity,
            pattern,
            noise,
            baseline: 0.5,
        })
    }

    /// Presents a pattern (0 = X, 1 = Y = X + π) and returns the action.
    fn present(&mut self, cfg: &Config, phases: &[f64; 4], start: &mut StreamRng) -> phasor_core::Result<usize> {
        for v in self.graph.z.iter_mut() {
            *v = unit(start.random_range(-PI..PI));
        }
        let edges = self.plasticity.edges().to_vec();
        let mut psi = num_complex::Complex64::new(0.0, 0.0);
        for k in 0..cfg.settle_steps {
            let t = k as f64 * cfg.dt;
            let mut u = vec![num_complex::Complex64::new(0.0, 0.0); NODES];
            for (i, &p) in INPUTS.zip(phases) {
                u[i] = cfg.drive * unit(p + t);
            }
            u[BIAS] = cfg.drive * unit(t);
            self.graph.step(Some(&InputSignal::Additive(u)), cfg.dt)?;
            let h = coincidence(&self.graph.z, &edges, CoincidenceForm::PhaseOnly);
            self.plasticity.update_traces(&h, cfg.dt)?;
            self.plasticity.update_modulator(&[], cfg.dt)?;
            if k >= cfg.settle_steps / 2 {
                psi += unit(self.graph.z[OUT].arg() - self.graph.z[BIAS].arg());
            }
        }
        let score = psi.re / psi.norm().max(1e-12) + cfg.decision_noise * self.noise.sample::<f64, _>(StandardNormal);
        Ok(usize::from(score > 0.0))
    }

    fn phases(&self, stimulus: usize) -> [f64; 4] {
        self.pattern.map(|p| p + PI * stimulus as f64)
    }

    /// Reward-prediction error `r − r̄` as a signed modulator on the fast trace.
    fn learn(&mut self, reward: bool, eta: f64) {
        self.plasticity.modulator = f64::from(u8::from(reward)) - self.baseline;
        apply_three_factor(&mut self.graph.weights, &self.plasticity, true, eta, TraceKind::Fast, ModulatorSource::M, None, None);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub correct: Vec<bool>,
    /// Trials into each block until criterion; `None` if never reached.
    pub recovery: Vec<Option<usize>>,
}

fn run(cfg: &Config, condition: &str, key: &RngKey) -> phasor_core::Result<Cell> {
    let plan = sleep_of(condition);
    let mut net = Net::new(cfg, &mut key.stream("network"), key.stream("decision"))?;
    let mut trials = key.stream("trials");
    let mut offline = key.stream("offline");
    // Remembered (stimulus, rewarded action), oldest first.
    let mut memory: Vec<(usize, usize)> = Vec::new();
    let mut correct = Vec::new();
    let mut recovery = Vec::new();
    for (block, reversed) in [false, true, false].into_iter().enumerate() {
        let first = correct.len();
        for t in 0..cfg.block_trials {
            let stimulus = trials.random_range(0..2);
            let action = net.present(cfg, &net.phases(stimulus), &mut trials)?;
            let target = stimulus ^ usize::from(reversed);
            let ok = action == target;
            net.learn(ok, cfg.eta_wake);
            net.baseline += cfg.baseline_rate * (f64::from(u8::from(ok)) - net.baseline);
            correct.push(ok);
            memory.push((stimulus, target));
            let last = block == 2 && t + 1 == cfg.block_trials;
            if (t + 1) % cfg.sleep_every == 0 && !last {
                sleep(cfg, plan, &mut net, &memory, &mut offline)?;
            }
        }
        recovery.push(trials_to_criterion(&correct[first..], cfg.window, cfg.criterion));
    }
    Ok(Cell { correct, recovery })
}

fn sleep(cfg: &Config, plan: Sleep, net: &mut Net, memory: &[(usize, usize)], rng: &mut StreamRng) -> phasor_core::Result<()> {
    if plan.nrem {
        // Spindle-gated capture of slow (recent) tags, then downscaling.
        for _ in 0..cfg.nrem_steps {
            apply_three_factor(&mut net.graph.weights, &net.plasticity, true, cfg.eta_nrem, TraceKind::Slow, ModulatorSource::Prp, None, None);
        }
        let edges = net.plasticity.edges().to_vec();
        homeostasis_edges(&mut net.graph.weights, &edges, &Homeostasis::LinearDecay { rate: cfg.nrem_downscale }, rng)?;
    }
    if plan.rem {
        let older = memory.len().div_ceil(2);
        for _ in 0..cfg.rem_replays {
            let idx = if rng.random::<f64>() < cfg.old_bias { rng.random_range(0..older) } else { rng.random_range(0..memory.len()) };
            let (stimulus, target) = memory[idx];
            let mut phases = net.phases(stimulus);
            if plan.scramble {
                let mut z: Vec<_> = phases.iter().map(|&p| unit(p)).collect();
                phase_scramble(&mut z, rng);
                phases = [0, 1, 2, 3].map(|i| z[i].arg());
            }
            let action = net.present(cfg, &phases, rng)?;
            if plan.replay {
                net.learn(action == target, cfg.eta_rem);
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionStats {
    pub condition: String,
    /// Mean trials to criterion in the final A block (unreached counts as the block length).
    pub recovery: f64,
    pub reversal: f64,
    pub reached: usize,
    pub runs: usize,
    /// Relative speed-up over wake-only: `(wake − this) / wake`.
    pub benefit: f64,
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

pub struct S305;

impl Experiment for S305 {
    type Config = Config;
    type Output = Cell;
    type Summary = Summary;

    const ID: &'static str = "s3-05";
    const CLAIM: &'static str = "REM replay with old-bias sampling speeds recovery after reversal; NREM capture reduces the gain";
    const MODULES: &'static [&'static str] = &["agent-env", "sleep-scheduler", "plasticity"];

    fn config(profile: Profile) -> Config {
        Config {
            seeds: (0..if profile == Profile::Fast { 10 } else { 30 }).collect(),
            block_trials: 150,
            kappa: 1.0,
            drive: 4.0,
            dt: 0.05,
            settle_steps: 60,
            decision_noise: 0.3,
            eta_wake: 0.5,
            baseline_rate: 0.1,
            sleep_every: 10,
            rem_replays: 2,
            eta_rem: 0.5,
            old_bias: 0.9,
            nrem_steps: 20,
            eta_nrem: 0.003,
            nrem_downscale: 0.02,
            window: 10,
            criterion: 0.9,
        }
    }

    fn cells(cfg: &Config) -> Vec<CellKey> {
        grid(CONDITIONS, &cfg.seeds)
    }

    fn run_cell(cfg: &Config, key: &CellKey) -> phasor_core::Result<Cell> {
        // All conditions of a seed share network, stimuli and decision noise.
        run(cfg, &key.condition, &RngKey::new(S305::ID, key.seed))
    }

    fn metrics(out: &Cell) -> Table {
        let mut t = Table::new(["trial", "correct"]);
        for (k, &c) in out.correct.iter().enumerate() {
            t.push(vec![k.to_string(), u8::from(c).to_string()]);
        }
        t
    }

    fn summarize(cfg: &Config, cells: &[(CellKey, &Cell)]) -> Summary {
        let block = |c: &str, b: usize| -> Vec<Option<usize>> { cells.iter().filter(|(k, _)| k.condition == c).map(|(_, o)| o.recovery[b]).collect() };
        let avg = |v: &[Option<usize>]| mean(&v.iter().map(|r| r.unwrap_or(cfg.block_trials) as f64).collect::<Vec<_>>());
        let wake = avg(&block("wake", 2));
        let conditions = CONDITIONS
            .iter()
            .map(|&c| {
                let rec = block(c, 2);
                let recovery = avg(&rec);
                ConditionStats {
                    condition: c.to_string(),
                    recovery,
                    reversal: avg(&block(c, 1)),
                    reached: rec.iter().filter(|r| r.is_some()).count(),
                    runs: rec.len(),
                    benefit: (wake - recovery) / wake,
                }
            })
            .collect();
        Summary { conditions }
    }

    fn summary_table(s: &Summary) -> Table {
        let mut t = Table::new(["condition", "recovery_trials", "reversal_trials", "reached", "runs", "benefit"]);
        for c in &s.conditions {
            t.push(vec![c.condition.clone(), f(c.recovery), f(c.reversal), c.reached.to_string(), c.runs.to_string(), f(c.benefit)]);
        }
        t
    }

    fn plot(_s: &Summary) -> PlotSpec {
        PlotSpec::new("bar", "condition", "recovery_trials", "Trials to recover after the return to A")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sleep_plans_match_conditions() {
        assert_eq!(sleep_of("wake"), Sleep { nrem: false, rem: false, replay: false, scramble: false });
        assert!(!sleep_of("nrem_rem_no_replay").replay && sleep_of("nrem_rem_no_replay").rem);
        assert!(sleep_of("nrem_rem_scramble").scramble);
    }
}
