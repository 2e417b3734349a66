//! A maze agent built on the phasor substrate.
//!
//! Observations drive a small oscillator graph through the state codebook;
//! reward (and optionally compression-progress) pulses feed its modulator,
//! and fast traces tag co-active edges. Actions come from the value table
//! held by the transition model.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::codebook::{encode_observation, EncodingParams, StateCodebook};
use super::maze::{GridMaze, RewardSpec};
use super::qlearn::{EpisodeLog, EpisodeSpec, TdParams};
use super::transition::TransitionModel;
use crate::error::Result;
use crate::graph::{topology, Adjacency, Dynamics, PhasorGraph};
use crate::phase;
use crate::plasticity::{apply_three_factor, coincidence, CoincidenceForm, ModulatorParams, ModulatorSource, PlasticityState, TraceKind, TraceParams};
use crate::progress::{ProgressDetector, ProgressParams};
use crate::rng::RngKey;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub code_dim: usize,
    pub substrate_nodes: usize,
    pub substeps: usize,
    pub dt: f64,
    pub eta_wake: f64,
    pub encoding: EncodingParams,
    pub td: TdParams,
    pub similarity_floor: f64,
    /// Feed model-surprise progress pulses into the modulator.
    pub intrinsic: bool,
    pub progress: ProgressParams,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            code_dim: 128,
            substrate_nodes: 16,
            substeps: 2,
            dt: 0.05,
            eta_wake: 0.01,
            encoding: EncodingParams::default(),
            td: TdParams::default(),
            similarity_floor: 0.3,
            intrinsic: false,
            progress: ProgressParams {
                threshold: 0.01,
                ..ProgressParams::with_window(10)
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct PhasorAgent {
    pub model: TransitionModel,
    pub graph: PhasorGraph,
    pub plasticity: PlasticityState,
    pub cfg: AgentConfig,
    curiosity: Option<ProgressDetector>,
    clock: u64,
}

impl PhasorAgent {
    pub fn new(states: usize, cfg: AgentConfig, key: &RngKey) -> Result<Self> {
        let book = StateCodebook::new(states, cfg.code_dim, &mut key.stream("codebook"));
        let model = TransitionModel::new(book, cfg.similarity_floor, RewardSpec::default().step_cost);
        let n = cfg.substrate_nodes;
        let adj: Adjacency = topology::ring(n, 2)?;
        let mut rng = key.stream("substrate");
        let omega = (0..n).map(|_| rng.random_range(0.8..1.2)).collect();
        let z0 = (0..n).map(|_| phase::unit(rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))).collect();
        let graph = PhasorGraph::new(adj.clone(), omega, Dynamics { kappa: 0.3, ..Dynamics::default() }, z0)?;
        let plasticity = PlasticityState::new(adj.edges(), TraceParams::default(), ModulatorParams::default())?;
        let curiosity = if cfg.intrinsic { Some(ProgressDetector::new(cfg.progress.clone())?) } else { None };
        Ok(Self {
            model,
            graph,
            plasticity,
            cfg,
            curiosity,
            clock: 0,
        })
    }

    /// Drives the substrate with the observation code and tags traces.
    fn sense(&mut self, state: usize, pulses: &[f64]) -> Result<()> {
        let n = self.cfg.substrate_nodes;
        let input = encode_observation(&self.model.book, state, n, &self.cfg.encoding);
        let edges = self.plasticity.edges().to_vec();

        for k in 0..self.cfg.substeps.max(1) {
            let h = coincidence(&self.graph.z, &edges, CoincidenceForm::PhaseOnly);
            self.graph.step(Some(&input), self.cfg.dt)?;
            self.plasticity.update_traces(&h, self.cfg.dt)?;
            self.plasticity.update_modulator(if k == 0 { pulses } else { &[] }, self.cfg.dt)?;
            apply_three_factor(
                &mut self.graph.weights,
                &self.plasticity,
                true,
                self.cfg.eta_wake,
                TraceKind::Fast,
                ModulatorSource::M,
                None,
                None,
            );
        }
        Ok(())
    }

    /// Model surprise `1 − overlap(prediction, actual)`.
    fn surprise(&self, s: usize, a: usize, next: usize) -> f64 {
        if !self.model.has_transition(s, a) {
            return 1.0;
        }
        let z: Vec<Complex64> = self.model.reconstruct(s, a);
        1.0 - crate::holo::overlap(&z, self.model.book.code(next)).unwrap_or(0.0)
    }
}

/// Runs one ε-greedy episode, updating values, the transition model and
/// the substrate traces.
pub fn wake_episode<R: Rng + ?Sized>(
    env: &GridMaze,
    agent: &mut PhasorAgent,
    start: usize,
    spec: &EpisodeSpec,
    epsilon: f64,
    rng: &mut R,
) -> Result<EpisodeLog> {
    let mut log = EpisodeLog::default();
    let mut s = start;
    let TdParams { alpha, gamma, .. } = agent.cfg.td;
    let mut pulses: Vec<f64> = Vec::new();
    for _ in 0..env.step_cap() {
        agent.sense(s, &pulses)?;
        pulses.clear();
        let a = agent.model.q.epsilon_greedy(s, epsilon, rng);
        let next = env.step(s, a);
        let (r, terminal) = spec.outcome(env, next);
        let surprise = agent.surprise(s, a, next);
        if let Some(det) = agent.curiosity.as_mut() {
            if let Some(p) = det.observe(agent.clock, surprise)? {
                pulses.push(p);
            }
        }
        agent.clock += 1;
        if r > 0.0 {
            pulses.push(r);
        }
        agent.model.q.td_update(s, a, r, next, terminal, alpha, gamma);
        agent.model.observe(s, a, next, r, terminal);
        log.states.push(s);
        log.actions.push(a);
        log.rewards.push(r);
        s = next;
        if terminal {
            log.reached_goal = true;
            agent.sense(s, &pulses)?;
            return Ok(log);
        }
    }
    log.truncated = true;
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn latent_exploration_tags_without_extrinsic_pulses() {
        let env = GridMaze::open(4, 4, 15).unwrap();
        let key = RngKey::new("agent-test", 0);
        let mut agent = PhasorAgent::new(16, AgentConfig::default(), &key).unwrap();
        let latent = EpisodeSpec { goal_active: false, ..EpisodeSpec::default() };
        let log = wake_episode(&env, &mut agent, 0, &latent, 1.0, &mut stream_rng("agent-test", 0, "ep")).unwrap();
        assert!(log.rewards.iter().all(|&r| r < 0.0));
        assert_eq!(agent.plasticity.modulator, 0.0);
        assert!(agent.plasticity.mean_abs_fast() > 0.0);
        assert!(log.truncated);
    }

    #[test]
    fn rewarded_goal_pulses_modulator() {
        let env = GridMaze::open(3, 1, 2).unwrap();
        let key = RngKey::new("agent-test", 1);
        let mut agent = PhasorAgent::new(3, AgentConfig::default(), &key).unwrap();
        let mut rng = stream_rng("agent-test", 1, "ep");
        let log = wake_episode(&env, &mut agent, 0, &EpisodeSpec::default(), 1.0, &mut rng).unwrap();
        assert!(log.reached_goal);
        assert!(agent.plasticity.modulator > 0.0);
    }

    #[test]
    fn surprise_is_maximal_for_unknown_transitions() {
        let key = RngKey::new("agent-test", 2);
        let mut agent = PhasorAgent::new(4, AgentConfig::default(), &key).unwrap();
        assert_eq!(agent.surprise(0, 1, 1), 1.0);
        agent.model.observe(0, 1, 1, 0.0, false);
        assert!(agent.surprise(0, 1, 1) < 0.5);
    }
}
