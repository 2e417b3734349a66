//! Tabular values, ε-greedy control and the Dyna-Q baseline.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::maze::{GridMaze, RewardSpec, ACTIONS};
use super::readout::argmax_lowest;

#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    values: Vec<[f64; ACTIONS]>,
}

impl QTable {
    pub fn new(states: usize) -> Self {
        Self {
            values: vec![[0.0; ACTIONS]; states],
        }
    }

    pub fn states(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s][a]
    }

    pub fn row(&self, s: usize) -> &[f64; ACTIONS] {
        &self.values[s]
    }

    pub fn max(&self, s: usize) -> f64 {
        self.values[s].iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action, ties to the lowest index.
    pub fn greedy(&self, s: usize) -> usize {
        argmax_lowest(&self.values[s])
    }

    pub fn epsilon_greedy<R: Rng + ?Sized>(&self, s: usize, epsilon: f64, rng: &mut R) -> usize {
        if rng.random::<f64>() < epsilon {
            rng.random_range(0..ACTIONS)
        } else {
            self.greedy(s)
        }
    }

    /// One-step TD toward `r + γ max Q(s')` (no bootstrap when terminal).
    /// Returns the TD error.
    pub fn td_update(&mut self, s: usize, a: usize, r: f64, next: usize, terminal: bool, alpha: f64, gamma: f64) -> f64 {
        let target = if terminal { r } else { r + gamma * self.max(next) };
        let delta = target - self.values[s][a];
        self.values[s][a] += alpha * delta;
        delta
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdParams {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
}

impl Default for TdParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            gamma: 0.95,
            epsilon: 0.1,
        }
    }
}

/// How the environment responds during an episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    pub reward: RewardSpec,
    /// When false the goal is an ordinary cell (unrewarded exploration).
    pub goal_active: bool,
}

impl Default for EpisodeSpec {
    fn default() -> Self {
        Self {
            reward: RewardSpec::default(),
            goal_active: true,
        }
    }
}

impl EpisodeSpec {
    pub fn outcome(&self, env: &GridMaze, next: usize) -> (f64, bool) {
        if self.goal_active && next == env.goal() {
            (self.reward.goal, true)
        } else {
            (self.reward.step_cost, false)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct ModelEntry {
    reward: f64,
    next: usize,
    terminal: bool,
}

/// Q-learning plus an exact `(s, a) → (r, s')` model replayed uniformly.
#[derive(Debug, Clone)]
pub struct DynaAgent {
    pub q: QTable,
    model: Vec<Option<ModelEntry>>,
    observed: Vec<usize>,
    pub params: TdParams,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeLog {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub reached_goal: bool,
    pub truncated: bool,
}

impl DynaAgent {
    pub fn new(states: usize, params: TdParams) -> Self {
        Self {
            q: QTable::new(states),
            model: vec![None; states * ACTIONS],
            observed: Vec::new(),
            params,
        }
    }

    pub fn model_size(&self) -> usize {
        self.observed.len()
    }

    fn remember(&mut self, s: usize, a: usize, reward: f64, next: usize, terminal: bool) {
        let k = s * ACTIONS + a;
        if self.model[k].is_none() {
            self.observed.push(k);
        }
        self.model[k] = Some(ModelEntry { reward, next, terminal });
    }

    /// `steps` uniform draws from the remembered transitions.
    pub fn plan<R: Rng + ?Sized>(&mut self, steps: usize, rng: &mut R) {
        if self.observed.is_empty() {
            return;
        }
        let TdParams { alpha, gamma, .. } = self.params;
        for _ in 0..steps {
            let k = self.observed[rng.random_range(0..self.observed.len())];
            if let Some(e) = self.model[k] {
                self.q.td_update(k / ACTIONS, k % ACTIONS, e.reward, e.next, e.terminal, alpha, gamma);
            }
        }
    }

    /// Marks arrivals in `goal` as rewarded and terminal in the model.
    pub fn reveal_goal(&mut self, goal: usize, reward: f64) {
        for e in self.model.iter_mut().flatten() {
            if e.next == goal {
                e.reward = reward;
                e.terminal = true;
            }
        }
    }

    /// One real episode with `planning` model updates after every step.
    pub fn episode<R: Rng + ?Sized>(&mut self, env: &GridMaze, start: usize, spec: &EpisodeSpec, planning: usize, rng: &mut R) -> EpisodeLog {
        let mut log = EpisodeLog::default();
        let mut s = start;
        let TdParams { alpha, gamma, epsilon } = self.params;
        for _ in 0..env.step_cap() {
            let a = self.q.epsilon_greedy(s, epsilon, rng);
            let next = env.step(s, a);
            let (r, terminal) = spec.outcome(env, next);
            self.q.td_update(s, a, r, next, terminal, alpha, gamma);
            self.remember(s, a, r, next, terminal);
            if planning > 0 {
                self.plan(planning, rng);
            }
            log.states.push(s);
            log.actions.push(a);
            log.rewards.push(r);
            s = next;
            if terminal {
                log.reached_goal = true;
                return log;
            }
        }
        log.truncated = true;
        log
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynaConfig {
    pub episodes: usize,
    pub planning_steps: usize,
    pub td: TdParams,
}

/// Trains a Dyna-Q agent from starts drawn uniformly from `starts`.
pub fn dyna_q<R: Rng + ?Sized>(env: &GridMaze, starts: &[usize], cfg: &DynaConfig, spec: &EpisodeSpec, rng: &mut R) -> (DynaAgent, Vec<EpisodeLog>) {
    let mut agent = DynaAgent::new(env.n_cells(), cfg.td.clone());
    let logs = (0..cfg.episodes)
        .map(|_| {
            let start = starts[rng.random_range(0..starts.len())];
            agent.episode(env, start, spec, cfg.planning_steps, rng)
        })
        .collect();
    (agent, logs)
}
