//! Latent learning: unrewarded exploration, then a goal appears. Success at
//! reward onset (t=0) measures what the exploration left behind.

use phasor_core::env::{
    evaluate_regions, rem_replay, wake_episode, AgentConfig, DreamSampling, DynaAgent, EpisodeSpec, GridMaze, PhasorAgent, QTable,
    ReplayConfig, RewardSpec, TdParams,
};
use phasor_core::plasticity::Homeostasis;
use phasor_core::rng::RngKey;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::artifact::{f, PlotSpec, Table};
use crate::config::Profile;
use crate::error::LabResult;
use crate::experiment::{check_seeds, ensure, grid, CellKey, Experiment, ExperimentConfig};
use crate::stats::mean;

pub const CONDITIONS: [&str; 8] = [
    "random_wake",
    "intrinsic_wake",
    "nrem",
    "rem",
    "wedged",
    "random_replay",
    "scramble",
    "dyna_q",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seeds: Vec<u64>,
    pub width: usize,
    pub height: usize,
    pub loop_density: f64,
    pub explore_episodes: usize,
    pub explore_epsilon: f64,
    pub agent: AgentConfig,
    pub replay: ReplayConfig,
    pub nrem: Homeostasis,
    /// Rewarded episodes after onset, with evaluations every `eval_every`.
    pub rewarded_episodes: usize,
    pub eval_every: usize,
    pub rewarded_epsilon: f64,
}

impl ExperimentConfig for Config {
    fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    fn validate(&self) -> LabResult<()> {
        check_seeds(&self.seeds)?;
        ensure(self.width * self.height >= 2, "width", "maze too small")?;
        ensure(self.explore_episodes > 0, "explore_episodes", "must be positive")?;
        ensure(self.eval_every > 0, "eval_every", "must be positive")?;
        ensure((0.0..=1.0).contains(&self.explore_epsilon), "explore_epsilon", "must be in [0, 1]")?;
        self.nrem.validate().map_err(|e| crate::error::LabError::config("nrem", e.to_string()))
    }
}

fn maze(cfg: &Config, seed: u64) -> phasor_core::Result<GridMaze> {
    let mut rng = RngKey::new("s3-06/maze", seed).stream("layout");
    let goal = rng.random_range(0..cfg.width * cfg.height);
    let mut env = GridMaze::generate(cfg.width, cfg.height, cfg.loop_density, goal, &mut rng)?;
    env.start_region = (0..env.n_cells()).filter(|&c| c != goal).collect();
    Ok(env)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    /// `(rewarded episodes so far, overall success)`, starting at t=0.
    pub curve: Vec<(usize, f64)>,
    pub explored_states: usize,
}

impl Cell {
    pub fn t0(&self) -> f64 {
        self.curve.first().map_or(f64::NAN, |c| c.1)
    }
}

fn curve_point(env: &GridMaze, q: &QTable, k: usize) -> (usize, f64) {
    (k, evaluate_regions(env, q).overall)
}

fn run_dyna(cfg: &Config, env: &GridMaze, key: &RngKey) -> Cell {
    let td = TdParams { epsilon: cfg.explore_epsilon, ..cfg.agent.td.clone() };
    let mut agent = DynaAgent::new(env.n_cells(), td);
    let mut rng = key.stream("explore");
    let latent = EpisodeSpec { goal_active: false, ..EpisodeSpec::default() };
    let planning = cfg.replay.rollouts * cfg.replay.horizon / (cfg.explore_episodes * env.step_cap()).max(1);
    let mut seen = std::collections::BTreeSet::new();
    for _ in 0..cfg.explore_episodes {
        let start = env.start_region[rng.random_range(0..env.start_region.len())];
        let log = agent.episode(env, start, &latent, planning, &mut rng);
        seen.extend(log.states);
    }
    let explored = seen.len();
    agent.reveal_goal(env.goal(), RewardSpec::default().goal);
    // Offline planning matched to the phasor replay budget.
    agent.plan(cfg.replay.rollouts * cfg.replay.horizon, &mut key.stream("offline"));
    let mut curve = vec![curve_point(env, &agent.q, 0)];
    agent.params.epsilon = cfg.rewarded_epsilon;
    for k in 1..=cfg.rewarded_episodes {
        let start = env.start_region[rng.random_range(0..env.start_region.len())];
        agent.episode(env, start, &EpisodeSpec::default(), 0, &mut rng);
        if k % cfg.eval_every == 0 {
            curve.push(curve_point(env, &agent.q, k));
        }
    }
    Cell { curve, explored_states: explored }
}

pub struct S306;

impl Experiment for S306 {
    type Config = Config;
    type Output = Cell;
    type Summary = Summary;

    const ID: &'static str = "s3-06";
    const CLAIM: &'static str = "after unrewarded exploration, REM replay gives immediate competence when a goal appears";
    const MODULES: &'static [&'static str] = &["agent-env", "sleep-scheduler", "intrinsic-progress"];

    fn config(profile: Profile) -> Config {
        Config {
            seeds: (0..if profile == Profile::Fast { 20 } else { 50 }).collect(),
            width: 8,
            height: 8,
            loop_density: 0.1,
            explore_episodes: 80,
            explore_epsilon: 0.3,
            agent: AgentConfig { code_dim: 64, ..AgentConfig::default() },
            replay: ReplayConfig {
                rollouts: 500,
                horizon: 20,
                ..ReplayConfig::default()
            },
            nrem: Homeostasis::AdaptivePhaseNoise { percentile: 50.0, noise_scale: 0.5 },
            rewarded_episodes: 20,
            eval_every: 5,
            rewarded_epsilon: 0.1,
        }
    }

    fn cells(cfg: &Config) -> Vec<CellKey> {
        grid(CONDITIONS, &cfg.seeds)
    }

    fn run_cell(cfg: &Config, key: &CellKey) -> phasor_core::Result<Cell> {
        let env = maze(cfg, key.seed)?;
        let rng = RngKey::new(S306::ID, key.seed);
        if key.condition == "dyna_q" {
            return Ok(run_dyna(cfg, &env, &rng));
        }
        let random = key.condition == "random_wake";
        let agent_cfg = AgentConfig { intrinsic: !random, ..cfg.agent.clone() };
        let mut agent = PhasorAgent::new(env.n_cells(), agent_cfg, &rng)?;
        let mut explore = rng.stream("explore");
        let latent = EpisodeSpec { goal_active: false, ..EpisodeSpec::default() };
        let epsilon = if random { 1.0 } else { cfg.explore_epsilon };
        for _ in 0..cfg.explore_episodes {
            let start = env.start_region[explore.random_range(0..env.start_region.len())];
            wake_episode(&env, &mut agent, start, &latent, epsilon, &mut explore)?;
        }
        let explored = agent.model.known_states().len();
        agent.model.set_reward(env.goal(), RewardSpec::default().goal, true);

        let mut offline = rng.stream("offline");
        let replay = |sampling, scramble| ReplayConfig { sampling, scramble, ..cfg.replay.clone() };
        match key.condition.as_str() {
            "random_wake" | "intrinsic_wake" => {}
            "nrem" => agent.model.consolidate(&cfg.nrem, &mut offline)?,
            "rem" => {
                rem_replay(&mut agent.model, &replay(DreamSampling::Model, false), &mut offline)?;
            }
            "wedged" => {
                // NREM → REM → NREM, same REM budget.
                agent.model.consolidate(&cfg.nrem, &mut offline)?;
                rem_replay(&mut agent.model, &replay(DreamSampling::Model, false), &mut offline)?;
                agent.model.consolidate(&cfg.nrem, &mut offline)?;
            }
            "random_replay" => {
                rem_replay(&mut agent.model, &replay(DreamSampling::Random, false), &mut offline)?;
            }
            "scramble" => {
                rem_replay(&mut agent.model, &replay(DreamSampling::Model, true), &mut offline)?;
            }
            other => return Err(phasor_core::Error::InvalidInput(format!("unknown condition {other}"))),
        }

        let mut curve = vec![curve_point(&env, &agent.model.q, 0)];
        for k in 1..=cfg.rewarded_episodes {
            let start = env.start_region[explore.random_range(0..env.start_region.len())];
            wake_episode(&env, &mut agent, start, &EpisodeSpec::default(), cfg.rewarded_epsilon, &mut explore)?;
            if k % cfg.eval_every == 0 {
                curve.push(curve_point(&env, &agent.model.q, k));
            }
        }
        Ok(Cell { curve, explored_states: explored })
    }

    fn metrics(out: &Cell) -> Table {
        let mut t = Table::new(["rewarded_episodes", "success"]);
        for &(k, s) in &out.curve {
            t.push(vec![k.to_string(), f(s)]);
        }
        t
    }

    fn summarize(_cfg: &Config, cells: &[(CellKey, &Cell)]) -> Summary {
        let conditions = CONDITIONS
            .iter()
            .map(|&c| {
                let of: Vec<&Cell> = cells.iter().filter(|(k, _)| k.condition == c).map(|(_, o)| *o).collect();
                let points = of.first().map_or(0, |o| o.curve.len());
                let curve = (0..points)
                    .map(|i| (of[0].curve[i].0, mean(&of.iter().filter_map(|o| o.curve.get(i).map(|p| p.1)).collect::<Vec<_>>())))
                    .collect();
                ConditionStats {
                    condition: c.to_string(),
                    t0: mean(&of.iter().map(|o| o.t0()).collect::<Vec<_>>()),
                    curve,
                    explored_states: mean(&of.iter().map(|o| o.explored_states as f64).collect::<Vec<_>>()),
                    runs: of.len(),
                }
            })
            .collect();
        Summary { conditions }
    }

    fn summary_table(s: &Summary) -> Table {
        let mut t = Table::new(["condition", "rewarded_episodes", "success", "explored_states", "runs"]);
        for c in &s.conditions {
            for &(k, v) in &c.curve {
                t.push(vec![c.condition.clone(), k.to_string(), f(v), f(c.explored_states), c.runs.to_string()]);
            }
        }
        t
    }

    fn plot(_s: &Summary) -> PlotSpec {
        PlotSpec::new("line", "rewarded_episodes", "success", "Success after reward onset").series("condition")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionStats {
    pub condition: String,
    pub t0: f64,
    pub curve: Vec<(usize, f64)>,
    pub explored_states: f64,
    pub runs: usize,
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
