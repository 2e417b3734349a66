//! REM replay in procedural mazes with myopic experience: wake episodes
//! start only in the seen columns, evaluation covers the whole maze.

use phasor_core::env::{
    dyna_q, evaluate_regions, rem_replay, wake_episode, AgentConfig, DynaConfig, EpisodeSpec, GridMaze, PhasorAgent, RegionSuccess,
    ReplayConfig, TdParams,
};
use phasor_core::rng::RngKey;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::artifact::{f, PlotSpec, Table};
use crate::config::Profile;
use crate::error::LabResult;
use crate::experiment::{check_seeds, ensure, grid, CellKey, Experiment, ExperimentConfig};
use crate::stats::mean;

pub const CONDITIONS: [&str; 6] = ["wake", "idle", "rem", "rem_gate_off", "rem_scramble", "dyna_q"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Run ids; run `s` uses maze `s % mazes`.
    pub seeds: Vec<u64>,
    pub mazes: u64,
    pub width: usize,
    pub height: usize,
    pub seen_cols: usize,
    pub loop_density: f64,
    pub wake_episodes: usize,
    pub epsilon: f64,
    pub agent: AgentConfig,
    pub replay: ReplayConfig,
    pub dyna_planning: usize,
}

impl ExperimentConfig for Config {
    fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    fn validate(&self) -> LabResult<()> {
        check_seeds(&self.seeds)?;
        ensure(self.mazes > 0, "mazes", "need at least one maze")?;
        ensure(self.width >= 2 && self.height >= 1, "width", "maze too small")?;
        ensure(self.seen_cols > 0 && self.seen_cols < self.width, "seen_cols", "must split the maze")?;
        ensure((0.0..=1.0).contains(&self.loop_density), "loop_density", "must be in [0, 1]")?;
        ensure((0.0..=1.0).contains(&self.epsilon), "epsilon", "must be in [0, 1]")?;
        ensure(self.wake_episodes > 0, "wake_episodes", "must be positive")
    }
}

/// The maze for run `seed`, with its goal in the unseen columns.
pub fn maze(cfg: &Config, seed: u64) -> phasor_core::Result<GridMaze> {
    let mut rng = RngKey::new("s3-04/maze", seed % cfg.mazes).stream("layout");
    let gx = rng.random_range(cfg.seen_cols..cfg.width);
    let gy = rng.random_range(0..cfg.height);
    let mut env = GridMaze::generate(cfg.width, cfg.height, cfg.loop_density, gy * cfg.width + gx, &mut rng)?;
    env.set_seen_cols(cfg.seen_cols);
    env.start_region = (0..env.n_cells()).filter(|&c| env.is_seen(c)).collect();
    Ok(env)
}

fn wake_agent(cfg: &Config, env: &GridMaze, key: &RngKey) -> phasor_core::Result<PhasorAgent> {
    let mut agent = PhasorAgent::new(env.n_cells(), cfg.agent.clone(), key)?;
    let mut rng = key.stream("wake");
    let spec = EpisodeSpec::default();
    for _ in 0..cfg.wake_episodes {
        let start = env.start_region[rng.random_range(0..env.start_region.len())];
        wake_episode(env, &mut agent, start, &spec, cfg.epsilon, &mut rng)?;
    }
    Ok(agent)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub success: RegionSuccess,
    pub offline_steps: usize,
    pub updates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionStats {
    pub condition: String,
    pub seen: f64,
    pub unseen: f64,
    pub overall: f64,
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

pub struct S304;

impl Experiment for S304 {
    type Config = Config;
    type Output = Cell;
    type Summary = Summary;

    const ID: &'static str = "s3-04";
    const CLAIM: &'static str = "REM rollouts from the transition model improve maze success without new experience";
    const MODULES: &'static [&'static str] = &["agent-env", "sleep-scheduler"];

    fn config(profile: Profile) -> Config {
        let (mazes, per) = if profile == Profile::Fast { (10, 6) } else { (25, 16) };
        Config {
            seeds: (0..mazes * per).collect(),
            mazes,
            width: 8,
            height: 8,
            seen_cols: 4,
            loop_density: 0.1,
            wake_episodes: 100,
            epsilon: 0.3,
            agent: AgentConfig { code_dim: 64, ..AgentConfig::default() },
            replay: ReplayConfig {
                rollouts: 500,
                horizon: 20,
                ..ReplayConfig::default()
            },
            dyna_planning: 10,
        }
    }

    fn cells(cfg: &Config) -> Vec<CellKey> {
        grid(CONDITIONS, &cfg.seeds)
    }

    fn run_cell(cfg: &Config, key: &CellKey) -> phasor_core::Result<Cell> {
        let env = maze(cfg, key.seed)?;
        let rng = RngKey::new(S304::ID, key.seed);
        let budget = cfg.replay.rollouts * cfg.replay.horizon;
        if key.condition == "dyna_q" {
            let dcfg = DynaConfig {
                episodes: cfg.wake_episodes,
                planning_steps: cfg.dyna_planning,
                td: TdParams { epsilon: cfg.epsilon, ..cfg.agent.td.clone() },
            };
            let (agent, _) = dyna_q(&env, &env.start_region, &dcfg, &EpisodeSpec::default(), &mut rng.stream("wake"));
            return Ok(Cell {
                success: evaluate_regions(&env, &agent.q),
                offline_steps: 0,
                updates: cfg.wake_episodes * cfg.dyna_planning,
            });
        }
        let mut agent = wake_agent(cfg, &env, &rng)?;
        let mut dreams = rng.stream("offline");
        let (offline_steps, updates) = match key.condition.as_str() {
            "wake" => (0, 0),
            "idle" => {
                for _ in 0..budget {
                    agent.graph.step(None, agent.cfg.dt)?;
                }
                (budget, 0)
            }
            c => {
                let replay = ReplayConfig {
                    gate: c != "rem_gate_off",
                    scramble: c == "rem_scramble",
                    ..cfg.replay.clone()
                };
                let stats = rem_replay(&mut agent.model, &replay, &mut dreams)?;
                (stats.transitions, stats.updates)
            }
        };
        Ok(Cell {
            success: evaluate_regions(&env, &agent.model.q),
            offline_steps,
            updates,
        })
    }

    fn metrics(out: &Cell) -> Table {
        let mut t = Table::new(["seen", "unseen", "overall", "mean_steps", "offline_steps", "updates"]);
        let s = out.success;
        t.push(vec![f(s.seen), f(s.unseen), f(s.overall), f(s.mean_steps), out.offline_steps.to_string(), out.updates.to_string()]);
        t
    }

    fn summarize(_cfg: &Config, cells: &[(CellKey, &Cell)]) -> Summary {
        let conditions = CONDITIONS
            .iter()
            .map(|&c| {
                let of: Vec<RegionSuccess> = cells.iter().filter(|(k, _)| k.condition == c).map(|(_, o)| o.success).collect();
                let col = |g: fn(&RegionSuccess) -> f64| mean(&of.iter().map(g).collect::<Vec<_>>());
                ConditionStats {
                    condition: c.to_string(),
                    seen: col(|s| s.seen),
                    unseen: col(|s| s.unseen),
                    overall: col(|s| s.overall),
                    runs: of.len(),
                }
            })
            .collect();
        Summary { conditions }
    }

    fn summary_table(s: &Summary) -> Table {
        let mut t = Table::new(["condition", "seen", "unseen", "overall", "runs"]);
        for c in &s.conditions {
            t.push(vec![c.condition.clone(), f(c.seen), f(c.unseen), f(c.overall), c.runs.to_string()]);
        }
        t
    }

    fn plot(_s: &Summary) -> PlotSpec {
        PlotSpec::new("bar", "condition", "success", "Maze success by region").series("region")
    }
}
