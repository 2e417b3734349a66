//! Grid-maze environment, value learning and sleep-replay agents.

pub mod agent;
pub mod codebook;
pub mod eval;
pub mod maze;
pub mod qlearn;
pub mod readout;
pub mod transition;

pub use agent::{wake_episode, AgentConfig, PhasorAgent};
pub use codebook::{encode_observation, EncodingParams, StateCodebook};
pub use eval::{evaluate_regions, greedy_rollout, success_from, RegionSuccess};
pub use maze::{GridMaze, RewardSpec, ACTIONS};
pub use qlearn::{dyna_q, DynaAgent, DynaConfig, EpisodeLog, EpisodeSpec, QTable, TdParams};
pub use transition::{rem_replay, DreamSampling, ReplayConfig, ReplayStats, TransitionModel};
