//! Greedy evaluation split by maze region.

use serde::{Deserialize, Serialize};

use super::maze::GridMaze;
use super::qlearn::QTable;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RegionSuccess {
    pub seen: f64,
    pub unseen: f64,
    pub overall: f64,
    pub mean_steps: f64,
}

/// Follows the greedy policy from `start`; `Some(steps)` on reaching the goal
/// within the step cap.
pub fn greedy_rollout(env: &GridMaze, q: &QTable, start: usize) -> Option<usize> {
    let mut s = start;
    for t in 0..env.step_cap() {
        if s == env.goal() {
            return Some(t);
        }
        s = env.step(s, q.greedy(s));
    }
    (s == env.goal()).then_some(env.step_cap())
}

/// Greedy success over every non-goal cell, split into seen / unseen starts.
pub fn evaluate_regions(env: &GridMaze, q: &QTable) -> RegionSuccess {
    let (mut hit, mut tot) = ([0usize; 2], [0usize; 2]);
    let mut steps = Vec::new();
    for s in (0..env.n_cells()).filter(|&s| s != env.goal()) {
        let region = usize::from(!env.is_seen(s));
        tot[region] += 1;
        if let Some(t) = greedy_rollout(env, q, s) {
            hit[region] += 1;
            steps.push(t as f64);
        }
    }
    let frac = |h: usize, t: usize| if t == 0 { 0.0 } else { h as f64 / t as f64 };
    RegionSuccess {
        seen: frac(hit[0], tot[0]),
        unseen: frac(hit[1], tot[1]),
        overall: frac(hit[0] + hit[1], tot[0] + tot[1]),
        mean_steps: if steps.is_empty() { f64::NAN } else { steps.iter().sum::<f64>() / steps.len() as f64 },
    }
}

/// Greedy success from an explicit list of starts.
pub fn success_from(env: &GridMaze, q: &QTable, starts: &[usize]) -> f64 {
    if starts.is_empty() {
        return 0.0;
    }
    starts.iter().filter(|&&s| greedy_rollout(env, q, s).is_some()).count() as f64 / starts.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_table_fails_everywhere_but_adjacent_up_moves() {
        // Lowest-index tie break always chooses "up".
        let env = GridMaze::open(3, 3, 1).unwrap();
        let q = QTable::new(9);
        assert_eq!(greedy_rollout(&env, &q, 4), Some(1));
        assert_eq!(greedy_rollout(&env, &q, 0), None);
    }

    #[test]
    fn oracle_policy_succeeds_everywhere() {
        let env = GridMaze::open(4, 4, 15).unwrap();
        let mut q = QTable::new(16);
        for s in 0..16 {
            q.td_update(s, env.oracle_action(s), 1.0, s, true, 1.0, 0.0);
        }
        let r = evaluate_regions(&env, &q);
        assert_eq!(r.overall, 1.0);
        assert_eq!(r.seen, 1.0);
        assert_eq!(r.unseen, 1.0);
    }
}
