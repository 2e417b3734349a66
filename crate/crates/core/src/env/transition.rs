//! Holographic transition model and REM dream replay.
//!
//! Each action owns a complex matrix `W_a = (1/d) Σ x_{s'} x_sᴴ` over the
//! experienced transitions. Prediction reconstructs the next-state code
//! from the field `W_a x_s` and decodes it against the known codes.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::codebook::StateCodebook;
use super::maze::ACTIONS;
use super::qlearn::QTable;
use crate::error::{Error, Result};
use crate::graph::{gated_node_field, Kernel};
use crate::phase::{self, AMPLITUDE_EPS};
use crate::plasticity::{homeostasis_group, Homeostasis};
use crate::sleep::phase_scramble;

#[derive(Debug, Clone)]
pub struct TransitionModel {
    pub book: StateCodebook,
    assoc: Vec<DMatrix<Complex64>>,
    stored: Vec<bool>,
    /// Known states in order of first visit.
    known: Vec<usize>,
    is_known: Vec<bool>,
    rewards: Vec<Option<(f64, bool)>>,
    pub q: QTable,
    pub kernel: Kernel,
    pub beta_coh: f64,
    pub similarity_floor: f64,
    pub default_reward: f64,
}

/// A decoded prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub state: usize,
    pub similarity: f64,
}

impl TransitionModel {
    pub fn new(book: StateCodebook, similarity_floor: f64, default_reward: f64) -> Self {
        let (n, d) = (book.states(), book.dim());
        Self {
            book,
            assoc: vec![DMatrix::zeros(d, d); ACTIONS],
            stored: vec![false; n * ACTIONS],
            known: Vec::new(),
            is_known: vec![false; n],
            rewards: vec![None; n],
            q: QTable::new(n),
            kernel: Kernel::GateRotate,
            beta_coh: 3.0,
            similarity_floor,
            default_reward,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.known.is_empty()
    }

    pub fn known_states(&self) -> &[usize] {
        &self.known
    }

    pub fn transitions_stored(&self) -> usize {
        self.stored.iter().filter(|&&s| s).count()
    }

    pub fn has_transition(&self, s: usize, a: usize) -> bool {
        self.stored[s * ACTIONS + a]
    }

    pub fn association(&self, a: usize) -> &DMatrix<Complex64> {
        &self.assoc[a]
    }

    fn mark_known(&mut self, s: usize) {
        if !self.is_known[s] {
            self.is_known[s] = true;
            self.known.push(s);
        }
    }

    /// Records an experienced transition; each `(s, a)` is superposed once.
    pub fn observe(&mut self, s: usize, a: usize, next: usize, reward: f64, terminal: bool) {
        self.mark_known(s);
        self.mark_known(next);
        self.rewards[next] = Some((reward, terminal));
        let k = s * ACTIONS + a;
        if self.stored[k] {
            return;
        }
        self.stored[k] = true;
        let d = self.book.dim();
        let scale = 1.0 / d as f64;
        let (xs, xn) = (self.book.code(s).to_vec(), self.book.code(next).to_vec());
        let w = &mut self.assoc[a];
        for i in 0..d {
            let xi = xn[i] * scale;
            for j in 0..d {
                w[(i, j)] += xi * xs[j].conj();
            }
        }
    }

    /// Sets the remembered outcome of arriving in `state`.
    pub fn set_reward(&mut self, state: usize, reward: f64, terminal: bool) {
        self.mark_known(state);
        self.rewards[state] = Some((reward, terminal));
    }

    pub fn outcome(&self, state: usize) -> (f64, bool) {
        self.rewards[state].unwrap_or((self.default_reward, false))
    }

    /// Unit-phasor reconstruction of the successor code.
    pub fn reconstruct(&self, s: usize, a: usize) -> Vec<Complex64> {
        let x = self.book.code(s);
        let w = &self.assoc[a];
        let d = x.len();
        let field: Vec<Complex64> = match self.kernel {
            // Gate+rotate keeps the raw field phase, so only Σ is needed.
            Kernel::GateRotate | Kernel::Diffusive => {
                let mut acc = vec![Complex64::new(0.0, 0.0); d];
                for (j, &xj) in x.iter().enumerate() {
                    for (f, &wij) in acc.iter_mut().zip(w.column(j).iter()) {
                        *f += wij * xj;
                    }
                }
                acc
            }
            Kernel::GateOnly => {
                let mut scratch = Vec::with_capacity(d);
                (0..d)
                    .map(|i| {
                        scratch.clear();
                        scratch.extend((0..d).map(|j| w[(i, j)] * x[j]));
                        gated_node_field(&scratch, Kernel::GateOnly, self.beta_coh).unwrap_or_default()
                    })
                    .collect()
            }
        };
        field
            .into_iter()
            .map(|f| if f.norm() < AMPLITUDE_EPS { Complex64::new(0.0, 0.0) } else { f / f.norm() })
            .collect()
    }

    /// Best-matching known state and its overlap.
    pub fn decode(&self, z: &[Complex64]) -> Option<Prediction> {
        // Same value as `holo::overlap`, with the state normalised once.
        let unit: Vec<Complex64> = z.iter().map(|v| if v.norm() < AMPLITUDE_EPS { Complex64::new(0.0, 0.0) } else { v / v.norm() }).collect();
        let count = unit.iter().filter(|v| v.norm_sqr() > 0.0).count();
        if count == 0 {
            return None;
        }
        self.known
            .iter()
            .map(|&s| {
                let dot: Complex64 = unit.iter().zip(self.book.code(s)).map(|(u, x)| u * x.conj()).sum();
                Prediction {
                    state: s,
                    similarity: (dot.norm() / count as f64).min(1.0),
                }
            })
            .fold(None, |best: Option<Prediction>, p| match best {
                Some(b) if b.similarity >= p.similarity => Some(b),
                _ => Some(p),
            })
    }

    /// Reconstruct and decode; `None` below the similarity floor.
    pub fn predict(&self, s: usize, a: usize) -> Option<Prediction> {
        self.decode(&self.reconstruct(s, a)).filter(|p| p.similarity >= self.similarity_floor)
    }

    /// Homeostasis applied per action matrix.
    pub fn consolidate<R: Rng + ?Sized>(&mut self, mode: &Homeostasis, rng: &mut R) -> Result<()> {
        for w in self.assoc.iter_mut() {
            homeostasis_group(w.as_mut_slice(), mode, rng)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DreamSampling {
    /// Start states from the model, actions uniform.
    #[default]
    Model,
    /// Both endpoints drawn uniformly from known states (no model content).
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayConfig {
    pub rollouts: usize,
    pub horizon: usize,
    /// Phase noise added to reconstructions.
    pub perturbation: f64,
    /// Probability of starting from the older half of known states.
    pub old_bias: f64,
    /// When false, dreams run but nothing is written.
    pub gate: bool,
    pub scramble: bool,
    pub sampling: DreamSampling,
    pub alpha: f64,
    pub gamma: f64,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        Self {
            rollouts: 50,
            horizon: 15,
            perturbation: 0.2,
            old_bias: 0.0,
            gate: true,
            scramble: false,
            sampling: DreamSampling::Model,
            alpha: 0.5,
            gamma: 0.95,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ReplayStats {
    pub rollouts: usize,
    pub transitions: usize,
    pub truncated: usize,
    pub updates: usize,
}

/// Dreamed rollouts through the transition model with TD value updates.
///
/// Takes no environment: everything comes from the model's internal state.
/// Per dreamed step: reconstruct, check the floor, optionally scramble,
/// decode, then update values when the gate is on.
pub fn rem_replay<R: Rng + ?Sized>(model: &mut TransitionModel, cfg: &ReplayConfig, rng: &mut R) -> Result<ReplayStats> {
    let mut stats = ReplayStats::default();
    if cfg.rollouts == 0 {
        return Ok(stats);
    }
    if model.is_empty() {
        return Err(Error::InvalidInput("replay needs a non-empty model".into()));
    }
    let noise = Normal::new(0.0, cfg.perturbation.max(0.0)).map_err(|e| Error::param("perturbation", e.to_string()))?;
    let known = model.known_states().to_vec();
    let older = known.len().div_ceil(2);
    for _ in 0..cfg.rollouts {
        stats.rollouts += 1;
        let mut s = if rng.random::<f64>() < cfg.old_bias {
            known[rng.random_range(0..older)]
        } else {
            known[rng.random_range(0..known.len())]
        };
        for _ in 0..cfg.horizon {
            let a = rng.random_range(0..ACTIONS);
            let next = match cfg.sampling {
                DreamSampling::Random => known[rng.random_range(0..known.len())],
                DreamSampling::Model => {
                    let mut z = model.reconstruct(s, a);
                    if cfg.perturbation > 0.0 {
                        for v in z.iter_mut() {
                            *v *= phase::unit(noise.sample(rng));
                        }
                    }
                    let decoded = match model.decode(&z) {
                        Some(p) if p.similarity >= model.similarity_floor => p.state,
                        _ => {
                            stats.truncated += 1;
                            break;
                        }
                    };
                    if cfg.scramble {
                        phase_scramble(&mut z, rng);
                        match model.decode(&z) {
                            Some(p) => p.state,
                            None => break,
                        }
                    } else {
                        decoded
                    }
                }
            };
            stats.transitions += 1;
            let (r, terminal) = model.outcome(next);
            if cfg.gate {
                model.q.td_update(s, a, r, next, terminal, cfg.alpha, cfg.gamma);
                stats.updates += 1;
            }
            if terminal {
                break;
            }
            s = next;
        }
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::maze::GridMaze;
    use crate::rng::stream_rng;

    fn trained(seed: u64) -> (GridMaze, TransitionModel) {
        let env = GridMaze::generate(6, 6, 0.2, 35, &mut stream_rng("tm", seed, "maze")).unwrap();
        let book = StateCodebook::new(env.n_cells(), 128, &mut stream_rng("tm", seed, "book"));
        let mut model = TransitionModel::new(book, 0.3, -0.01);
        for s in 0..env.n_cells() {
            for a in 0..ACTIONS {
                let next = env.step(s, a);
                let terminal = next == env.goal();
                model.observe(s, a, next, if terminal { 1.0 } else { -0.01 }, terminal);
            }
        }
        (env, model)
    }

    #[test]
    fn predictions_match_the_environment() {
        let (env, model) = trained(0);
        let correct = (0..env.n_cells())
            .flat_map(|s| (0..ACTIONS).map(move |a| (s, a)))
            .filter(|&(s, a)| model.predict(s, a).map(|p| p.state) == Some(env.step(s, a)))
            .count();
        assert_eq!(correct, env.n_cells() * ACTIONS);
    }

    #[test]
    fn decode_similarity_matches_overlap() {
        let (env, model) = trained(5);
        for s in [0, 7, env.n_cells() - 1] {
            let z = model.reconstruct(s, 2);
            let p = model.decode(&z).unwrap();
            let want = crate::holo::overlap(&z, model.book.code(p.state)).unwrap();
            assert!((p.similarity - want).abs() < 1e-12);
        }
    }

    #[test]
    fn unseen_transitions_fall_below_floor() {
        let book = StateCodebook::new(10, 128, &mut stream_rng("tm", 1, "book"));
        let mut model = TransitionModel::new(book, 0.3, -0.01);
        model.observe(0, 1, 1, -0.01, false);
        assert!(model.predict(0, 1).is_some());
        assert!(model.predict(0, 2).is_none());
    }

    #[test]
    fn gate_off_and_zero_rollouts_are_identity() {
        let (_, mut model) = trained(2);
        model.q.td_update(3, 1, 0.7, 4, false, 1.0, 0.9);
        let before = model.q.clone();
        let off = ReplayConfig { gate: false, ..ReplayConfig::default() };
        let stats = rem_replay(&mut model, &off, &mut stream_rng("tm", 2, "r")).unwrap();
        assert!(stats.transitions > 0 && stats.updates == 0);
        assert_eq!(model.q, before);
        let none = ReplayConfig { rollouts: 0, ..ReplayConfig::default() };
        assert_eq!(rem_replay(&mut model, &none, &mut stream_rng("tm", 2, "r")).unwrap(), ReplayStats::default());
        assert_eq!(model.q, before);
    }

    #[test]
    fn replay_propagates_goal_value() {
        let (env, mut model) = trained(3);
        let cfg = ReplayConfig { rollouts: 3000, horizon: 20, ..ReplayConfig::default() };
        rem_replay(&mut model, &cfg, &mut stream_rng("tm", 3, "r")).unwrap();
        let dist = env.distances_to_goal();
        let solved = (0..env.n_cells())
            .filter(|&s| s != env.goal())
            .filter(|&s| {
                let mut c = s;
                for _ in 0..env.step_cap() {
                    c = env.step(c, model.q.greedy(c));
                    if c == env.goal() {
                        return true;
                    }
                }
                false
            })
            .count();
        assert!(solved as f64 >= 0.9 * (env.n_cells() - 1) as f64, "solved {solved}");
        assert!(dist.iter().all(Option::is_some));
    }

    #[test]
    fn old_bias_draws_from_early_states() {
        let book = StateCodebook::new(20, 64, &mut stream_rng("tm", 4, "book"));
        let mut model = TransitionModel::new(book, 0.3, 0.0);
        for s in 0..19 {
            model.observe(s, 1, s + 1, -1.0, false);
        }
        let cfg = ReplayConfig { rollouts: 200, horizon: 1, old_bias: 1.0, perturbation: 0.0, ..ReplayConfig::default() };
        rem_replay(&mut model, &cfg, &mut stream_rng("tm", 4, "r")).unwrap();
        // Only starts in the older half can have been updated.
        for s in 10..20 {
            assert_eq!(model.q.row(s), &[0.0; 4]);
        }
    }
}
