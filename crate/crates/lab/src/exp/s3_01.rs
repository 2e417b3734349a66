//! Holographic recall from partial cues: diffusive vs coherence-gated
//! kernels on the same stored patterns, cues and jitter.

use phasor_core::graph::Kernel;
use phasor_core::holo::capacity::random_bits;
use phasor_core::holo::{recall, Cue, HoloMemory, RecallConfig, StoreOptions};
use phasor_core::rng::RngKey;
use phasor_core::Complex64;
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
    pub n: usize,
    pub patterns: usize,
    pub cue_fraction: f64,
    pub jitters: Vec<f64>,
    pub trials: usize,
    pub kernels: Vec<Kernel>,
    pub store: StoreOptions,
    pub recall: RecallConfig,
}

impl ExperimentConfig for Config {
    fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    fn validate(&self) -> LabResult<()> {
        check_seeds(&self.seeds)?;
        ensure(self.n >= 2, "n", "need at least 2 nodes")?;
        ensure(self.patterns >= 1, "patterns", "must store at least one pattern")?;
        ensure(self.cue_fraction > 0.0 && self.cue_fraction <= 1.0, "cue_fraction", "must be in (0, 1]")?;
        ensure(!self.jitters.is_empty() && self.jitters.iter().all(|s| *s >= 0.0), "jitters", "must be non-empty and non-negative")?;
        ensure(self.trials >= 1, "trials", "must be positive")?;
        ensure(!self.kernels.is_empty(), "kernels", "must be non-empty")?;
        ensure(self.recall.beta_coh > 0.0, "recall.beta_coh", "must be positive")?;
        ensure(self.recall.dt > 0.0, "recall.dt", "must be positive")?;
        ensure(self.recall.max_steps >= 1, "recall.max_steps", "must be positive")
    }
}

pub fn kernel_name(k: Kernel) -> &'static str {
    match k {
        Kernel::Diffusive => "diffusive",
        Kernel::GateOnly => "gate_only",
        Kernel::GateRotate => "gate_rotate",
    }
}

fn condition(k: Kernel, sigma: f64) -> String {
    format!("{}@{sigma:.2}", kernel_name(k))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialResult {
    pub overlap: f64,
    pub phase_rmse: f64,
    pub aligned_rmse: f64,
    pub success: bool,
    pub converged: bool,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub kernel: Kernel,
    pub jitter: f64,
    pub trials: Vec<TrialResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub kernel: String,
    pub jitter: f64,
    pub success_rate: f64,
    pub mean_overlap: f64,
    pub mean_rmse: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub rows: Vec<Row>,
}

impl Summary {
    pub fn success(&self, k: Kernel, jitter: f64) -> f64 {
        self.rows
            .iter()
            .find(|r| r.kernel == kernel_name(k) && (r.jitter - jitter).abs() < 1e-12)
            .map_or(f64::NAN, |r| r.success_rate)
    }
}

pub struct S301;

fn bipolar(bits: &[f64]) -> Vec<Complex64> {
    bits.iter().map(|&b| Complex64::new(b, 0.0)).collect()
}

impl Experiment for S301 {
    type Config = Config;
    type Output = Cell;
    type Summary = Summary;

    const ID: &'static str = "s3-01";
    const CLAIM: &'static str = "gate+rotate retrieval recalls stored phase patterns from partial cues far more often than the diffusive kernel";
    const MODULES: &'static [&'static str] = &["holo-memory", "phasor-graph"];

    fn config(profile: Profile) -> Config {
        Config {
            seeds: (0..if profile == Profile::Fast { 3 } else { 10 }).collect(),
            n: 64,
            patterns: 6,
            cue_fraction: 0.3,
            jitters: if profile == Profile::Fast { vec![0.3] } else { vec![0.1, 0.2, 0.3, 0.5, 0.8] },
            trials: 20,
            kernels: vec![Kernel::Diffusive, Kernel::GateOnly, Kernel::GateRotate],
            store: StoreOptions {
                centering: false,
                zero_diagonal: true,
            },
            recall: RecallConfig {
                kappa: 0.235,
                ..RecallConfig::default()
            },
        }
    }

    fn cells(cfg: &Config) -> Vec<CellKey> {
        let conds: Vec<String> = cfg.kernels.iter().flat_map(|&k| cfg.jitters.iter().map(move |&s| condition(k, s))).collect();
        grid(conds, &cfg.seeds)
    }

    fn run_cell(cfg: &Config, key: &CellKey) -> phasor_core::Result<Cell> {
        let (kernel, jitter) = cfg
            .kernels
            .iter()
            .flat_map(|&k| cfg.jitters.iter().map(move |&s| (k, s)))
            .find(|&(k, s)| condition(k, s) == key.condition)
            .expect("cell from grid");
        let root = RngKey::new(S301::ID, key.seed);
        // Patterns, cues and per-trial noise are shared by every kernel.
        let mut prng = root.stream("patterns");
        let patterns: Vec<Vec<Complex64>> = (0..cfg.patterns).map(|_| bipolar(&random_bits(cfg.n, &mut prng))).collect();
        let mut memory = HoloMemory::new(cfg.n, cfg.store);
        memory.store(&patterns)?;
        let mut crng = root.stream("cues");
        let rcfg = RecallConfig { kernel, ..cfg.recall.clone() };
        let trials = (0..cfg.trials)
            .map(|t| {
                let target = &patterns[t % cfg.patterns];
                let cue = Cue::from_pattern(target, cfg.cue_fraction, &mut crng)?;
                let mut trng = root.child(format!("trial-{t}")).stream(format!("jitter-{jitter:.4}"));
                let out = recall(&memory, &cue, target, jitter, &rcfg, &mut trng)?;
                let m = out.metrics;
                Ok(TrialResult {
                    overlap: m.overlap,
                    phase_rmse: m.phase_rmse,
                    aligned_rmse: m.aligned_rmse,
                    success: m.success,
                    converged: m.converged,
                    steps: m.steps,
                })
            })
            .collect::<phasor_core::Result<Vec<_>>>()?;
        Ok(Cell { kernel, jitter, trials })
    }

    fn metrics(out: &Cell) -> Table {
        let mut t = Table::new(["trial", "overlap", "phase_rmse", "aligned_rmse", "success", "converged", "steps"]);
        for (i, r) in out.trials.iter().enumerate() {
            t.push(vec![
                i.to_string(),
                f(r.overlap),
                f(r.phase_rmse),
                f(r.aligned_rmse),
                r.success.to_string(),
                r.converged.to_string(),
                r.steps.to_string(),
            ]);
        }
        t
    }

    fn summarize(cfg: &Config, cells: &[(CellKey, &Cell)]) -> Summary {
        let mut rows = Vec::new();
        for &k in &cfg.kernels {
            for &s in &cfg.jitters {
                let trials: Vec<TrialResult> = cells
                    .iter()
                    .filter(|(_, c)| c.kernel == k && c.jitter == s)
                    .flat_map(|(_, c)| c.trials.iter().copied())
                    .collect();
                rows.push(Row {
                    kernel: kernel_name(k).into(),
                    jitter: s,
                    success_rate: mean(&trials.iter().map(|t| f64::from(u8::from(t.success))).collect::<Vec<_>>()),
                    mean_overlap: mean(&trials.iter().map(|t| t.overlap).collect::<Vec<_>>()),
                    mean_rmse: mean(&trials.iter().map(|t| t.phase_rmse).collect::<Vec<_>>()),
                    trials: trials.len(),
                });
            }
        }
        Summary { rows }
    }

    fn summary_table(s: &Summary) -> Table {
        let mut t = Table::new(["kernel", "jitter", "success_rate", "mean_overlap", "mean_rmse", "trials"]);
        for r in &s.rows {
            t.push(vec![r.kernel.clone(), f(r.jitter), f(r.success_rate), f(r.mean_overlap), f(r.mean_rmse), r.trials.to_string()]);
        }
        t
    }

    fn plot(_s: &Summary) -> PlotSpec {
        PlotSpec::new("line", "jitter", "success_rate", "Recall success by kernel").series("kernel")
    }
}
