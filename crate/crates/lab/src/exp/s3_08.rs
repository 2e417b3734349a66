//! Pattern-completion capacity of the phasor memory against a modern
//! Hopfield network and an echo-state reservoir.

use phasor_core::holo::capacity::{capacity_benchmark, reliable_capacity, Backend, CapacityConfig, CapacityRow};
use phasor_core::rng::RngKey;
use serde::{Deserialize, Serialize};

use crate::artifact::{f, Annotation, PlotSpec, Table};
use crate::config::Profile;
use crate::error::LabResult;
use crate::experiment::{check_seeds, ensure, grid, CellKey, Experiment, ExperimentConfig};
use crate::stats::mean;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seeds: Vec<u64>,
    pub backends: Vec<Backend>,
    pub benchmark: CapacityConfig,
    /// Per-backend pattern counts; the benchmark's own list is ignored.
    pub phasor_counts: Vec<usize>,
    pub mhn_counts: Vec<usize>,
    pub esn_counts: Vec<usize>,
    /// Reliable fraction a P must reach to count toward capacity.
    pub capacity_level: f64,
}

impl ExperimentConfig for Config {
    fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    fn validate(&self) -> LabResult<()> {
        check_seeds(&self.seeds)?;
        ensure(!self.backends.is_empty(), "backends", "must be non-empty")?;
        ensure(self.benchmark.n >= 2, "benchmark.n", "need at least 2 units")?;
        ensure((0.0..=0.5).contains(&self.benchmark.flip_noise), "benchmark.flip_noise", "must be in [0, 0.5]")?;
        ensure(self.benchmark.trials >= 1, "benchmark.trials", "must be positive")?;
        ensure(self.benchmark.queries_per_pattern >= 1, "benchmark.queries_per_pattern", "must be positive")?;
        for (name, c) in [("phasor_counts", &self.phasor_counts), ("mhn_counts", &self.mhn_counts), ("esn_counts", &self.esn_counts)] {
            ensure(!c.is_empty() && c.iter().all(|&p| p >= 1), name, "must be non-empty positive counts")?;
        }
        ensure(self.capacity_level > 0.0 && self.capacity_level <= 1.0, "capacity_level", "must be in (0, 1]")
    }
}

impl Config {
    fn counts(&self, b: Backend) -> &[usize] {
        match b {
            Backend::Phasor => &self.phasor_counts,
            Backend::Mhn => &self.mhn_counts,
            Backend::Esn => &self.esn_counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub backend: Backend,
    pub rows: Vec<CapacityRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Point {
    pub backend: String,
    pub p: usize,
    pub reliable_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BackendCapacity {
    pub backend: String,
    pub capacity: usize,
    pub capacity_over_n: f64,
    /// Largest expected count of reliably stored patterns, max_P P·fraction.
    pub max_reliable_patterns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub points: Vec<Point>,
    pub capacities: Vec<BackendCapacity>,
}

impl Summary {
    pub fn fraction(&self, b: Backend, p: usize) -> Option<f64> {
        self.points.iter().find(|x| x.backend == b.name() && x.p == p).map(|x| x.reliable_fraction)
    }

    pub fn capacity(&self, b: Backend) -> Option<usize> {
        self.capacities.iter().find(|c| c.backend == b.name()).map(|c| c.capacity)
    }
}

pub struct S308;

impl Experiment for S308 {
    type Config = Config;
    type Output = Cell;
    type Summary = Summary;

    const ID: &'static str = "s3-08";
    const CLAIM: &'static str = "phasor memory stores about 0.13N patterns; modern Hopfield stores N; an echo-state reservoir almost none";
    const MODULES: &'static [&'static str] = &["holo-memory"];

    fn config(profile: Profile) -> Config {
        let fast = profile == Profile::Fast;
        Config {
            seeds: (0..if fast { 4 } else { 8 }).collect(),
            backends: vec![Backend::Phasor, Backend::Mhn, Backend::Esn],
            benchmark: CapacityConfig {
                n: 64,
                trials: if fast { 2 } else { 4 },
                ..CapacityConfig::default()
            },
            phasor_counts: vec![1, 2, 4, 6, 8, 10, 12, 16],
            mhn_counts: vec![1, 8, 16, 32, 64],
            esn_counts: vec![1, 4, 8],
            capacity_level: 0.9,
        }
    }

    fn cells(cfg: &Config) -> Vec<CellKey> {
        grid(cfg.backends.iter().map(|b| b.name()), &cfg.seeds)
    }

    fn run_cell(cfg: &Config, key: &CellKey) -> phasor_core::Result<Cell> {
        let backend = *cfg.backends.iter().find(|b| b.name() == key.condition).expect("cell from grid");
        let bench = CapacityConfig {
            pattern_counts: cfg.counts(backend).to_vec(),
            ..cfg.benchmark.clone()
        };
        let mut rng = RngKey::new(S308::ID, key.seed).stream(backend.name());
        Ok(Cell {
            backend,
            rows: capacity_benchmark(backend, &bench, key.seed, &mut rng)?,
        })
    }

    fn metrics(out: &Cell) -> Table {
        let mut t = Table::new(["backend", "n", "p", "flip_noise", "reliable_fraction", "trials", "seed"]);
        for r in &out.rows {
            t.push(vec![
                r.backend.name().into(),
                r.n.to_string(),
                r.p.to_string(),
                f(r.flip_noise),
                f(r.reliable_fraction),
                r.trials.to_string(),
                r.seed.to_string(),
            ]);
        }
        t
    }

    fn summarize(cfg: &Config, cells: &[(CellKey, &Cell)]) -> Summary {
        let n = cfg.benchmark.n;
        let mut points = Vec::new();
        let mut capacities = Vec::new();
        for &b in &cfg.backends {
            let mut pooled = Vec::new();
            for &p in cfg.counts(b) {
                let fr: Vec<f64> = cells
                    .iter()
                    .filter(|(_, c)| c.backend == b)
                    .flat_map(|(_, c)| c.rows.iter().filter(|r| r.p == p).map(|r| r.reliable_fraction))
                    .collect();
                let fraction = mean(&fr);
                points.push(Point {
                    backend: b.name().into(),
                    p,
                    reliable_fraction: fraction,
                });
                pooled.push(CapacityRow {
                    backend: b,
                    n,
                    p,
                    flip_noise: cfg.benchmark.flip_noise,
                    reliable_fraction: fraction,
                    trials: fr.len() * cfg.benchmark.trials,
                    seed: 0,
                });
            }
            let capacity = reliable_capacity(&pooled, cfg.capacity_level);
            capacities.push(BackendCapacity {
                backend: b.name().into(),
                capacity,
                capacity_over_n: capacity as f64 / n as f64,
                max_reliable_patterns: pooled.iter().map(|r| r.p as f64 * r.reliable_fraction).fold(0.0, f64::max),
            });
        }
        Summary { n, points, capacities }
    }

    fn summary_table(s: &Summary) -> Table {
        let mut t = Table::new(["backend", "n", "p", "p_over_n", "reliable_fraction"]);
        for p in &s.points {
            t.push(vec![p.backend.clone(), s.n.to_string(), p.p.to_string(), f(p.p as f64 / s.n as f64), f(p.reliable_fraction)]);
        }
        t
    }

    fn plot(s: &Summary) -> PlotSpec {
        let mut p = PlotSpec::new("line", "p_over_n", "reliable_fraction", "Reliable storage vs load").series("backend");
        p.annotations.push(Annotation {
            kind: "x_line".into(),
            label: "classical Hopfield bound 0.138N".into(),
            from: 0.138,
            to: 0.138,
        });
        let _ = s;
        p
    }
}
