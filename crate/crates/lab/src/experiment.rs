//! The experiment trait, the parallel cell runner and artifact emission.

use std::marker::PhantomData;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::artifact::{self, CellRecord, Manifest, PlotSpec, Table};
use crate::config::{self, Profile};
use crate::error::{LabError, LabResult};

/// One (condition, seed) unit of work. Cells share nothing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct CellKey {
    pub condition: String,
    pub seed: u64,
}

impl CellKey {
    pub fn new(condition: impl Into<String>, seed: u64) -> Self {
        Self {
            condition: condition.into(),
            seed,
        }
    }
}

/// Crosses conditions with seeds, condition-major.
pub fn grid<S: AsRef<str>>(conditions: impl IntoIterator<Item = S>, seeds: &[u64]) -> Vec<CellKey> {
    conditions
        .into_iter()
        .flat_map(|c| seeds.iter().map(move |&s| CellKey::new(c.as_ref(), s)))
        .collect()
}

pub trait ExperimentConfig: Serialize + DeserializeOwned + Clone + Send + Sync {
    fn seeds(&self) -> &[u64];
    fn validate(&self) -> LabResult<()>;
}

pub trait Experiment: Send + Sync + 'static {
    type Config: ExperimentConfig;
    type Output: Send + Sync;
    type Summary: Serialize;

    const ID: &'static str;
    const CLAIM: &'static str;
    const MODULES: &'static [&'static str];

    fn config(profile: Profile) -> Self::Config;
    fn cells(cfg: &Self::Config) -> Vec<CellKey>;
    fn run_cell(cfg: &Self::Config, key: &CellKey) -> phasor_core::Result<Self::Output>;
    /// Per-cell metric stream.
    fn metrics(out: &Self::Output) -> Table;
    fn summarize(cfg: &Self::Config, cells: &[(CellKey, &Self::Output)]) -> Self::Summary;
    fn summary_table(summary: &Self::Summary) -> Table;
    fn plot(summary: &Self::Summary) -> PlotSpec;
}

/// A finished sweep held in memory.
pub struct Run<E: Experiment> {
    pub config: E::Config,
    pub config_hash: String,
    pub cells: Vec<(CellKey, Result<E::Output, String>)>,
    pub summary: E::Summary,
    pub wall_clock_secs: f64,
    pub workers: usize,
}

impl<E: Experiment> Run<E> {
    pub fn failed(&self) -> usize {
        self.cells.iter().filter(|(_, r)| r.is_err()).count()
    }
}

fn pool(workers: usize) -> LabResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| LabError::config("workers", e.to_string()))
}

/// Runs every cell on a bounded pool. Results come back in cell order, so
/// output is independent of the worker count.
pub fn execute<E: Experiment>(cfg: &E::Config, workers: usize) -> LabResult<Run<E>> {
    cfg.validate()?;
    let hash = config::config_hash(&serde_json::to_value(cfg)?);
    let keys = E::cells(cfg);
    let start = Instant::now();
    let cells: Vec<(CellKey, Result<E::Output, String>)> = pool(workers)?.install(|| {
        keys.into_par_iter()
            .map(|k| {
                let out = E::run_cell(cfg, &k).map_err(|e| e.to_string());
                (k, out)
            })
            .collect()
    });
    let ok: Vec<(CellKey, &E::Output)> = cells.iter().filter_map(|(k, r)| r.as_ref().ok().map(|o| (k.clone(), o))).collect();
    let summary = E::summarize(cfg, &ok);
    Ok(Run {
        config: cfg.clone(),
        config_hash: hash,
        cells,
        summary,
        wall_clock_secs: start.elapsed().as_secs_f64(),
        workers: workers.max(1),
    })
}

/// Writes the run's artifacts under `dir` and returns the manifest.
pub fn persist<E: Experiment>(run: &Run<E>, dir: &Path) -> LabResult<Manifest> {
    let mut artifacts = vec![artifact::write_json(
        dir,
        "config.json",
        &serde_json::json!({ "id": E::ID, "config_hash": run.config_hash, "config": run.config }),
    )?];
    let mut records = Vec::with_capacity(run.cells.len());
    for (key, out) in &run.cells {
        let (metrics, error) = match out {
            Ok(o) => {
                let rel = artifact::write(dir, &artifact::cell_file(&key.condition, key.seed), &E::metrics(o).to_csv())?;
                artifacts.push(rel.clone());
                (Some(rel), None)
            }
            Err(e) => (None, Some(e.clone())),
        };
        records.push(CellRecord {
            condition: key.condition.clone(),
            seed: key.seed,
            config_hash: run.config_hash.clone(),
            metrics,
            error,
        });
    }
    artifacts.push(artifact::write_json(dir, "summary.json", &serde_json::json!({
        "schema_version": artifact::SCHEMA_VERSION,
        "id": E::ID,
        "config_hash": run.config_hash,
        "summary": run.summary,
    }))?);
    artifacts.push(artifact::write(dir, "summary.csv", &E::summary_table(&run.summary).to_csv())?);
    artifacts.push(artifact::write_json(dir, "plot.json", &E::plot(&run.summary))?);
    let manifest = Manifest {
        schema_version: artifact::SCHEMA_VERSION,
        id: E::ID.into(),
        config_hash: run.config_hash.clone(),
        wall_clock_secs: run.wall_clock_secs,
        workers: run.workers,
        artifacts,
        cells: records,
    };
    artifact::write_json(dir, "manifest.json", &manifest)?;
    Ok(manifest)
}

/// Object-safe view used by the registry and the CLI.
pub trait Runnable: Send + Sync {
    fn id(&self) -> &'static str;
    fn claim(&self) -> &'static str;
    fn modules(&self) -> &'static [&'static str];
    /// Layers defaults, profile and overrides, then validates.
    fn resolve(&self, profile: Profile, overrides: &[(String, Value)]) -> LabResult<Value>;
    /// Runs a resolved config and writes artifacts under `dir`.
    fn run(&self, resolved: &Value, workers: usize, dir: &Path) -> LabResult<Manifest>;
}

pub struct Entry<E>(PhantomData<E>);

impl<E> Default for Entry<E> {
    fn default() -> Self {
        Self(PhantomData)
    }
}

impl<E: Experiment> Runnable for Entry<E> {
    fn id(&self) -> &'static str {
        E::ID
    }

    fn claim(&self) -> &'static str {
        E::CLAIM
    }

    fn modules(&self) -> &'static [&'static str] {
        E::MODULES
    }

    fn resolve(&self, profile: Profile, overrides: &[(String, Value)]) -> LabResult<Value> {
        let mut doc = config::registry_defaults();
        config::merge(&mut doc, &serde_json::to_value(E::config(profile))?);
        for (k, v) in overrides {
            config::set_path(&mut doc, k, v.clone())?;
        }
        let cfg: E::Config = config::typed(&doc)?;
        cfg.validate()?;
        // Round-trip so the stored document is exactly the typed config.
        Ok(serde_json::to_value(cfg)?)
    }

    fn run(&self, resolved: &Value, workers: usize, dir: &Path) -> LabResult<Manifest> {
        let cfg: E::Config = config::typed(resolved)?;
        let run = execute::<E>(&cfg, workers)?;
        let manifest = persist(&run, dir)?;
        match run.failed() {
            0 => Ok(manifest),
            n if n == run.cells.len() => Err(LabError::Sim(phasor_core::Error::InvalidInput(format!("all {n} cells failed")))),
            n => Err(LabError::PartialFailure {
                failed: n,
                total: run.cells.len(),
            }),
        }
    }
}

/// Checks a list of seeds is usable.
pub fn check_seeds(seeds: &[u64]) -> LabResult<()> {
    if seeds.is_empty() {
        return Err(LabError::config("seeds", "must be non-empty"));
    }
    let mut s = seeds.to_vec();
    s.sort_unstable();
    s.dedup();
    if s.len() != seeds.len() {
        return Err(LabError::config("seeds", "duplicate seeds"));
    }
    Ok(())
}

/// Field check helper: `ensure(cond, field, reason)`.
pub fn ensure(cond: bool, field: &str, reason: &str) -> LabResult<()> {
    if cond {
        Ok(())
    } else {
        Err(LabError::config(field, reason))
    }
}
