//! Topology × normalization sweep: phase-pattern classification accuracy
//! per graph family, and how strongly it tracks modularity under each
//! coupling normalization.

use phasor_core::graph::topology::{greedy_modularity, Topology};
use phasor_core::graph::{Dynamics, InputSignal, Normalization, PhasorGraph};
use phasor_core::phase;
use phasor_core::rng::RngKey;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::readout::RidgeClassifier;
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
    pub kappa: f64,
    pub topologies: Vec<Topology>,
    pub normalizations: Vec<Normalization>,
    pub classes: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub steps: usize,
    pub dt: f64,
    /// ω-mod drive is `gain · (pattern + U(−noise, noise))`.
    pub gain: f64,
    pub noise: f64,
    pub ridge: f64,
}

impl ExperimentConfig for Config {
    fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    fn validate(&self) -> LabResult<()> {
        check_seeds(&self.seeds)?;
        ensure(self.n >= 4, "n", "need at least 4 nodes")?;
        ensure(!self.topologies.is_empty(), "topologies", "must be non-empty")?;
        ensure(!self.normalizations.is_empty(), "normalizations", "must be non-empty")?;
        ensure(self.classes >= 2, "classes", "need at least two classes")?;
        ensure(self.train_per_class >= 1 && self.test_per_class >= 1, "train_per_class", "trial counts must be positive")?;
        ensure(self.dt > 0.0, "dt", "must be positive")?;
        ensure(self.ridge > 0.0, "ridge", "must be positive")
    }
}

fn norm_name(n: Normalization) -> &'static str {
    match n {
        Normalization::Raw => "raw",
        Normalization::Row => "row",
        Normalization::Symmetric => "symmetric",
    }
}

fn condition(t: Topology, n: Normalization) -> String {
    format!("{}/{}", t.name(), norm_name(n))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub topology: Topology,
    pub normalization: Normalization,
    pub accuracy: f64,
    pub modularity: f64,
    pub mean_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub topology: String,
    pub normalization: String,
    pub accuracy: f64,
    pub modularity: f64,
    pub mean_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub rows: Vec<Row>,
    /// Pearson r between modularity and accuracy across topologies.
    pub modularity_correlation: Vec<(String, f64)>,
}

pub struct S102;

impl Experiment for S102 {
    type Config = Config;
    type Output = Cell;
    type Summary = Summary;

    const ID: &'static str = "s1-02";
    const CLAIM: &'static str = "topology effects on accuracy depend on the coupling normalization";
    const MODULES: &'static [&'static str] = &["phasor-graph"];

    fn config(profile: Profile) -> Config {
        Config {
            seeds: (0..if profile == Profile::Fast { 3 } else { 20 }).collect(),
            n: 20,
            kappa: 0.5,
            topologies: Topology::ALL.to_vec(),
            normalizations: vec![Normalization::Raw, Normalization::Row, Normalization::Symmetric],
            classes: 4,
            train_per_class: 10,
            test_per_class: 10,
            steps: 200,
            dt: 0.05,
            gain: 0.2,
            noise: 0.5,
            ridge: 1e-2,
        }
    }

    fn cells(cfg: &Config) -> Vec<CellKey> {
        let conds: Vec<String> = cfg
            .topologies
            .iter()
            .flat_map(|&t| cfg.normalizations.iter().map(move |&n| condition(t, n)))
            .collect();
        grid(conds, &cfg.seeds)
    }

    fn run_cell(cfg: &Config, key: &CellKey) -> phasor_core::Result<Cell> {
        let (topology, normalization) = cfg
            .topologies
            .iter()
            .flat_map(|&t| cfg.normalizations.iter().map(move |&n| (t, n)))
            .find(|&(t, n)| condition(t, n) == key.condition)
            .expect("cell from grid");
        let root = RngKey::new(S102::ID, key.seed);
        // Graph and class patterns depend on (topology, seed) only.
        let adj = topology.build(cfg.n, &mut root.child(topology.name()).stream("graph"))?;
        let mut prng = root.stream("patterns");
        let patterns: Vec<Vec<f64>> = (0..cfg.classes)
            .map(|_| (0..cfg.n).map(|_| if prng.random_bool(0.5) { 1.0 } else { -1.0 }).collect())
            .collect();
        let mut trng = root.stream("trials");
        let dynamics = Dynamics {
            kappa: cfg.kappa,
            normalization,
            ..Dynamics::default()
        };
        let omega = vec![1.0; cfg.n];
        let mut features = Vec::new();
        let mut labels = Vec::new();
        let mut rs = Vec::new();
        let per_class = cfg.train_per_class + cfg.test_per_class;
        for trial in 0..per_class * cfg.classes {
            let class = trial % cfg.classes;
            let z0 = (0..cfg.n).map(|_| phase::unit(trng.random_range(-std::f64::consts::PI..std::f64::consts::PI))).collect();
            let u: Vec<f64> = patterns[class].iter().map(|p| cfg.gain * (p + trng.random_range(-cfg.noise..=cfg.noise))).collect();
            let mut g = PhasorGraph::new(adj.clone(), omega.clone(), dynamics.clone(), z0)?;
            let input = InputSignal::OmegaMod(u);
            for _ in 0..cfg.steps {
                g.step(Some(&input), cfg.dt)?;
            }
            let psi = phase::mean_field_phase(&g.z).unwrap_or(0.0);
            features.push(g.z.iter().flat_map(|z| [(z.arg() - psi).cos(), (z.arg() - psi).sin()]).collect::<Vec<f64>>());
            labels.push(class);
            rs.push(g.order_parameter()?);
        }
        let split = cfg.train_per_class * cfg.classes;
        let accuracy = RidgeClassifier::fit(&features[..split], &labels[..split], cfg.classes, cfg.ridge)
            .map_or(1.0 / cfg.classes as f64, |c| c.accuracy(&features[split..], &labels[split..]));
        Ok(Cell {
            topology,
            normalization,
            accuracy,
            modularity: greedy_modularity(&adj),
            mean_r: mean(&rs),
        })
    }

    fn metrics(out: &Cell) -> Table {
        let mut t = Table::new(["accuracy", "modularity", "mean_r"]);
        t.push(vec![f(out.accuracy), f(out.modularity), f(out.mean_r)]);
        t
    }

    fn summarize(cfg: &Config, cells: &[(CellKey, &Cell)]) -> Summary {
        let mut rows = Vec::new();
        let mut modularity_correlation = Vec::new();
        for &n in &cfg.normalizations {
            let (mut mods, mut accs) = (Vec::new(), Vec::new());
            for &t in &cfg.topologies {
                let sel: Vec<&Cell> = cells.iter().map(|(_, c)| *c).filter(|c| c.topology == t && c.normalization == n).collect();
                let row = Row {
                    topology: t.name().into(),
                    normalization: norm_name(n).into(),
                    accuracy: mean(&sel.iter().map(|c| c.accuracy).collect::<Vec<_>>()),
                    modularity: mean(&sel.iter().map(|c| c.modularity).collect::<Vec<_>>()),
                    mean_r: mean(&sel.iter().map(|c| c.mean_r).collect::<Vec<_>>()),
                };
                mods.push(row.modularity);
                accs.push(row.accuracy);
                rows.push(row);
            }
            modularity_correlation.push((norm_name(n).to_string(), phase::pearson(&mods, &accs).unwrap_or(f64::NAN)));
        }
        Summary { rows, modularity_correlation }
    }

    fn summary_table(s: &Summary) -> Table {
        let mut t = Table::new(["topology", "normalization", "accuracy", "modularity", "mean_r"]);
        for r in &s.rows {
            t.push(vec![r.topology.clone(), r.normalization.clone(), f(r.accuracy), f(r.modularity), f(r.mean_r)]);
        }
        t
    }

    fn plot(_s: &Summary) -> PlotSpec {
        PlotSpec::new("grouped_bar", "topology", "accuracy", "Classification accuracy by topology and normalization").series("normalization")
    }
}
