//! Wake-only learning-rate sweep against wake+NREM under a weight-norm
//! budget. A configuration counts only if it is fully stable.

use phasor_core::rng::RngKey;
use phasor_core::sleep::fully_stable;
use serde::{Deserialize, Serialize};

use super::cue_target::{train, Offline, Outcome, Plan, TaskConfig};
use crate::artifact::{f, PlotSpec, Table};
use crate::config::Profile;
use crate::error::LabResult;
use crate::experiment::{check_seeds, ensure, grid, CellKey, Experiment, ExperimentConfig};
use crate::stats::mean;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seeds: Vec<u64>,
    pub task: TaskConfig,
    /// Frobenius bound on the coupling weights.
    pub budget: f64,
    pub wake_etas: Vec<f64>,
    /// Wake rate used by the two-phase regime.
    pub tagging_eta: f64,
    pub nrem_etas: Vec<f64>,
}

impl ExperimentConfig for Config {
    fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    fn validate(&self) -> LabResult<()> {
        check_seeds(&self.seeds)?;
        self.task.validate()?;
        ensure(self.budget > 0.0, "budget", "must be positive")?;
        ensure(!self.wake_etas.is_empty() && self.wake_etas.iter().all(|e| *e >= 0.0), "wake_etas", "need non-negative rates")?;
        ensure(!self.nrem_etas.is_empty() && self.nrem_etas.iter().all(|e| *e >= 0.0), "nrem_etas", "need non-negative rates")?;
        ensure(self.tagging_eta >= 0.0, "tagging_eta", "must be >= 0")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    WakeOnly,
    WakeNrem,
}

impl Regime {
    fn name(self) -> &'static str {
        match self {
            Regime::WakeOnly => "wake_only",
            Regime::WakeNrem => "wake_nrem",
        }
    }
}

fn settings(cfg: &Config) -> Vec<(Regime, f64)> {
    let wake = cfg.wake_etas.iter().map(|&e| (Regime::WakeOnly, e));
    let nrem = cfg.nrem_etas.iter().map(|&e| (Regime::WakeNrem, e));
    wake.chain(nrem).collect()
}

fn condition(regime: Regime, eta: f64) -> String {
    format!("{}/eta={eta:e}", regime.name())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Setting {
    pub regime: Regime,
    pub eta: f64,
    pub mean_score: f64,
    pub within_budget: f64,
    pub fully_stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub budget: f64,
    pub settings: Vec<Setting>,
    pub best_stable_wake_only: Option<f64>,
    pub best_stable_wake_nrem: Option<f64>,
    pub ratio: f64,
}

pub struct S307;

impl Experiment for S307 {
    type Config = Config;
    type Output = Outcome;
    type Summary = Summary;

    const ID: &'static str = "s3-07";
    const CLAIM: &'static str = "wake/NREM separation reaches performance that wake-only learning cannot reach within the weight budget";
    const MODULES: &'static [&'static str] = &["sleep-scheduler", "plasticity", "agent-env"];

    fn config(profile: Profile) -> Config {
        Config {
            seeds: (0..if profile == Profile::Fast { 10 } else { 30 }).collect(),
            task: TaskConfig::default(),
            budget: 2.0,
            wake_etas: vec![3e-4, 5e-4, 1e-3, 2e-3, 3e-3, 4e-3, 5e-3, 1e-2],
            tagging_eta: 3e-4,
            nrem_etas: vec![5e-4, 1e-3, 1.5e-3, 2e-3, 3e-3],
        }
    }

    fn cells(cfg: &Config) -> Vec<CellKey> {
        grid(settings(cfg).into_iter().map(|(r, e)| condition(r, e)), &cfg.seeds)
    }

    fn run_cell(cfg: &Config, key: &CellKey) -> phasor_core::Result<Outcome> {
        let (regime, eta) = settings(cfg)
            .into_iter()
            .find(|&(r, e)| condition(r, e) == key.condition)
            .expect("cell from grid");
        let plan = match regime {
            Regime::WakeOnly => Plan {
                eta_wake: eta,
                eta_nrem: 0.0,
                offline: Offline::None,
                budget: Some(cfg.budget),
                nrem_cap: None,
            },
            Regime::WakeNrem => Plan {
                eta_wake: cfg.tagging_eta,
                eta_nrem: eta,
                offline: Offline::Coherent,
                budget: Some(cfg.budget),
                nrem_cap: None,
            },
        };
        train(&cfg.task, &plan, &RngKey::new(S307::ID, key.seed))
    }

    fn metrics(out: &Outcome) -> Table {
        let mut t = Table::new(["step", "r", "weight_norm"]);
        for &(s, r, w) in &out.trace {
            t.push(vec![s.to_string(), f(r), f(w)]);
        }
        t
    }

    fn summarize(cfg: &Config, cells: &[(CellKey, &Outcome)]) -> Summary {
        let settings: Vec<Setting> = settings(cfg)
            .into_iter()
            .map(|(regime, eta)| {
                let name = condition(regime, eta);
                let of: Vec<&Outcome> = cells.iter().filter(|(k, _)| k.condition == name).map(|(_, o)| *o).collect();
                let flags: Vec<bool> = of.iter().map(|o| o.unstable).collect();
                Setting {
                    regime,
                    eta,
                    mean_score: mean(&of.iter().map(|o| o.score).collect::<Vec<_>>()),
                    within_budget: mean(&flags.iter().map(|&u| f64::from(u8::from(!u))).collect::<Vec<_>>()),
                    fully_stable: fully_stable(&flags),
                }
            })
            .collect();
        let best = |r: Regime| {
            settings
                .iter()
                .filter(|s| s.regime == r && s.fully_stable)
                .map(|s| s.mean_score)
                .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
        };
        let (w, n) = (best(Regime::WakeOnly), best(Regime::WakeNrem));
        Summary {
            budget: cfg.budget,
            ratio: match (w, n) {
                (Some(w), Some(n)) => n / w,
                (None, Some(_)) => f64::INFINITY,
                _ => f64::NAN,
            },
            best_stable_wake_only: w,
            best_stable_wake_nrem: n,
            settings,
        }
    }

    fn summary_table(s: &Summary) -> Table {
        let mut t = Table::new(["regime", "eta", "mean_score", "within_budget", "fully_stable"]);
        for x in &s.settings {
            t.push(vec![x.regime.name().to_string(), format!("{:e}", x.eta), f(x.mean_score), f(x.within_budget), x.fully_stable.to_string()]);
        }
        t
    }

    fn plot(s: &Summary) -> PlotSpec {
        let mut p = PlotSpec::new("scatter", "eta", "mean_score", "Score vs learning rate under a weight-norm budget").series("regime");
        p.annotations.push(crate::artifact::Annotation {
            kind: "note".into(),
            label: format!("budget {}", s.budget),
            from: s.budget,
            to: s.budget,
        });
        p
    }
}
