//! Input channels compared on a single driven oscillator: how faithfully the
//! channel each mode targets tracks a random piecewise-constant signal.
//!
//! Readouts: ω-mod and additive forcing are read from the instantaneous
//! frequency deviation, α-mod from the amplitude deviation.

use phasor_core::graph::{Adjacency, Dynamics, InputMode, InputSignal, PhasorGraph};
use phasor_core::phase;
use phasor_core::rng::RngKey;
use phasor_core::Complex64;
use rand::Rng;
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
    pub omega: f64,
    pub dt: f64,
    pub steps: usize,
    pub burn_in: usize,
    /// Signal levels are held for this many steps.
    pub hold_steps: usize,
    /// Levels are drawn from U(−amplitude, amplitude).
    pub amplitude: f64,
    pub record_every: usize,
}

impl ExperimentConfig for Config {
    fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    fn validate(&self) -> LabResult<()> {
        check_seeds(&self.seeds)?;
        ensure(self.dt > 0.0, "dt", "must be positive")?;
        ensure(self.steps > self.burn_in + 10, "steps", "must exceed burn_in by at least 10")?;
        ensure(self.hold_steps >= 1, "hold_steps", "must be positive")?;
        // α + u must stay positive for the limit cycle to exist.
        ensure(self.amplitude > 0.0 && self.amplitude < 1.0, "amplitude", "must be in (0, 1)")?;
        ensure(self.record_every >= 1, "record_every", "must be positive")
    }
}

pub const MODES: [InputMode; 3] = [InputMode::OmegaMod, InputMode::AlphaMod, InputMode::Additive];

pub fn mode_name(m: InputMode) -> &'static str {
    match m {
        InputMode::OmegaMod => "omega_mod",
        InputMode::AlphaMod => "alpha_mod",
        InputMode::Additive => "additive",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tracking {
    pub mode: InputMode,
    pub correlation: f64,
    /// (step, u, readout)
    pub trace: Vec<(usize, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeStats {
    pub mode: String,
    pub mean_r: f64,
    pub min_r: f64,
    pub max_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub modes: Vec<ModeStats>,
}

impl Summary {
    pub fn mean_r(&self, mode: InputMode) -> f64 {
        self.modes.iter().find(|m| m.mode == mode_name(mode)).map_or(f64::NAN, |m| m.mean_r)
    }
}

pub struct S105;

impl Experiment for S105 {
    type Config = Config;
    type Output = Tracking;
    type Summary = Summary;

    const ID: &'static str = "s1-05";
    const CLAIM: &'static str = "frequency modulation tracks the input signal exactly; amplitude modulation only weakly";
    const MODULES: &'static [&'static str] = &["phasor-graph", "agent-env"];

    fn config(profile: Profile) -> Config {
        Config {
            seeds: (0..if profile == Profile::Fast { 5 } else { 20 }).collect(),
            omega: 1.0,
            dt: 0.05,
            steps: 6000,
            burn_in: 200,
            hold_steps: 1,
            amplitude: 0.3,
            record_every: 10,
        }
    }

    fn cells(cfg: &Config) -> Vec<CellKey> {
        grid(MODES.iter().map(|&m| mode_name(m)), &cfg.seeds)
    }

    fn run_cell(cfg: &Config, key: &CellKey) -> phasor_core::Result<Tracking> {
        let mode = *MODES.iter().find(|&&m| mode_name(m) == key.condition).expect("cell from grid");
        // Same signal for every mode under a given seed.
        let mut rng = RngKey::new(S105::ID, key.seed).stream("signal");
        let mut g = PhasorGraph::new(Adjacency::empty(1), vec![cfg.omega], Dynamics { kappa: 0.0, ..Dynamics::default() }, vec![Complex64::new(1.0, 0.0)])?;
        let (mut us, mut ys, mut trace) = (Vec::new(), Vec::new(), Vec::new());
        let mut u = 0.0;
        for t in 0..cfg.steps {
            if t % cfg.hold_steps == 0 {
                u = rng.random_range(-cfg.amplitude..=cfg.amplitude);
            }
            let before = g.z[0];
            g.step(Some(&InputSignal::from_real(mode, vec![u])), cfg.dt)?;
            let after = g.z[0];
            let y = match mode {
                InputMode::AlphaMod => after.norm() - g.dynamics.radius(),
                _ => phase::wrap(after.arg() - before.arg()) / cfg.dt - cfg.omega,
            };
            if t >= cfg.burn_in {
                us.push(u);
                ys.push(y);
                if t % cfg.record_every == 0 {
                    trace.push((t, u, y));
                }
            }
        }
        Ok(Tracking {
            mode,
            correlation: phase::pearson(&us, &ys).unwrap_or(0.0),
            trace,
        })
    }

    fn metrics(out: &Tracking) -> Table {
        let mut t = Table::new(["step", "u", "readout"]);
        for &(s, u, y) in &out.trace {
            t.push(vec![s.to_string(), f(u), f(y)]);
        }
        t
    }

    fn summarize(_cfg: &Config, cells: &[(CellKey, &Tracking)]) -> Summary {
        let modes = MODES
            .iter()
            .map(|&m| {
                let rs: Vec<f64> = cells.iter().filter(|(_, o)| o.mode == m).map(|(_, o)| o.correlation).collect();
                ModeStats {
                    mode: mode_name(m).into(),
                    mean_r: mean(&rs),
                    min_r: rs.iter().copied().fold(f64::INFINITY, f64::min),
                    max_r: rs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                }
            })
            .collect();
        Summary { modes }
    }

    fn summary_table(s: &Summary) -> Table {
        let mut t = Table::new(["mode", "mean_r", "min_r", "max_r"]);
        for m in &s.modes {
            t.push(vec![m.mode.clone(), f(m.mean_r), f(m.min_r), f(m.max_r)]);
        }
        t
    }

    fn plot(_s: &Summary) -> PlotSpec {
        PlotSpec::new("bar", "mode", "mean_r", "Tracking correlation by input mode")
    }
}
