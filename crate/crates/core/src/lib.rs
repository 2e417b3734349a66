//! Phasor graphs: networks of coupled Stuart–Landau oscillators that learn
//! through local three-factor plasticity under a wake / NREM / REM schedule.
//!
//! Module map:
//! - [`graph`]: oscillator substrate, IMEX stepping, coupling kernels, diagnostics
//! - [`plasticity`]: coincidence terms, dual eligibility traces, gates, modulator/PRP, homeostasis
//! - [`progress`]: compression-progress pulse detector and the timestamp-shuffle control
//! - [`holo`]: complex Hebbian memory, recall harness, capacity benchmark and baselines
//! - [`sleep`]: the wake → NREM → REM loop, guardrails, phase scramble, budget accounting
//! - [`env`]: gridworld mazes, readouts, holographic transition model, REM replay, Dyna-Q

pub mod env;
pub mod error;
pub mod graph;
pub mod holo;
pub mod phase;
pub mod plasticity;
pub mod progress;
pub mod rng;
pub mod sleep;

pub use error::{Error, Result};
pub use num_complex::Complex64;
