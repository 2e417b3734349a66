//! Cross-module checks: eligibility credit against its closed form, and a
//! full wake → NREM → REM cycle on a small graph.

use phasor_core::graph::{Adjacency, Dynamics, PhasorGraph};
use phasor_core::phase::unit;
use phasor_core::plasticity::{apply_three_factor, ModulatorParams, ModulatorSource, PlasticityState, TraceKind, TraceParams};
use phasor_core::rng::stream_rng;
use phasor_core::sleep::{run_cycle, BudgetMode, NoHook, Segment, SleepPhase, SleepSchedule};
use rand::Rng;

const DT: f64 = 0.01;

/// ΔW on one edge after `on` steps of coincidence, `delay` silent steps and
/// a unit modulator pulse.
fn credit(tau_f: f64, on: usize, delay: usize) -> f64 {
    let traces = TraceParams { tau_f, ..TraceParams::default() };
    let mut s = PlasticityState::new(vec![(0, 1)], traces, ModulatorParams::default()).unwrap();
    for k in 0..on + delay {
        s.update_traces(&[if k < on { 1.0 } else { 0.0 }], DT).unwrap();
    }
    s.update_modulator(&[1.0], DT).unwrap();
    let mut w = nalgebra::DMatrix::zeros(2, 2);
    apply_three_factor(&mut w, &s, true, 1.0, TraceKind::Fast, ModulatorSource::M, None, None);
    w[(0, 1)]
}

/// Geometric sum for the drive phase, then pure decay.
fn credit_oracle(tau_f: f64, on: usize, delay: usize) -> f64 {
    let q = (-DT / tau_f).exp();
    DT * (1.0 - q.powi(on as i32)) / (1.0 - q) * q.powi(delay as i32)
}

#[test]
fn credit_matches_closed_form() {
    for tau in [0.1, 0.3, 1.0, 3.0] {
        for delay in [0, 10, 50, 200] {
            let (got, want) = (credit(tau, 20, delay), credit_oracle(tau, 20, delay));
            assert!((got - want).abs() < 1e-12 * want.max(1.0), "tau {tau} delay {delay}: {got} vs {want}");
        }
    }
}

#[test]
fn credit_horizon_is_monotone() {
    let taus = [0.1, 0.3, 1.0, 3.0];
    let delays = [0, 10, 20, 40, 60, 120];
    for &tau in &taus {
        let c: Vec<f64> = delays.iter().map(|&d| credit(tau, 20, d)).collect();
        assert!(c.windows(2).all(|w| w[1] < w[0]), "credit must fall with delay at tau {tau}");
    }
    // Longer traces keep a larger share of their credit at every delay.
    for &d in &delays[1..] {
        let kept: Vec<f64> = taus.iter().map(|&t| credit(t, 20, d) / credit(t, 20, 0)).collect();
        assert!(kept.windows(2).all(|w| w[1] > w[0]), "retention must grow with tau at delay {d}");
    }
}

fn small_graph(seed: u64) -> (PhasorGraph, PlasticityState) {
    let n = 6;
    let mut rng = stream_rng("core-it", seed, "init");
    let adj = Adjacency::complete(n);
    let omega = (0..n).map(|_| rng.random_range(0.9..1.1)).collect();
    let z0 = (0..n).map(|_| unit(rng.random_range(-3.0..3.0))).collect();
    let graph = PhasorGraph::new(adj.clone(), omega, Dynamics::default(), z0).unwrap();
    let plasticity = PlasticityState::new(adj.edges(), TraceParams::default(), ModulatorParams::default()).unwrap();
    (graph, plasticity)
}

#[test]
fn full_cycle_records_every_step() {
    let (mut graph, mut ps) = small_graph(0);
    let schedule = SleepSchedule::cycle(Segment::wake(200, 0.05), Segment::nrem(300, 0.05, 0.001), Segment::rem(100, 0.01), 0.05);
    let report = run_cycle(&mut graph, &mut ps, &schedule, &mut NoHook, &mut stream_rng("core-it", 0, "cycle")).unwrap();
    assert_eq!(report.rows.len() as u64, schedule.total_steps());
    assert_eq!(report.gated_steps.len(), 3);
    assert_eq!(report.gated_steps[0], 200);
    assert!(report.gated_steps[1] > 0 && report.gated_steps[1] < 300);
    let phases: Vec<SleepPhase> = report.rows.iter().map(|r| r.phase).collect();
    assert_eq!(phases[0], SleepPhase::Wake);
    assert_eq!(phases[250], SleepPhase::Nrem);
    assert_eq!(phases[599], SleepPhase::Rem);
    assert!(report.rows.iter().all(|r| r.r.is_finite() && r.weight_norm.is_finite()));
    assert!(!report.unstable && report.aborted.is_none());
}

#[test]
fn budget_violations_are_recorded_not_projected() {
    let (mut graph, mut ps) = small_graph(1);
    let mut schedule = SleepSchedule::new(vec![Segment::rem(100, 0.5)], 0.05);
    schedule.budget = Some(1.0);
    schedule.budget_mode = BudgetMode::Record;
    let report = run_cycle(&mut graph, &mut ps, &schedule, &mut NoHook, &mut stream_rng("core-it", 1, "cycle")).unwrap();
    // W starts as the all-ones mask, so ‖W‖_F = √30 > 1 from the first step.
    assert!(report.unstable);
    assert_eq!(report.budget_violations, 100);
    assert!(graph.weights.norm() > 1.0);
}
