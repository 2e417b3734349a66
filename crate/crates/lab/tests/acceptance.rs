//! Acceptance suite: one pass/fail line per criterion.
//!
//! Every experiment runs at its fast profile through the registry, exactly
//! as the CLI would, and the criterion is checked against the persisted
//! summary. Lines go straight to stderr so they show up without
//! `--nocapture`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use phasor_core::env::{dyna_q, DynaConfig, EpisodeSpec, GridMaze, TdParams};
use phasor_core::graph::{Adjacency, Dynamics, PhasorGraph};
use phasor_core::holo::{overlap, HoloMemory, StoreOptions};
use phasor_core::phase::unit;
use phasor_core::plasticity::{gate_value, GateConfig, ModulatorParams, PlasticityState, TraceParams};
use phasor_core::rng::stream_rng;
use phasor_core::sleep::{apply_guardrails, GuardrailConfig};
use phasor_lab::config::Profile;
use phasor_lab::registry;
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::Rng;
use serde_json::Value;

struct Verdict {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn report(v: &Verdict) {
    let tag = if v.pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[{tag}] {:>2}. {}: {}", v.id, v.name, v.detail);
}

struct FastRun {
    summary: Value,
    config: Value,
    secs: f64,
}

impl FastRun {
    fn seeds(&self) -> usize {
        self.config["seeds"].as_array().map_or(0, Vec::len)
    }
}

fn run_fast(id: &str, dir: &Path) -> FastRun {
    let entry = registry::get(id).unwrap();
    let resolved = entry.resolve(Profile::Fast, &[]).unwrap();
    let out = dir.join(id);
    let manifest = entry.run(&resolved, 1, &out).unwrap_or_else(|e| panic!("{id}: {e}"));
    let read = |f: &str| -> Value { serde_json::from_str(&std::fs::read_to_string(out.join(f)).unwrap()).unwrap() };
    FastRun {
        summary: read("summary.json")["summary"].clone(),
        config: read("config.json")["config"].clone(),
        secs: manifest.wall_clock_secs,
    }
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

fn find<'a>(rows: &'a Value, key: &str, value: &str) -> &'a Value {
    rows.as_array().unwrap().iter().find(|r| r[key] == value).unwrap_or(&Value::Null)
}

fn within(secs: f64, limit: f64) -> (bool, String) {
    (secs < limit, format!("{secs:.1}s of {limit:.0}s"))
}

fn limit_cycle() -> Verdict {
    let start = Instant::now();
    let mut rng = stream_rng("acceptance", 1, "limit-cycle");
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let (alpha, beta) = (rng.random_range(0.5..2.0), rng.random_range(0.5..2.0));
        for _ in 0..5 {
            let z0 = unit(rng.random_range(-PI..PI)) * rng.random_range(0.05..3.0);
            let dynamics = Dynamics { alpha, beta, kappa: 0.0, ..Dynamics::default() };
            let adj = Adjacency::from_edges(1, std::iter::empty()).unwrap();
            let mut g = PhasorGraph::new(adj, vec![1.0], dynamics, vec![z0]).unwrap();
            for _ in 0..4000 {
                g.step(None, 0.01).unwrap();
            }
            worst = worst.max((g.z[0].norm() - (alpha / beta).sqrt()).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Verdict {
        id: 1,
        name: "limit cycle",
        pass: worst < 1e-3 && secs < 1.0,
        detail: format!("max | |z| - sqrt(a/b) | = {worst:.2e} over 25 runs, {secs:.2}s"),
    }
}

fn critical_window(r: &FastRun) -> Verdict {
    let rows = r.summary["per_kappa"].as_array().unwrap();
    let var: Vec<f64> = rows.iter().map(|k| num(&k["var_r"])).collect();
    let peak = var.iter().enumerate().fold(0, |b, (i, &v)| if v > var[b] { i } else { b });
    let interior = peak > 0 && peak + 1 < var.len();
    let (low, high) = (num(&rows[0]["mean_r"]), num(&rows[rows.len() - 1]["mean_r"]));
    let (fast, t) = within(r.secs, 120.0);
    Verdict {
        id: 2,
        name: "s1-04 critical window",
        pass: rows.len() == 10 && interior && low < 0.4 && high > 0.7 && fast,
        detail: format!("variance peak at index {peak}, low-kappa R {low:.3}, high-kappa R {high:.3}, {t}"),
    }
}

fn input_modes(r: &FastRun) -> Verdict {
    let modes = &r.summary["modes"];
    let omega = num(&find(modes, "mode", "omega_mod")["min_r"]);
    let alpha = num(&find(modes, "mode", "alpha_mod")["mean_r"]);
    let (fast, t) = within(r.secs, 30.0);
    Verdict {
        id: 3,
        name: "s1-05 input modes",
        pass: omega >= 0.99 && alpha > 0.0 && alpha < 0.6 && fast,
        detail: format!("omega-mod r {omega:.4}, alpha-mod r {alpha:.3}, {t}"),
    }
}

fn credit_horizon(r: &FastRun) -> Verdict {
    let ratio: Vec<(f64, f64)> = r.summary["ratio"].as_array().unwrap().iter().map(|p| (num(&p[0]), num(&p[1]))).collect();
    let first = ratio.first().map_or(f64::NAN, |p| p.1);
    let last = ratio.last().map_or(f64::NAN, |p| p.1);
    let monotone = ratio.windows(2).all(|w| w[1].1 <= w[0].1);
    let (fast, t) = within(r.secs, 120.0);
    Verdict {
        id: 4,
        name: "s2-03 credit horizon",
        pass: first >= 3.0 && last >= 1.1 && monotone && fast,
        detail: format!("ratio {first:.2} at delay 0, {last:.2} at longest delay, monotone {monotone}, {t}"),
    }
}

fn timing_specificity(r: &FastRun) -> Verdict {
    let c = &r.summary["conditions"];
    let real = num(&find(c, "condition", "real")["reduction"]);
    let shuffled = num(&find(c, "condition", "shuffled")["reduction"]);
    let seeds_ok = r.seeds() >= 10;
    let (fast, t) = within(r.secs, 180.0);
    Verdict {
        id: 5,
        name: "s2-02 timing specificity",
        pass: real > 0.0 && real >= 2.0 * shuffled && seeds_ok && fast,
        detail: format!("error reduction real {real:.3} vs shuffled {shuffled:.3}, {} seeds, {t}", r.seeds()),
    }
}

fn kernels(r: &FastRun) -> Verdict {
    let rows = &r.summary["rows"];
    let gr = num(&find(rows, "kernel", "gate_rotate")["success_rate"]);
    let diff = num(&find(rows, "kernel", "diffusive")["success_rate"]);
    let trials = find(rows, "kernel", "gate_rotate")["trials"].as_u64().unwrap_or(0);
    let (fast, t) = within(r.secs, 180.0);
    Verdict {
        id: 6,
        name: "s3-01 kernels",
        pass: gr >= 2.0 * diff && trials >= 60 && fast,
        detail: format!("gate_rotate {gr:.3} vs diffusive {diff:.3} over {trials} trials, {t}"),
    }
}

fn capacity(r: &FastRun) -> Verdict {
    let n = num(&r.summary["n"]);
    let caps = &r.summary["capacities"];
    let phasor = num(&find(caps, "backend", "phasor")["capacity"]);
    let points = r.summary["points"].as_array().unwrap();
    let mhn_full = points.iter().any(|p| p["backend"] == "mhn" && num(&p["p"]) == n && num(&p["reliable_fraction"]) == 1.0);
    let esn_ok = points
        .iter()
        .filter(|p| p["backend"] == "esn" && num(&p["p"]) >= 4.0)
        .all(|p| num(&p["reliable_fraction"]) <= 0.1);
    let (fast, t) = within(r.secs, 300.0);
    Verdict {
        id: 7,
        name: "s3-08 capacity",
        pass: phasor >= 0.08 * n && phasor <= 0.18 * n && mhn_full && esn_ok && fast,
        detail: format!("phasor capacity {phasor}/{n} = {:.3}N, MHN full at P=N {mhn_full}, ESN <= 0.1 at P>=4 {esn_ok}, {t}", phasor / n),
    }
}

fn coherence(r: &FastRun) -> Verdict {
    let c = &r.summary["conditions"];
    let coh = find(c, "condition", "coherent");
    let scr = find(c, "condition", "scrambled");
    let p = num(&r.summary["p_value"]);
    let n = coh["runs"].as_u64().unwrap_or(0);
    let (fast, t) = within(r.secs, 180.0);
    Verdict {
        id: 8,
        name: "s3-02 coherence necessity",
        pass: num(&coh["mean_gain"]) > num(&scr["mean_gain"]) && p < 0.05 && n >= 30 && fast,
        detail: format!(
            "gain coherent {:.3} vs scrambled {:.3}, one-sided p {p:.2e}, n {n}, {t}",
            num(&coh["mean_gain"]),
            num(&scr["mean_gain"])
        ),
    }
}

fn guardrails(r: &FastRun) -> Verdict {
    let c = &r.summary["conditions"];
    let rate = |name: &str| num(&find(c, "condition", name)["collapse_rate"]);
    let (un, gu, al) = (rate("unguarded"), rate("guarded"), rate("alpha_only"));
    let (fast, t) = within(r.secs, 120.0);
    Verdict {
        id: 9,
        name: "s3-03 guardrails",
        pass: un >= 0.8 && gu <= 0.2 && al >= 0.8 && fast,
        detail: format!("collapse unguarded {un:.2}, guarded {gu:.2}, alpha-only {al:.2}, {t}"),
    }
}

fn budget(r: &FastRun) -> Verdict {
    let s = &r.summary;
    let (w, n) = (num(&s["best_stable_wake_only"]), num(&s["best_stable_wake_nrem"]));
    let (fast, t) = within(r.secs, 240.0);
    Verdict {
        id: 10,
        name: "s3-07 stability budget",
        pass: num(&s["budget"]) == 2.0 && n >= 1.3 * w && fast,
        detail: format!("best stable wake+NREM {n:.3} vs wake-only {w:.3} (ratio {:.2}) at B = {}, {t}", n / w, num(&s["budget"])),
    }
}

fn maze_replay(r: &FastRun) -> Verdict {
    let c = &r.summary["conditions"];
    let get = |name: &str, field: &str| num(&find(c, "condition", name)[field]);
    let wake_seen = get("wake", "seen");
    let rem_gain = get("rem", "seen") - wake_seen;
    let matched = ["idle", "rem_gate_off"].iter().all(|k| (get(k, "seen") - wake_seen).abs() <= 0.03 && (get(k, "unseen") - get("wake", "unseen")).abs() <= 0.03);
    let scramble_below = get("rem_scramble", "unseen") < get("wake", "unseen");
    let dyna = get("dyna_q", "seen");
    let runs = find(c, "condition", "wake")["runs"].as_u64().unwrap_or(0);
    let (fast, t) = within(r.secs, 600.0);
    Verdict {
        id: 11,
        name: "s3-04 maze replay",
        pass: rem_gain >= 0.20 && matched && scramble_below && dyna >= 0.95 && runs >= 60 && fast,
        detail: format!(
            "REM seen +{:.1}pp, idle/gate-off matched {matched}, scramble unseen {:.3} vs wake {:.3}, Dyna-Q seen {dyna:.3}, {runs} runs, {t}",
            100.0 * rem_gain,
            get("rem_scramble", "unseen"),
            get("wake", "unseen")
        ),
    }
}

fn latent(r: &FastRun) -> Verdict {
    let c = &r.summary["conditions"];
    let t0 = |name: &str| num(&find(c, "condition", name)["t0"]);
    let phasor = ["random_wake", "intrinsic_wake", "nrem", "rem", "wedged", "random_replay", "scramble"];
    let wake = t0("intrinsic_wake").max(t0("random_wake"));
    let dyna_top = phasor.iter().all(|k| t0("dyna_q") > t0(k));
    let (fast, t) = within(r.secs, 600.0);
    Verdict {
        id: 12,
        name: "s3-06 latent learning",
        pass: t0("rem") >= 4.0 * wake && t0("scramble") <= 0.1 && dyna_top && fast,
        detail: format!(
            "t=0 REM {:.3} vs wake {wake:.3}, scramble {:.3}, Dyna-Q {:.3} above all {dyna_top}, {t}",
            t0("rem"),
            t0("scramble"),
            t0("dyna_q")
        ),
    }
}

fn reversal(r: &FastRun) -> Verdict {
    let c = &r.summary["conditions"];
    let benefit = |name: &str| num(&find(c, "condition", name)["benefit"]);
    let runs = find(c, "condition", "wake")["runs"].as_u64().unwrap_or(0);
    let (fast, t) = within(r.secs, 300.0);
    Verdict {
        id: 13,
        name: "s3-05 reversal",
        pass: benefit("rem") >= 0.05 && benefit("nrem_rem") < benefit("rem") && runs >= 10 && fast,
        detail: format!("REM benefit {:.3}, NREM+REM benefit {:.3}, {runs} seeds, {t}", benefit("rem"), benefit("nrem_rem")),
    }
}

fn csv_files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap().flatten() {
            let p = entry.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|e| e == "csv") {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism(first: &Path, first_secs: f64) -> Verdict {
    let second = tempfile::tempdir().unwrap();
    let mut secs = first_secs;
    let mut differing = Vec::new();
    let ids: Vec<&str> = registry::all().iter().map(|e| e.id()).collect();
    for id in &ids {
        secs += run_fast(id, second.path()).secs;
        let (a, b) = (csv_files(&first.join(id)), csv_files(&second.path().join(id)));
        if a.is_empty() || a != b {
            differing.push(*id);
        }
    }
    let (fast, t) = within(secs, 900.0);
    Verdict {
        id: 14,
        name: "determinism",
        pass: differing.is_empty() && fast,
        detail: format!("{} experiments run twice, differing: {differing:?}, {t}", ids.len()),
    }
}

fn invariants() -> Verdict {
    let start = Instant::now();
    let mut runner = TestRunner::new(PropConfig::with_cases(64));
    let mut failed = Vec::new();
    let mut check = |name: &'static str, r: Result<(), String>| {
        if let Err(e) = r {
            failed.push(format!("{name}: {e}"));
        }
    };

    check(
        "trace decay",
        runner
            .run(&(-5.0f64..5.0, -5.0f64..5.0, 0.001f64..1.0, 0.05f64..1.0, 0.5f64..10.0), |(ef, es, dt, tau_f, tau_s)| {
                let traces = TraceParams { tau_f, tau_s, k_f: 1.0, k_s: 0.0 };
                let mut s = PlasticityState::new(vec![(0, 1)], traces, ModulatorParams::default()).unwrap();
                s.e_fast[0] = ef;
                s.e_slow[0] = es;
                s.update_traces(&[0.0], dt).unwrap();
                prop_assert_eq!(s.e_fast[0], ef * (-dt / tau_f).exp());
                prop_assert_eq!(s.e_slow[0], es * (-dt / tau_s).exp());
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    check(
        "gate budget counts",
        runner
            .run(&(5u64..300, 1u64..50, 1u64..2000), |(period, burst, total)| {
                let burst = burst.min(period);
                let g = GateConfig::spindles(total, period, burst);
                let open = (0..total).filter(|&t| gate_value(&g, 0.0, t)).count() as u64;
                prop_assert_eq!(open, (total / period) * burst + (total % period).min(burst));
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    check(
        "Hebbian Hermiticity",
        runner
            .run(&(0u64..500, 1usize..6, 2usize..12), |(seed, p, n)| {
                let mut rng = stream_rng("acceptance", seed, "holo");
                let pats: Vec<Vec<Complex64>> = (0..p).map(|_| (0..n).map(|_| unit(rng.random_range(-PI..PI))).collect()).collect();
                let mut m = HoloMemory::new(n, StoreOptions::default());
                m.store(&pats).unwrap();
                prop_assert_eq!(m.weights.clone(), m.weights.adjoint());
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    check(
        "overlap global-phase invariance",
        runner
            .run(&(0u64..1000, -PI..PI, 0.1f64..5.0), |(seed, psi, gain)| {
                let mut rng = stream_rng("acceptance", seed, "overlap");
                let z: Vec<Complex64> = (0..12).map(|_| unit(rng.random_range(-PI..PI))).collect();
                let x: Vec<Complex64> = (0..12).map(|_| unit(rng.random_range(-PI..PI))).collect();
                let rotated: Vec<Complex64> = z.iter().map(|v| v * unit(psi) * gain).collect();
                prop_assert!((overlap(&rotated, &x).unwrap() - overlap(&z, &x).unwrap()).abs() < 1e-12);
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    check(
        "guardrail identity at zero gains",
        runner
            .run(&(0u64..1000, 0.0f64..1.0), |(seed, r)| {
                let mut rng = stream_rng("acceptance", seed, "guard");
                let z0: Vec<Complex64> = (0..5).map(|_| unit(rng.random_range(-PI..PI))).collect();
                let mut g = PhasorGraph::new(Adjacency::complete(5), vec![1.0; 5], Dynamics::default(), z0).unwrap();
                let (z, kappa, alpha) = (g.z.clone(), g.dynamics.kappa, g.dynamics.alpha);
                apply_guardrails(&mut g, &GuardrailConfig::disabled(), r, &mut rng);
                prop_assert_eq!(g.z, z);
                prop_assert_eq!(g.dynamics.kappa, kappa);
                prop_assert_eq!(g.dynamics.alpha, alpha);
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    let mut slow = TestRunner::new(PropConfig::with_cases(16));
    check(
        "Dyna-Q / Q-learning equivalence",
        slow.run(&(0u64..1000), |seed| {
            let env = GridMaze::generate(6, 6, 0.1, 35, &mut stream_rng("acceptance", seed, "maze")).unwrap();
            let td = TdParams { alpha: 0.4, gamma: 0.9, epsilon: 0.2 };
            let starts: Vec<usize> = (0..35).collect();
            let cfg = DynaConfig { episodes: 12, planning_steps: 0, td: td.clone() };
            let (agent, logs) = dyna_q(&env, &starts, &cfg, &EpisodeSpec::default(), &mut stream_rng("acceptance", seed, "run"));
            let (q, paths) = q_learning(&env, &starts, 12, &td, &mut stream_rng("acceptance", seed, "run"));
            for (s, row) in q.iter().enumerate() {
                prop_assert_eq!(agent.q.row(s), row);
            }
            prop_assert_eq!(logs.into_iter().map(|l| l.states).collect::<Vec<_>>(), paths);
            Ok(())
        })
        .map_err(|e| e.to_string()),
    );

    let secs = start.elapsed().as_secs_f64();
    Verdict {
        id: 15,
        name: "invariant properties",
        pass: failed.is_empty() && secs < 120.0,
        detail: if failed.is_empty() {
            format!("6 properties held, {secs:.1}s")
        } else {
            failed.join("; ")
        },
    }
}

/// Plain tabular Q-learning with the same draw order as the Dyna agent.
fn q_learning(env: &GridMaze, starts: &[usize], episodes: usize, td: &TdParams, rng: &mut impl Rng) -> (Vec<[f64; 4]>, Vec<Vec<usize>>) {
    let mut q = vec![[0.0f64; 4]; env.n_cells()];
    let mut paths = Vec::new();
    for _ in 0..episodes {
        let mut s = starts[rng.random_range(0..starts.len())];
        let mut path = Vec::new();
        for _ in 0..env.step_cap() {
            let a = if rng.random::<f64>() < td.epsilon {
                rng.random_range(0..4)
            } else {
                (1..4).fold(0, |b, k| if q[s][k] > q[s][b] { k } else { b })
            };
            let next = env.step(s, a);
            let terminal = next == env.goal();
            let r = if terminal { 1.0 } else { -0.01 };
            let target = if terminal { r } else { r + td.gamma * q[next].iter().copied().fold(f64::NEG_INFINITY, f64::max) };
            q[s][a] += td.alpha * (target - q[s][a]);
            path.push(s);
            s = next;
            if terminal {
                break;
            }
        }
        paths.push(path);
    }
    (q, paths)
}

#[test]
fn acceptance_criteria() {
    let first = tempfile::tempdir().unwrap();
    let mut runs = BTreeMap::new();
    let mut total = 0.0;
    for e in registry::all() {
        let r = run_fast(e.id(), first.path());
        total += r.secs;
        runs.insert(e.id(), r);
    }

    let verdicts = vec![
        limit_cycle(),
        critical_window(&runs["s1-04"]),
        input_modes(&runs["s1-05"]),
        credit_horizon(&runs["s2-03"]),
        timing_specificity(&runs["s2-02"]),
        kernels(&runs["s3-01"]),
        capacity(&runs["s3-08"]),
        coherence(&runs["s3-02"]),
        guardrails(&runs["s3-03"]),
        budget(&runs["s3-07"]),
        maze_replay(&runs["s3-04"]),
        latent(&runs["s3-06"]),
        reversal(&runs["s3-05"]),
        determinism(first.path(), total),
        invariants(),
    ];
    for v in &verdicts {
        report(v);
    }
    let failed: Vec<u32> = verdicts.iter().filter(|v| !v.pass).map(|v| v.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
