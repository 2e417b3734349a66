//! Reliable-storage benchmark over bipolar patterns.
//!
//! A stored pattern counts as reliable when at least `query_threshold` of
//! its noisy queries come back with at least `bit_threshold` of bits right.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::esn::{EchoState, EsnParams};
use super::mhn::ModernHopfield;
use super::recall::{iterate_phases, memory_node_field};
use super::{bipolar_to_phasor, HoloMemory, StoreOptions};
use crate::error::Result;
use crate::graph::{imex_node, Kernel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Phasor,
    Mhn,
    Esn,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Phasor => "phasor",
            Backend::Mhn => "mhn",
            Backend::Esn => "esn",
        }
    }
}

/// How the phasor backend settles a query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PhasorRetrieval {
    /// Asynchronous `z_i ← e^{i arg f_i}` sweeps.
    Iterative { max_sweeps: usize },
    /// Stuart–Landau integration with the memory field as coupling.
    Dynamics { kappa: f64, dt: f64, steps: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityConfig {
    pub n: usize,
    pub pattern_counts: Vec<usize>,
    pub flip_noise: f64,
    /// Independent pattern sets per P.
    pub trials: usize,
    pub queries_per_pattern: usize,
    pub bit_threshold: f64,
    pub query_threshold: f64,
    pub kernel: Kernel,
    pub beta_coh: f64,
    pub store: StoreOptions,
    pub retrieval: PhasorRetrieval,
    pub mhn_beta: f64,
    pub esn: EsnParams,
}

impl Default for CapacityConfig {
    fn default() -> Self {
        Self {
            n: 64,
            pattern_counts: vec![1, 2, 4, 6, 8, 10, 12, 16],
            flip_noise: 0.1,
            trials: 4,
            queries_per_pattern: 20,
            bit_threshold: 0.95,
            query_threshold: 0.95,
            kernel: Kernel::GateRotate,
            beta_coh: 3.0,
            store: StoreOptions {
                centering: false,
                zero_diagonal: true,
            },
            retrieval: PhasorRetrieval::Iterative { max_sweeps: 50 },
            mhn_beta: 8.0,
            esn: EsnParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityRow {
    pub backend: Backend,
    pub n: usize,
    pub p: usize,
    pub flip_noise: f64,
    pub reliable_fraction: f64,
    pub trials: usize,
    pub seed: u64,
}

pub fn random_bits<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
}

pub fn flip_bits<R: Rng + ?Sized>(bits: &[f64], p: f64, rng: &mut R) -> Vec<f64> {
    bits.iter().map(|&b| if rng.random::<f64>() < p { -b } else { b }).collect()
}

fn bit_accuracy(out: &[f64], target: &[f64]) -> f64 {
    out.iter().zip(target).filter(|(a, b)| a.signum() == b.signum()).count() as f64 / target.len() as f64
}

fn as_phasor(bits: &[f64]) -> Vec<Complex64> {
    bipolar_to_phasor(&bits.iter().map(|&b| if b >= 0.0 { 1 } else { -1 }).collect::<Vec<i8>>())
}

fn settle(memory: &HoloMemory, z: &mut [Complex64], cfg: &CapacityConfig) {
    match cfg.retrieval {
        PhasorRetrieval::Iterative { max_sweeps } => {
            iterate_phases(memory, z, cfg.kernel, cfg.beta_coh, max_sweeps, 1e-12);
        }
        PhasorRetrieval::Dynamics { kappa, dt, steps } => {
            let mut scratch = Vec::new();
            for _ in 0..steps {
                let field: Vec<Complex64> =
                    (0..z.len()).map(|i| memory_node_field(memory, z, i, cfg.kernel, cfg.beta_coh, &mut scratch)).collect();
                for (zi, f) in z.iter_mut().zip(field) {
                    *zi = imex_node(*zi, 1.0, 0.0, 1.0, 0.0, f * kappa, dt);
                }
            }
        }
    }
}

/// Fraction of `p` freshly drawn patterns that are reliably stored.
pub fn trial_reliable_fraction<R: Rng + ?Sized>(backend: Backend, p: usize, cfg: &CapacityConfig, rng: &mut R) -> Result<f64> {
    let n = cfg.n;
    let patterns: Vec<Vec<f64>> = (0..p).map(|_| random_bits(n, rng)).collect();
    let recover: Box<dyn Fn(&[f64]) -> Vec<f64>> = match backend {
        Backend::Phasor => {
            let mut memory = HoloMemory::new(n, cfg.store);
            memory.store(&patterns.iter().map(|b| as_phasor(b)).collect::<Vec<_>>())?;
            Box::new(move |q: &[f64]| {
                let mut z = as_phasor(q);
                settle(&memory, &mut z, cfg);
                z.iter().map(|v| if v.re >= 0.0 { 1.0 } else { -1.0 }).collect()
            })
        }
        Backend::Mhn => {
            let net = ModernHopfield::new(&patterns, cfg.mhn_beta);
            Box::new(move |q: &[f64]| net.retrieve(q, 50))
        }
        Backend::Esn => {
            let mut esn = EchoState::new(n, &cfg.esn, rng)?;
            esn.fit(&patterns, cfg.esn.ridge)?;
            Box::new(move |q: &[f64]| esn.complete(q))
        }
    };
    let mut reliable = 0;
    for pat in &patterns {
        let good = (0..cfg.queries_per_pattern)
            .filter(|_| {
                let q = flip_bits(pat, cfg.flip_noise, rng);
                bit_accuracy(&recover(&q), pat) >= cfg.bit_threshold
            })
            .count();
        if good as f64 >= cfg.query_threshold * cfg.queries_per_pattern as f64 {
            reliable += 1;
        }
    }
    Ok(reliable as f64 / p.max(1) as f64)
}

/// Mean reliable fraction over `cfg.trials` pattern sets for each P.
pub fn capacity_benchmark<R: Rng + ?Sized>(backend: Backend, cfg: &CapacityConfig, seed: u64, rng: &mut R) -> Result<Vec<CapacityRow>> {
    cfg.pattern_counts
        .iter()
        .map(|&p| {
            let mut total = 0.0;
            for _ in 0..cfg.trials {
                total += trial_reliable_fraction(backend, p, cfg, rng)?;
            }
            Ok(CapacityRow {
                backend,
                n: cfg.n,
                p,
                flip_noise: cfg.flip_noise,
                reliable_fraction: total / cfg.trials.max(1) as f64,
                trials: cfg.trials,
                seed,
            })
        })
        .collect()
}

/// Largest P whose reliable fraction, and that of every smaller tested P,
/// is at least `level`. Zero when even the smallest P fails.
pub fn reliable_capacity(rows: &[CapacityRow], level: f64) -> usize {
    let mut sorted: Vec<&CapacityRow> = rows.iter().collect();
    sorted.sort_by_key(|r| r.p);
    sorted.iter().take_while(|r| r.reliable_fraction >= level).last().map_or(0, |r| r.p)
}
