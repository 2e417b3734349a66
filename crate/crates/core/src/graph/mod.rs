//! Stuart–Landau oscillator graphs.
//!
//! Each node carries a complex state `z = r e^{iφ}` evolving under
//!
//! ```text
//! dz/dt = (α + iω − (β + iγ)|z|²) z + κ f(z) + I
//! ```
//!
//! where `f` is one of the coupling kernels in [`kernel`]. Stepping is IMEX:
//! the linear, coupling and forcing terms are explicit, the cubic amplitude
//! term is divided out implicitly and the rotation is applied exactly.

mod kernel;
pub mod topology;

use std::collections::VecDeque;
use std::io::{self, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::{self, AMPLITUDE_EPS};

pub use kernel::{gated_node_field, Kernel};

/// How the structural adjacency is rescaled before use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    Raw,
    #[default]
    Row,
    Symmetric,
}

/// Binary structural mask with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjacency {
    mask: DMatrix<u8>,
}

impl Adjacency {
    pub fn new(mask: DMatrix<u8>) -> Result<Self> {
        if mask.nrows() != mask.ncols() {
            return Err(Error::DimensionMismatch {
                expected: mask.nrows(),
                got: mask.ncols(),
            });
        }
        if mask.iter().any(|&v| v > 1) {
            return Err(Error::InvalidInput("adjacency entries must be 0 or 1".into()));
        }
        if (0..mask.nrows()).any(|i| mask[(i, i)] != 0) {
            return Err(Error::InvalidInput("adjacency must have zero diagonal".into()));
        }
        Ok(Self { mask })
    }

    /// Builds a mask from an undirected edge list.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut mask = DMatrix::<u8>::zeros(n, n);
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidInput(format!("edge ({i}, {j}) out of range for n={n}")));
            }
            if i != j {
                mask[(i, j)] = 1;
                mask[(j, i)] = 1;
            }
        }
        Self::new(mask)
    }

    pub fn complete(n: usize) -> Self {
        let mask = DMatrix::from_fn(n, n, |i, j| u8::from(i != j));
        Self { mask }
    }

    pub fn empty(n: usize) -> Self {
        Self {
            mask: DMatrix::zeros(n, n),
        }
    }

    pub fn n(&self) -> usize {
        self.mask.nrows()
    }

    pub fn has(&self, i: usize, j: usize) -> bool {
        self.mask[(i, j)] == 1
    }

    pub fn degree(&self, i: usize) -> usize {
        self.mask.row(i).iter().filter(|&&v| v == 1).count()
    }

    pub fn mask(&self) -> &DMatrix<u8> {
        &self.mask
    }

    /// Directed edge list `(i, j)` with `A_ij = 1`, row-major.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.n();
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.has(i, j))
            .collect()
    }

    pub fn as_real(&self) -> DMatrix<f64> {
        self.mask.map(f64::from)
    }
}

/// Applies `raw`, `row` (D⁻¹A) or `symmetric` (D^{-1/2} A D^{-1/2}) scaling.
///
/// Nodes with no neighbours keep an all-zero row.
pub fn normalize_adjacency(adjacency: &Adjacency, mode: Normalization) -> DMatrix<f64> {
    let a = adjacency.as_real();
    let deg: Vec<f64> = (0..adjacency.n()).map(|i| adjacency.degree(i) as f64).collect();
    match mode {
        Normalization::Raw => a,
        Normalization::Row => DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| {
            if deg[i] > 0.0 {
                a[(i, j)] / deg[i]
            } else {
                0.0
            }
        }),
        Normalization::Symmetric => DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| {
            if deg[i] > 0.0 && deg[j] > 0.0 {
                a[(i, j)] / (deg[i] * deg[j]).sqrt()
            } else {
                0.0
            }
        }),
    }
}

/// Per-step drive.
#[derive(Debug, Clone, PartialEq)]
pub enum InputSignal {
    /// Complex forcing added to the coupling term.
    Additive(Vec<Complex64>),
    /// Replaces α with α + u for this step.
    AlphaMod(Vec<f64>),
    /// Replaces ω with ω + u for this step.
    OmegaMod(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputMode {
    Additive,
    AlphaMod,
    OmegaMod,
}

impl InputSignal {
    pub fn len(&self) -> usize {
        match self {
            InputSignal::Additive(v) => v.len(),
            InputSignal::AlphaMod(v) | InputSignal::OmegaMod(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mode(&self) -> InputMode {
        match self {
            InputSignal::Additive(_) => InputMode::Additive,
            InputSignal::AlphaMod(_) => InputMode::AlphaMod,
            InputSignal::OmegaMod(_) => InputMode::OmegaMod,
        }
    }

    /// Builds a signal of the given mode from real drive values; additive
    /// drive is applied along the real axis.
    pub fn from_real(mode: InputMode, u: Vec<f64>) -> Self {
        match mode {
            InputMode::Additive => InputSignal::Additive(u.into_iter().map(|v| Complex64::new(v, 0.0)).collect()),
            InputMode::AlphaMod => InputSignal::AlphaMod(u),
            InputMode::OmegaMod => InputSignal::OmegaMod(u),
        }
    }
}

/// Scalar dynamical parameters shared by every node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dynamics {
    pub alpha: f64,
    pub beta: f64,
    pub gamma_shear: f64,
    pub kappa: f64,
    pub sakaguchi_lag: f64,
    pub normalization: Normalization,
    pub kernel: Kernel,
    pub beta_coh: f64,
    pub delay_steps: usize,
}

impl Default for Dynamics {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            gamma_shear: 0.0,
            kappa: 0.5,
            sakaguchi_lag: 0.0,
            normalization: Normalization::Row,
            kernel: Kernel::Diffusive,
            beta_coh: 3.0,
            delay_steps: 0,
        }
    }
}

impl Dynamics {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::param("alpha", "must be > 0"));
        }
        if !(self.beta > 0.0) {
            return Err(Error::param("beta", "must be > 0"));
        }
        if !self.kappa.is_finite() || self.kappa < 0.0 {
            return Err(Error::param("kappa", "must be finite and >= 0"));
        }
        if self.kernel != Kernel::Diffusive && !(self.beta_coh > 0.0) {
            return Err(Error::param("beta_coh", "must be > 0 for gated kernels"));
        }
        Ok(())
    }

    /// Limit-cycle radius √(α/β).
    pub fn radius(&self) -> f64 {
        (self.alpha / self.beta).sqrt()
    }
}

/// One IMEX step for a single node.
///
/// `drive` collects the explicit terms other than `αz` (coupling and
/// additive forcing). The cubic term is divided out using the pre-step
/// amplitude and the rotation `ω − γ|z|²` is applied exactly, so the
/// uncoupled fixed point is `|z|² = α/β` for every `dt`.
#[inline]
pub fn imex_node(z: Complex64, alpha: f64, omega: f64, beta: f64, gamma: f64, drive: Complex64, dt: f64) -> Complex64 {
    let r2 = z.norm_sqr();
    let explicit = z + (z * alpha + drive) * dt;
    let rotation = phase::unit((omega - gamma * r2) * dt);
    rotation * explicit / (1.0 + dt * beta * r2)
}

/// Complex states, structure, couplings and delay history.
#[derive(Debug, Clone)]
pub struct PhasorGraph {
    pub z: Vec<Complex64>,
    pub omega: Vec<f64>,
    pub dynamics: Dynamics,
    /// Learnable real couplings; only entries on structural edges matter.
    pub weights: DMatrix<f64>,
    adjacency: Adjacency,
    norm_adj: DMatrix<f64>,
    neighbours: Vec<Vec<usize>>,
    history: VecDeque<Vec<Complex64>>,
    fallbacks: u64,
    steps: u64,
}

impl PhasorGraph {
    /// Creates a graph with `W = A` (unit weight on every edge).
    pub fn new(adjacency: Adjacency, omega: Vec<f64>, dynamics: Dynamics, z0: Vec<Complex64>) -> Result<Self> {
        dynamics.validate()?;
        let n = adjacency.n();
        for len in [omega.len(), z0.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, got: len });
            }
        }
        if z0.iter().any(|v| !v.is_finite()) || omega.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("initial state and frequencies must be finite".into()));
        }
        let norm_adj = normalize_adjacency(&adjacency, dynamics.normalization);
        let neighbours = (0..n).map(|i| (0..n).filter(|&j| adjacency.has(i, j)).collect()).collect();
        let history = std::iter::repeat_n(z0.clone(), dynamics.delay_steps).collect();
        Ok(Self {
            weights: adjacency.as_real(),
            z: z0,
            omega,
            dynamics,
            adjacency,
            norm_adj,
            neighbours,
            history,
            fallbacks: 0,
            steps: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn adjacency(&self) -> &Adjacency {
        &self.adjacency
    }

    pub fn normalized_adjacency(&self) -> &DMatrix<f64> {
        &self.norm_adj
    }

    pub fn set_normalization(&mut self, mode: Normalization) {
        self.dynamics.normalization = mode;
        self.norm_adj = normalize_adjacency(&self.adjacency, mode);
    }

    /// Delay ring, oldest first. Empty when `delay_steps == 0`.
    pub fn history(&self) -> &VecDeque<Vec<Complex64>> {
        &self.history
    }

    /// Overwrites every slot of the delay ring with `z`.
    pub fn fill_history(&mut self, z: &[Complex64]) {
        for slot in self.history.iter_mut() {
            slot.copy_from_slice(z);
        }
    }

    /// Number of gated-kernel evaluations that fell back to the diffusive form.
    pub fn fallback_count(&self) -> u64 {
        self.fallbacks
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps
    }

    pub fn phases(&self) -> Vec<f64> {
        self.z.iter().map(|v| v.arg()).collect()
    }

    pub fn amplitudes(&self) -> Vec<f64> {
        self.z.iter().map(|v| v.norm()).collect()
    }

    /// State seen by the coupling term: the delayed state when a delay is set.
    fn source_state(&self) -> &[Complex64] {
        self.history.front().map_or(&self.z, |v| v.as_slice())
    }

    /// Coupling field under the configured kernel (before multiplying by κ).
    pub fn coupling_field(&mut self) -> Vec<Complex64> {
        let kernel = self.dynamics.kernel;
        let beta_coh = self.dynamics.beta_coh;
        self.coupling_field_with(kernel, beta_coh)
    }

    /// Coupling field under an explicit kernel choice.
    pub fn coupling_field_with(&mut self, kernel: Kernel, beta_coh: f64) -> Vec<Complex64> {
        let src = self.source_state();
        let lag = phase::unit(self.dynamics.sakaguchi_lag);
        let mut out = Vec::with_capacity(self.n());
        let mut fallbacks = 0;
        let mut contribs = Vec::new();
        for i in 0..self.n() {
            let zi = self.z[i];
            let diffusive = || {
                self.neighbours[i]
                    .iter()
                    .map(|&j| (lag * src[j] - zi) * (self.norm_adj[(i, j)] * self.weights[(i, j)]))
                    .sum::<Complex64>()
            };
            let value = match kernel {
                Kernel::Diffusive => diffusive(),
                Kernel::GateOnly | Kernel::GateRotate => {
                    contribs.clear();
                    contribs.extend(
                        self.neighbours[i]
                            .iter()
                            .map(|&j| lag * src[j] * (self.norm_adj[(i, j)] * self.weights[(i, j)])),
                    );
                    match gated_node_field(&contribs, kernel, beta_coh) {
                        Some(f) => f,
                        None => {
                            fallbacks += 1;
                            diffusive()
                        }
                    }
                }
            };
            out.push(value);
        }
        self.fallbacks += fallbacks;
        out
    }

    /// Advances one IMEX step using the configured kernel.
    pub fn step(&mut self, input: Option<&InputSignal>, dt: f64) -> Result<()> {
        let field = if self.dynamics.kappa == 0.0 {
            vec![Complex64::new(0.0, 0.0); self.n()]
        } else {
            self.coupling_field()
        };
        self.step_with_field(&field, input, dt)
    }

    /// Advances one IMEX step with a caller-supplied coupling field `f`
    /// (scaled by κ inside).
    pub fn step_with_field(&mut self, field: &[Complex64], input: Option<&InputSignal>, dt: f64) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::param("dt", "must be > 0"));
        }
        let n = self.n();
        if field.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: field.len() });
        }
        if let Some(inp) = input {
            if inp.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: inp.len() });
            }
        }
        let d = &self.dynamics;
        let mut next = Vec::with_capacity(n);
        for i in 0..n {
            let mut alpha = d.alpha;
            let mut omega = self.omega[i];
            let mut drive = field[i] * d.kappa;
            match input {
                Some(InputSignal::Additive(u)) => drive += u[i],
                Some(InputSignal::AlphaMod(u)) => alpha += u[i],
                Some(InputSignal::OmegaMod(u)) => omega += u[i],
                None => {}
            }
            let zn = imex_node(self.z[i], alpha, omega, d.beta, d.gamma_shear, drive, dt);
            if !zn.is_finite() {
                return Err(Error::IntegrationDivergence { node: i, step: self.steps });
            }
            next.push(zn);
        }
        if !self.history.is_empty() {
            self.history.pop_front();
            self.history.push_back(std::mem::replace(&mut self.z, next));
        } else {
            self.z = next;
        }
        self.steps += 1;
        Ok(())
    }

    pub fn order_parameter(&self) -> Result<f64> {
        phase::order_parameter(&self.z).ok_or(Error::AmplitudeDeath { threshold: AMPLITUDE_EPS })
    }

    pub fn diagnostics(&self, target_band: (f64, f64), window: &[f64]) -> Result<GraphDiagnostics> {
        let order_parameter = self.order_parameter()?;
        let amps = self.amplitudes();
        let n = amps.len() as f64;
        let amp_mean = amps.iter().sum::<f64>() / n;
        let amp_var = amps.iter().map(|a| (a - amp_mean).powi(2)).sum::<f64>() / n;
        let (lo, hi) = target_band;
        let band_occupancy = if window.is_empty() {
            0.0
        } else {
            window.iter().filter(|&&r| r >= lo && r <= hi).count() as f64 / window.len() as f64
        };
        let edge_weights = self.adjacency.edges().into_iter().map(|(i, j)| self.weights[(i, j)]);
        let (sq, max_abs) = edge_weights.fold((0.0, 0.0f64), |(s, m), w| (s + w * w, m.max(w.abs())));
        Ok(GraphDiagnostics {
            order_parameter,
            weight_frobenius: sq.sqrt(),
            weight_max_abs: max_abs,
            amp_mean,
            amp_var,
            band_occupancy,
            kernel_fallbacks: self.fallbacks,
        })
    }

    /// Frobenius norm of the effective couplings `A ⊙ W`.
    pub fn weight_norm(&self) -> f64 {
        frobenius_on_edges(&self.weights, &self.adjacency)
    }

    /// Writes `step,node,re,im` rows for the current state.
    pub fn write_snapshot<W: Write>(&self, out: &mut W, step: u64) -> io::Result<()> {
        for (i, v) in self.z.iter().enumerate() {
            writeln!(out, "{step},{i},{},{}", v.re, v.im)?;
        }
        Ok(())
    }
}

pub fn frobenius_on_edges(w: &DMatrix<f64>, adjacency: &Adjacency) -> f64 {
    adjacency
        .edges()
        .into_iter()
        .map(|(i, j)| w[(i, j)].powi(2))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDiagnostics {
    pub order_parameter: f64,
    pub weight_frobenius: f64,
    pub weight_max_abs: f64,
    pub amp_mean: f64,
    pub amp_var: f64,
    pub band_occupancy: f64,
    pub kernel_fallbacks: u64,
}
