//! Deterministic phasor codes for discrete observations.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{InputMode, InputSignal};
use crate::phase;
use crate::rng::StreamRng;

/// One random unit-phasor code per state, drawn once from a keyed stream.
#[derive(Debug, Clone, PartialEq)]
pub struct StateCodebook {
    codes: Vec<Vec<Complex64>>,
}

impl StateCodebook {
    pub fn new(states: usize, dim: usize, rng: &mut StreamRng) -> Self {
        let codes = (0..states)
            .map(|_| (0..dim).map(|_| phase::unit(rng.random_range(-PI..PI))).collect())
            .collect();
        Self { codes }
    }

    pub fn states(&self) -> usize {
        self.codes.len()
    }

    pub fn dim(&self) -> usize {
        self.codes.first().map_or(0, Vec::len)
    }

    pub fn code(&self, state: usize) -> &[Complex64] {
        &self.codes[state]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodingParams {
    pub mode: InputMode,
    /// Drive scale: frequency offset (ω-mod), gain offset (α-mod) or forcing
    /// magnitude (additive).
    pub gain: f64,
}

impl Default for EncodingParams {
    fn default() -> Self {
        Self {
            mode: InputMode::OmegaMod,
            gain: 0.2,
        }
    }
}

/// Drive for the first `nodes` entries of the state's code.
///
/// Modulation modes use `gain · sin θ_i` (ω) or `gain · cos θ_i` (α);
/// additive forcing is `gain · e^{iθ_i}`.
pub fn encode_observation(book: &StateCodebook, state: usize, nodes: usize, params: &EncodingParams) -> InputSignal {
    let code = &book.code(state)[..nodes.min(book.dim())];
    match params.mode {
        InputMode::OmegaMod => InputSignal::OmegaMod(code.iter().map(|v| params.gain * v.arg().sin()).collect()),
        InputMode::AlphaMod => InputSignal::AlphaMod(code.iter().map(|v| params.gain * v.arg().cos()).collect()),
        InputMode::Additive => InputSignal::Additive(code.iter().map(|v| v * params.gain).collect()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn codes_are_deterministic_and_distinct() {
        let a = StateCodebook::new(64, 16, &mut stream_rng("codes", 0, "book"));
        let b = StateCodebook::new(64, 16, &mut stream_rng("codes", 0, "book"));
        assert_eq!(a, b);
        let p = EncodingParams::default();
        assert_eq!(encode_observation(&a, 5, 16, &p), encode_observation(&a, 5, 16, &p));
        let signals: Vec<InputSignal> = (0..64).map(|s| encode_observation(&a, s, 16, &p)).collect();
        for i in 0..64 {
            for j in (i + 1)..64 {
                assert_ne!(signals[i], signals[j], "states {i} and {j} collide");
            }
        }
    }
}
