//! Compression-progress pulses and the timestamp-shuffle control.
//!
//! The detector sees only a scalar loss stream; whatever produces the loss
//! (a forecaster of external input) lives with the caller.

use std::collections::VecDeque;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressParams {
    pub window_len: usize,
    pub stride: usize,
    pub threshold: f64,
    pub refractory: u64,
    pub pulse_gain: f64,
    pub pulse_cap: f64,
}

impl ProgressParams {
    /// Non-overlapping windows with refractory period `L`.
    pub fn with_window(window_len: usize) -> Self {
        Self {
            window_len,
            stride: window_len,
            threshold: 0.05,
            refractory: window_len as u64,
            pulse_gain: 1.0,
            pulse_cap: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_len == 0 {
            return Err(Error::param("window_len", "must be >= 1"));
        }
        if self.stride == 0 {
            return Err(Error::param("stride", "must be >= 1"));
        }
        if !(self.threshold >= 0.0) {
            return Err(Error::param("threshold", "must be >= 0"));
        }
        if !(self.pulse_cap > 0.0) {
            return Err(Error::param("pulse_cap", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub step: u64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub step: u64,
    pub delta: f64,
    pub emitted: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ProgressDetector {
    params: ProgressParams,
    buffer: VecDeque<f64>,
    observed: usize,
    last_pulse: Option<u64>,
    log: Vec<Evaluation>,
}

impl ProgressDetector {
    pub fn new(params: ProgressParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            buffer: VecDeque::with_capacity(2 * params.window_len),
            params,
            observed: 0,
            last_pulse: None,
            log: Vec::new(),
        })
    }

    pub fn params(&self) -> &ProgressParams {
        &self.params
    }

    pub fn last_pulse_step(&self) -> Option<u64> {
        self.last_pulse
    }

    /// Every evaluation so far, including those that did not fire.
    pub fn evaluations(&self) -> &[Evaluation] {
        &self.log
    }

    pub fn pulses(&self) -> Vec<Pulse> {
        self.log
            .iter()
            .filter_map(|e| e.emitted.map(|a| Pulse { step: e.step, amplitude: a }))
            .collect()
    }

    /// Pushes one loss; returns a pulse amplitude when progress is detected.
    pub fn observe(&mut self, step: u64, loss: f64) -> Result<Option<f64>> {
        if !(loss >= 0.0) || !loss.is_finite() {
            return Err(Error::InvalidInput(format!("loss must be finite and >= 0, got {loss}")));
        }
        let l = self.params.window_len;
        if self.buffer.len() == 2 * l {
            self.buffer.pop_front();
        }
        self.buffer.push_back(loss);
        self.observed += 1;
        if self.observed < 2 * l || (self.observed - 2 * l) % self.params.stride != 0 {
            return Ok(None);
        }
        let prev = self.buffer.iter().take(l).sum::<f64>() / l as f64;
        let curr = self.buffer.iter().skip(l).sum::<f64>() / l as f64;
        let delta = prev - curr;
        let rested = self.last_pulse.is_none_or(|last| step.saturating_sub(last) >= self.params.refractory);
        let emitted = (delta > self.params.threshold && rested).then(|| (self.params.pulse_gain * delta).min(self.params.pulse_cap));
        if emitted.is_some() {
            self.last_pulse = Some(step);
        }
        self.log.push(Evaluation { step, delta, emitted });
        Ok(emitted)
    }

    /// `step,delta,amplitude,shuffled` rows for the evaluation log.
    pub fn csv_rows(&self) -> Vec<String> {
        self.log
            .iter()
            .map(|e| format!("{},{},{},false", e.step, e.delta, e.emitted.unwrap_or(0.0)))
            .collect()
    }
}

/// Redistributes the pulses over distinct times drawn without replacement
/// from `candidates`, keeping the amplitude multiset.
pub fn shuffle_onto<R: Rng + ?Sized>(pulses: &[Pulse], candidates: &[u64], rng: &mut R) -> Result<Vec<Pulse>> {
    if candidates.len() < pulses.len() {
        return Err(Error::InvalidInput(format!(
            "{} pulses cannot be placed on {} distinct times",
            pulses.len(),
            candidates.len()
        )));
    }
    let mut amplitudes: Vec<f64> = pulses.iter().map(|p| p.amplitude).collect();
    amplitudes.shuffle(rng);
    let mut out: Vec<Pulse> = index::sample(rng, candidates.len(), pulses.len())
        .into_iter()
        .zip(amplitudes)
        .map(|(k, amplitude)| Pulse { step: candidates[k], amplitude })
        .collect();
    out.sort_by_key(|p| p.step);
    Ok(out)
}

/// Shuffle over `0..horizon`.
pub fn shuffle_schedule<R: Rng + ?Sized>(pulses: &[Pulse], horizon: u64, rng: &mut R) -> Result<Vec<Pulse>> {
    let candidates: Vec<u64> = (0..horizon).collect();
    shuffle_onto(pulses, &candidates, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use proptest::prelude::*;

    fn params(l: usize) -> ProgressParams {
        ProgressParams {
            threshold: 0.05,
            ..ProgressParams::with_window(l)
        }
    }

    #[test]
    fn two_window_drop_emits_difference() {
        let mut d = ProgressDetector::new(params(4)).unwrap();
        let mut out = None;
        for t in 0..8u64 {
            out = d.observe(t, if t < 4 { 0.5 } else { 0.3 }).unwrap();
        }
        assert!((out.unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(d.evaluations().len(), 1);
    }

    #[test]
    fn constant_loss_never_pulses() {
        let mut d = ProgressDetector::new(params(5)).unwrap();
        for t in 0..500 {
            assert_eq!(d.observe(t, 0.7).unwrap(), None);
        }
        assert!(d.evaluations().iter().all(|e| e.delta == 0.0));
    }

    #[test]
    fn refractory_limits_rate_on_a_ramp() {
        let l = 10;
        let mut p = params(l);
        p.refractory = 3 * l as u64;
        p.threshold = 0.0;
        let mut d = ProgressDetector::new(p).unwrap();
        let steps = 1000u64;
        for t in 0..steps {
            d.observe(t, 10.0 - t as f64 * 0.01).unwrap();
        }
        let pulses = d.pulses();
        // Oracle: evaluations at 2L−1, 3L−1, …; each fires iff 3L steps have passed.
        let mut expected = Vec::new();
        let mut last: Option<u64> = None;
        for t in ((2 * l as u64 - 1)..steps).step_by(l) {
            if last.is_none_or(|s| t - s >= 3 * l as u64) {
                expected.push(t);
                last = Some(t);
            }
        }
        assert_eq!(pulses.iter().map(|p| p.step).collect::<Vec<_>>(), expected);
        assert!(pulses.windows(2).all(|w| w[1].step - w[0].step >= 3 * l as u64));
    }

    #[test]
    fn rejects_negative_loss() {
        let mut d = ProgressDetector::new(params(2)).unwrap();
        assert!(d.observe(0, -1.0).is_err());
    }

    #[test]
    fn shuffle_examples() {
        let mut rng = stream_rng("progress", 0, "shuffle");
        assert!(shuffle_schedule(&[], 10, &mut rng).unwrap().is_empty());
        let one = shuffle_schedule(&[Pulse { step: 3, amplitude: 0.4 }], 50, &mut rng).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].amplitude, 0.4);
        assert!(one[0].step < 50);
        assert!(shuffle_schedule(&[Pulse { step: 0, amplitude: 1.0 }; 3], 2, &mut rng).is_err());
    }

    proptest! {
        #[test]
        fn shuffle_preserves_budget(amps in prop::collection::vec(0.0f64..1.0, 0..10), horizon in 10u64..500, seed in 0u64..100) {
            let pulses: Vec<Pulse> = amps.iter().enumerate().map(|(k, &a)| Pulse { step: k as u64, amplitude: a }).collect();
            let out = shuffle_schedule(&pulses, horizon, &mut stream_rng("progress", seed, "p")).unwrap();
            let sorted = |v: Vec<f64>| { let mut v = v; v.sort_by(f64::total_cmp); v };
            let (a, b) = (sorted(out.iter().map(|p| p.amplitude).collect()), sorted(amps.clone()));
            prop_assert_eq!(a.iter().sum::<f64>(), b.iter().sum::<f64>());
            prop_assert_eq!(a, b);
            let mut steps: Vec<u64> = out.iter().map(|p| p.step).collect();
            steps.dedup();
            prop_assert_eq!(steps.len(), pulses.len());
            prop_assert!(out.iter().all(|p| p.step < horizon));
        }

        #[test]
        fn inter_pulse_interval_respects_refractory(losses in prop::collection::vec(0.0f64..1.0, 50..400),
                                                    l in 1usize..8, s in 1usize..8, refr in 0u64..40) {
            let mut p = ProgressParams { stride: s, refractory: refr, threshold: 0.0, ..ProgressParams::with_window(l) };
            p.pulse_cap = 10.0;
            let mut d = ProgressDetector::new(p).unwrap();
            for (t, &x) in losses.iter().enumerate() {
                d.observe(t as u64, x).unwrap();
            }
            prop_assert!(d.pulses().windows(2).all(|w| w[1].step - w[0].step >= refr));
        }
    }
}
