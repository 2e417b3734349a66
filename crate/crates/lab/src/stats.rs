//! Small descriptive statistics and the one-sided Welch test.

use statrs::distribution::{ContinuousCDF, StudentsT};

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    mean(&x.iter().map(|v| (v - m).powi(2)).collect::<Vec<_>>())
}

/// Unbiased sample variance.
pub fn sample_variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return f64::NAN;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    /// One-sided p for H1: mean(a) > mean(b).
    pub p_greater: f64,
}

pub fn welch_greater(a: &[f64], b: &[f64]) -> Option<WelchTest> {
    let (va, vb) = (sample_variance(a) / a.len() as f64, sample_variance(b) / b.len() as f64);
    let se2 = va + vb;
    if !se2.is_finite() || se2 <= 0.0 {
        return None;
    }
    let t = (mean(a) - mean(b)) / se2.sqrt();
    let df = se2.powi(2) / (va.powi(2) / (a.len() - 1) as f64 + vb.powi(2) / (b.len() - 1) as f64);
    let dist = StudentsT::new(0.0, 1.0, df).ok()?;
    Some(WelchTest { t, df, p_greater: 1.0 - dist.cdf(t) })
}

/// Index of the first trial at which the trailing `window`-trial accuracy
/// reaches `level`, counted in trials (1-based). `None` if never.
pub fn trials_to_criterion(correct: &[bool], window: usize, level: f64) -> Option<usize> {
    if window == 0 || correct.len() < window {
        return None;
    }
    let mut hits = correct[..window].iter().filter(|&&c| c).count();
    if hits as f64 / window as f64 >= level {
        return Some(window);
    }
    for t in window..correct.len() {
        hits += usize::from(correct[t]);
        hits -= usize::from(correct[t - window]);
        if hits as f64 / window as f64 >= level {
            return Some(t + 1);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert!((variance(&[1.0, 2.0, 3.0]) - 2.0 / 3.0).abs() < 1e-15);
        assert!((sample_variance(&[1.0, 2.0, 3.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn welch_matches_reference_value() {
        // Reference computed with the textbook formula by hand:
        // means 3 and 2, variances 2.5 and 2.5, n = 5 each -> t = 1, df = 8.
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [0.0, 1.0, 2.0, 3.0, 4.0];
        let w = welch_greater(&a, &b).unwrap();
        assert!((w.t - 1.0).abs() < 1e-12);
        assert!((w.df - 8.0).abs() < 1e-12);
        // P(T_8 > 1) = 0.17329...
        assert!((w.p_greater - 0.173_296).abs() < 1e-5);
    }

    #[test]
    fn criterion_window() {
        let c = [false, true, true, true, false, true, true, true];
        assert_eq!(trials_to_criterion(&c, 3, 1.0), Some(4));
        assert_eq!(trials_to_criterion(&c, 4, 1.0), None);
        assert_eq!(trials_to_criterion(&c, 2, 0.5), Some(2));
    }
}
