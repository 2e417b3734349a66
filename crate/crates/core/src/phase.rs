//! Angle helpers shared by every module.

use std::f64::consts::PI;

use num_complex::Complex64;

/// Amplitudes below this are treated as zero when a phase is required.
pub const AMPLITUDE_EPS: f64 = 1e-12;

/// Wraps an angle into the principal interval (-π, π].
pub fn wrap(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Unit phasor e^{iφ}.
#[inline]
pub fn unit(phase: f64) -> Complex64 {
    Complex64::from_polar(1.0, phase)
}

/// Kuramoto order parameter R = |mean(z/|z|)| over nodes with usable amplitude.
///
/// Returns `None` when every amplitude is below [`AMPLITUDE_EPS`].
pub fn order_parameter(z: &[Complex64]) -> Option<f64> {
    let (sum, count) = z
        .iter()
        .filter(|v| v.norm() >= AMPLITUDE_EPS)
        .fold((Complex64::new(0.0, 0.0), 0usize), |(s, c), v| (s + v / v.norm(), c + 1));
    (count > 0).then(|| (sum / count as f64).norm().min(1.0))
}

/// Phase of the mean field arg(Σ z), `None` when the field vanishes.
pub fn mean_field_phase(z: &[Complex64]) -> Option<f64> {
    let s: Complex64 = z.iter().sum();
    (s.norm() >= AMPLITUDE_EPS).then(|| s.arg())
}

/// Pearson correlation; `None` if either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len().min(b.len());
    if n < 2 {
        return None;
    }
    let ma = a[..n].iter().sum::<f64>() / n as f64;
    let mb = b[..n].iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for k in 0..n {
        let da = a[k] - ma;
        let db = b[k] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_is_half_open() {
        assert_eq!(wrap(PI), PI);
        assert!((wrap(-PI) - PI).abs() < 1e-15);
        assert!((wrap(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap(0.25) - 0.25).abs() < 1e-15);
        assert!((wrap(-0.25) + 0.25).abs() < 1e-15);
    }

    #[test]
    fn order_parameter_extremes() {
        let aligned: Vec<_> = (0..5).map(|_| unit(0.7)).collect();
        assert!((order_parameter(&aligned).unwrap() - 1.0).abs() < 1e-12);
        let spread: Vec<_> = (0..4).map(|k| unit(k as f64 * PI / 2.0)).collect();
        assert!(order_parameter(&spread).unwrap() < 1e-12);
        assert!(order_parameter(&[Complex64::new(0.0, 0.0)]).is_none());
    }
}
