//! Modern Hopfield network: softmax attention over stored patterns.

use nalgebra::{DMatrix, DVector};

/// Stored bipolar patterns as rows plus an inverse temperature.
#[derive(Debug, Clone)]
pub struct ModernHopfield {
    patterns: DMatrix<f64>,
    pub beta: f64,
}

impl ModernHopfield {
    pub fn new(patterns: &[Vec<f64>], beta: f64) -> Self {
        let n = patterns.first().map_or(0, Vec::len);
        let rows = patterns.len();
        Self {
            patterns: DMatrix::from_fn(rows, n, |p, i| patterns[p][i]),
            beta,
        }
    }

    /// One update `ξ ← Xᵀ softmax(β X ξ / √N)`.
    pub fn update(&self, xi: &DVector<f64>) -> DVector<f64> {
        let n = self.patterns.ncols() as f64;
        let scores = (&self.patterns * xi) * (self.beta / n.sqrt());
        let max = scores.max();
        let weights = scores.map(|s| (s - max).exp());
        let total = weights.sum();
        self.patterns.transpose() * (weights / total)
    }

    /// Iterates to a fixed point (or `max_iters`) and returns the sign pattern.
    pub fn retrieve(&self, query: &[f64], max_iters: usize) -> Vec<f64> {
        let mut xi = DVector::from_column_slice(query);
        for _ in 0..max_iters {
            let next = self.update(&xi);
            let moved = (&next - &xi).amax();
            xi = next;
            if moved < 1e-10 {
                break;
            }
        }
        xi.iter().map(|&v| if v >= 0.0 { 1.0 } else { -1.0 }).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn retrieves_the_nearest_pattern() {
        let a = vec![1.0, 1.0, -1.0, -1.0, 1.0, -1.0, 1.0, 1.0];
        let b = vec![-1.0, 1.0, 1.0, -1.0, -1.0, -1.0, 1.0, -1.0];
        let net = ModernHopfield::new(&[a.clone(), b], 8.0);
        let mut q = a.clone();
        q[0] = -1.0;
        assert_eq!(net.retrieve(&q, 20), a);
    }
}
