//! Ridge-regression linear classifier shared by the substrate experiments.

use nalgebra::{DMatrix, DVector};

/// One-vs-all ridge classifier on raw features plus a bias column.
#[derive(Debug, Clone)]
pub struct RidgeClassifier {
    w: DMatrix<f64>,
}

impl RidgeClassifier {
    pub fn fit(features: &[Vec<f64>], labels: &[usize], classes: usize, ridge: f64) -> Option<Self> {
        let x = design(features)?;
        let mut y = DMatrix::zeros(labels.len(), classes);
        for (r, &l) in labels.iter().enumerate() {
            y[(r, l)] = 1.0;
        }
        let gram = x.transpose() * &x + DMatrix::identity(x.ncols(), x.ncols()) * ridge;
        let w = gram.cholesky()?.solve(&(x.transpose() * y));
        Some(Self { w })
    }

    pub fn predict(&self, feature: &[f64]) -> usize {
        let x = DVector::from_iterator(feature.len() + 1, feature.iter().copied().chain(std::iter::once(1.0)));
        let scores = self.w.transpose() * x;
        // Lowest index wins ties.
        let mut best = 0;
        for i in 1..scores.len() {
            if scores[i] > scores[best] {
                best = i;
            }
        }
        best
    }

    pub fn accuracy(&self, features: &[Vec<f64>], labels: &[usize]) -> f64 {
        let hits = features.iter().zip(labels).filter(|(x, &l)| self.predict(x) == l).count();
        hits as f64 / labels.len().max(1) as f64
    }
}

fn design(features: &[Vec<f64>]) -> Option<DMatrix<f64>> {
    let d = features.first()?.len();
    Some(DMatrix::from_fn(features.len(), d + 1, |r, c| if c == d { 1.0 } else { features[r][c] }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_classes_are_learned() {
        let xs = vec![vec![0.0, 1.0], vec![0.1, 0.9], vec![1.0, 0.0], vec![0.9, 0.1]];
        let ys = vec![0, 0, 1, 1];
        let clf = RidgeClassifier::fit(&xs, &ys, 2, 1e-6).unwrap();
        assert_eq!(clf.accuracy(&xs, &ys), 1.0);
    }
}
