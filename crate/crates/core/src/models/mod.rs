//! Built-in base predictors.
//!
//! The conformal layer only relies on [`PointPredictor`] (regression) and on
//! [`ClassProbabilities`] produced by a classifier, so any model can be
//! plugged in behind those contracts.

mod knn;
mod quantile_reg;
mod softmax;

pub use knn::{fit_residual_model, KnnRegressor};
pub use quantile_reg::{pinball_loss, pinball_subgradient, QuantileFitConfig, QuantileModel};
pub use softmax::{cross_entropy_gradient, cross_entropy_loss, SoftmaxClassifier, SoftmaxFitConfig};

use serde::Serialize;

use crate::dataset::Dataset;
use crate::{Error, Execution, Result};

/// A fitted real-valued model `f(x)`.
pub trait PointPredictor: Send + Sync {
    fn predict(&self, x: &[f64]) -> f64;

    /// Predictions for every row of `data`, in row order.
    fn predict_all(&self, data: &Dataset, exec: Execution) -> Vec<f64> {
        exec.map_range(data.n_samples(), |i| self.predict(data.row(i)))
    }
}

/// A probability vector over `K` classes.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ClassProbabilities(Vec<f64>);

impl ClassProbabilities {
    /// Entries must lie in `[0, 1]` and sum to 1 within 1e-9.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 class probabilities, got {}",
                probs.len()
            )));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidParameter(format!("probabilities outside [0, 1]: {probs:?}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("probabilities sum to {sum}")));
        }
        Ok(Self(probs))
    }

    /// Numerically stable softmax of `logits`.
    pub fn from_logits(logits: &[f64]) -> Self {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        Self(exps.into_iter().map(|e| e / total).collect())
    }

    pub fn uniform(n_classes: usize) -> Self {
        Self(vec![1.0 / n_classes as f64; n_classes])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn n_classes(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, class: usize) -> Result<f64> {
        self.0.get(class).copied().ok_or(Error::ClassOutOfRange {
            index: class,
            n_classes: self.0.len(),
        })
    }

    /// Class indices by descending probability; ties go to the lower index.
    pub fn descending_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.0.len()).collect();
        order.sort_by(|&a, &b| self.0[b].total_cmp(&self.0[a]).then(a.cmp(&b)));
        order
    }

    pub fn argmax(&self) -> usize {
        self.descending_order()[0]
    }
}

/// Per-feature standardization fitted on training rows. Zero-variance
/// features get scale 0 and are ignored by the affine models.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub(crate) struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: &Dataset) -> Self {
        let n = data.n_samples() as f64;
        let d = data.n_features();
        let mut means = vec![0.0; d];
        for row in data.rows() {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut scales = vec![0.0; d];
        for row in data.rows() {
            for ((s, v), m) in scales.iter_mut().zip(row).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut scales {
            let sd = (*s / n).sqrt();
            *s = if sd > 1e-12 { sd } else { 0.0 };
        }
        Self { means, scales }
    }

    pub fn dropped(&self) -> Vec<usize> {
        (0..self.scales.len()).filter(|&j| self.scales[j] == 0.0).collect()
    }

    /// Row-major standardized copy of the features; dropped columns become 0.
    pub fn transform(&self, data: &Dataset) -> Vec<f64> {
        let mut out = Vec::with_capacity(data.features().len());
        for row in data.rows() {
            for ((v, m), s) in row.iter().zip(&self.means).zip(&self.scales) {
                out.push(if *s > 0.0 { (v - m) / s } else { 0.0 });
            }
        }
        out
    }

    /// Maps standardized affine weights `[b, w_1..w_d]` to raw-feature weights.
    pub fn to_raw_weights(&self, w: &[f64]) -> Vec<f64> {
        let mut raw = vec![0.0; w.len()];
        raw[0] = w[0];
        for j in 0..self.means.len() {
            if self.scales[j] > 0.0 {
                raw[j + 1] = w[j + 1] / self.scales[j];
                raw[0] -= w[j + 1] * self.means[j] / self.scales[j];
            }
        }
        raw
    }
}

pub(crate) fn affine(weights: &[f64], x: &[f64]) -> f64 {
    weights[0] + weights[1..].iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probabilities_validate() {
        assert!(ClassProbabilities::new(vec![0.7, 0.2, 0.1]).is_ok());
        assert!(ClassProbabilities::new(vec![0.7, 0.2]).is_err());
        assert!(ClassProbabilities::new(vec![1.2, -0.2]).is_err());
        assert!(ClassProbabilities::new(vec![1.0]).is_err());
    }

    #[test]
    fn softmax_of_logits_normalizes() {
        let p = ClassProbabilities::from_logits(&[1000.0, 999.0, -5.0]);
        let sum: f64 = p.as_slice().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert_eq!(p.argmax(), 0);
    }

    #[test]
    fn descending_order_breaks_ties_by_index() {
        let p = ClassProbabilities::new(vec![0.25, 0.25, 0.4, 0.1]).unwrap();
        assert_eq!(p.descending_order(), vec![2, 0, 1, 3]);
    }
}
