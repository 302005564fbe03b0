use serde::{Deserialize, Serialize};

use super::{affine, ClassProbabilities, Standardizer};
use crate::dataset::{Dataset, Targets};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxFitConfig {
    pub steps: usize,
    pub step_size: f64,
}

impl Default for SoftmaxFitConfig {
    fn default() -> Self {
        Self {
            steps: 500,
            step_size: 0.5,
        }
    }
}

/// Multinomial logistic regression.
#[derive(Debug, Clone, Serialize)]
pub struct SoftmaxClassifier {
    n_classes: usize,
    n_features: usize,
    /// Row-major `K × (D + 1)`; row `c` is `[b_c, w_c1, .., w_cD]` on raw features.
    weights: Vec<f64>,
}

fn logits(weights: &[f64], n_classes: usize, x: &[f64]) -> Vec<f64> {
    let stride = x.len() + 1;
    (0..n_classes)
        .map(|c| affine(&weights[c * stride..(c + 1) * stride], x))
        .collect()
}

fn check_shape<'a>(weights: &[f64], data: &'a Dataset) -> Result<(usize, &'a [usize])> {
    let labels = data.labels()?;
    let k = data.n_classes().unwrap_or(0);
    let expected = k * (data.n_features() + 1);
    if weights.len() != expected {
        return Err(Error::LengthMismatch {
            left: weights.len(),
            right: expected,
        });
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok((k, labels))
}

/// Mean cross-entropy `−(1/n) Σ log softmax(W x_i)_{y_i}` for row-major
/// `K × (D + 1)` weights on the raw features of `data`.
pub fn cross_entropy_loss(weights: &[f64], data: &Dataset) -> Result<f64> {
    let (k, labels) = check_shape(weights, data)?;
    let mut total = 0.0;
    for (x, &y) in data.rows().zip(labels) {
        let z = logits(weights, k, x);
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_norm = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += log_norm - z[y];
    }
    Ok(total / labels.len() as f64)
}

/// Gradient of [`cross_entropy_loss`] with respect to the weights.
pub fn cross_entropy_gradient(weights: &[f64], data: &Dataset) -> Result<Vec<f64>> {
    let (k, labels) = check_shape(weights, data)?;
    let stride = data.n_features() + 1;
    let mut grad = vec![0.0; weights.len()];
    for (x, &y) in data.rows().zip(labels) {
        let p = ClassProbabilities::from_logits(&logits(weights, k, x));
        for (c, &pc) in p.as_slice().iter().enumerate() {
            let g = pc - if c == y { 1.0 } else { 0.0 };
            let row = &mut grad[c * stride..(c + 1) * stride];
            row[0] += g;
            for (gj, v) in row[1..].iter_mut().zip(x) {
                *gj += g * v;
            }
        }
    }
    let n = labels.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok(grad)
}

impl SoftmaxClassifier {
    /// Full-batch gradient descent on mean cross-entropy from zero weights,
    /// on internally standardized features.
    pub fn fit(train: &Dataset, config: &SoftmaxFitConfig) -> Result<Self> {
        let labels = train.labels()?;
        let k = train.n_classes().unwrap_or(0);
        let first = labels.first().ok_or(Error::EmptyInput)?;
        if labels.iter().all(|c| c == first) {
            return Err(Error::InvalidDataset(
                "training data contains a single class".into(),
            ));
        }
        if !(config.step_size.is_finite() && config.step_size > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "step_size must be > 0, got {}",
                config.step_size
            )));
        }
        let d = train.n_features();
        let std = Standardizer::fit(train);
        let standardized = Dataset::from_parts(
            std.transform(train),
            d,
            Targets::Labels {
                labels: labels.to_vec(),
                n_classes: k,
            },
            train.feature_names().to_vec(),
            train.target_name().to_string(),
        )?;
        let mut w = vec![0.0; k * (d + 1)];
        for _ in 0..config.steps {
            let grad = cross_entropy_gradient(&w, &standardized)?;
            for (wj, gj) in w.iter_mut().zip(&grad) {
                *wj -= config.step_size * gj;
            }
        }
        let weights: Vec<f64> = w
            .chunks_exact(d + 1)
            .flat_map(|row| std.to_raw_weights(row))
            .collect();
        if weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("softmax training diverged".into()));
        }
        Ok(Self {
            n_classes: k,
            n_features: d,
            weights,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn predict_proba(&self, x: &[f64]) -> ClassProbabilities {
        debug_assert_eq!(x.len(), self.n_features);
        ClassProbabilities::from_logits(&logits(&self.weights, self.n_classes, x))
    }

    pub fn predict_class(&self, x: &[f64]) -> usize {
        self.predict_proba(x).argmax()
    }

    pub fn accuracy(&self, data: &Dataset) -> Result<f64> {
        let labels = data.labels()?;
        let hits = data
            .rows()
            .zip(labels)
            .filter(|(x, &y)| self.predict_class(x) == y)
            .count();
        Ok(hits as f64 / labels.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{make_blobs, make_synthetic_classification, BlobConfig};

    #[test]
    fn zero_steps_give_uniform_probabilities() {
        let ds = make_synthetic_classification(100, 4, 1).unwrap();
        let cfg = SoftmaxFitConfig {
            steps: 0,
            ..Default::default()
        };
        let m = SoftmaxClassifier::fit(&ds, &cfg).unwrap();
        for x in ds.rows().take(10) {
            assert!(m.predict_proba(x).as_slice().iter().all(|&p| (p - 0.25).abs() < 1e-15));
        }
    }

    #[test]
    fn probabilities_are_normalized() {
        let ds = make_synthetic_classification(300, 3, 4).unwrap();
        let m = SoftmaxClassifier::fit(&ds, &SoftmaxFitConfig::default()).unwrap();
        for x in ds.rows() {
            let p = m.predict_proba(x);
            let sum: f64 = p.as_slice().iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(p.as_slice().iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn separated_blobs_are_learned() {
        let cfg = BlobConfig {
            radius: 3.0,
            ..BlobConfig::new(1000, 2)
        };
        let train = make_blobs(&cfg, 1).unwrap();
        let test = make_blobs(&cfg, 2).unwrap();
        let m = SoftmaxClassifier::fit(&train, &SoftmaxFitConfig::default()).unwrap();
        assert!(m.accuracy(&test).unwrap() > 0.95);
    }

    #[test]
    fn single_class_is_rejected() {
        let ds = Dataset::classification(vec![vec![0.0], vec![1.0]], vec![1, 1], 2).unwrap();
        assert!(SoftmaxClassifier::fit(&ds, &SoftmaxFitConfig::default()).is_err());
    }

    #[test]
    fn training_lowers_the_loss() {
        let ds = make_synthetic_classification(200, 3, 6).unwrap();
        let m = SoftmaxClassifier::fit(&ds, &SoftmaxFitConfig::default()).unwrap();
        let zero = vec![0.0; m.weights().len()];
        assert!(
            cross_entropy_loss(m.weights(), &ds).unwrap() < cross_entropy_loss(&zero, &ds).unwrap()
        );
        assert!((cross_entropy_loss(&zero, &ds).unwrap() - 3f64.ln()).abs() < 1e-12);
    }
}
