use serde::{Deserialize, Serialize};

use super::{affine, PointPredictor, Standardizer};
use crate::dataset::Dataset;
use crate::error::check_alpha;
use crate::{Error, Result};

/// Pinball (quantile) loss `max(ε(y − pred), (ε − 1)(y − pred))`.
pub fn pinball_loss(y: f64, pred: f64, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    Ok(pinball(y, pred, epsilon))
}

/// A subgradient of the pinball loss with respect to `pred` (0 at the kink).
pub fn pinball_subgradient(y: f64, pred: f64, epsilon: f64) -> f64 {
    if y > pred {
        -epsilon
    } else if y < pred {
        1.0 - epsilon
    } else {
        0.0
    }
}

fn pinball(y: f64, pred: f64, epsilon: f64) -> f64 {
    let r = y - pred;
    (epsilon * r).max((epsilon - 1.0) * r)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    check_alpha(epsilon).map_err(|_| {
        Error::InvalidParameter(format!("quantile level must lie in (0, 1), got {epsilon}"))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileFitConfig {
    pub epsilon: f64,
    pub steps: usize,
    pub step_size: f64,
}

impl QuantileFitConfig {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            steps: 2000,
            step_size: 1.0,
        }
    }
}

/// Affine model of the conditional `ε`-quantile, trained on mean pinball loss.
#[derive(Debug, Clone, Serialize)]
pub struct QuantileModel {
    epsilon: f64,
    /// `[intercept, w_1, .., w_d]` on raw (unstandardized) features.
    weights: Vec<f64>,
    /// Best-so-far training loss at evenly spaced iterations, `(iteration, loss)`.
    checkpoints: Vec<(usize, f64)>,
    warnings: Vec<String>,
}

impl QuantileModel {
    /// Subgradient descent on the mean pinball loss with step
    /// `step_size / √t` at iteration `t`.
    ///
    /// Features are standardized with training means and standard deviations
    /// (zero-variance columns are dropped with a warning). Targets are centred
    /// on their empirical `ε`-quantile and scaled by their standard deviation,
    /// and the initial model is that constant. Since subgradient steps do not
    /// decrease the loss monotonically, the best iterate seen is returned.
    pub fn fit(train: &Dataset, config: &QuantileFitConfig) -> Result<Self> {
        check_epsilon(config.epsilon)?;
        if config.steps == 0 || !(config.step_size.is_finite() && config.step_size > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need steps >= 1 and step_size > 0, got {} and {}",
                config.steps, config.step_size
            )));
        }
        let y = train.real_targets()?;
        let n = y.len();
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        let eps = config.epsilon;
        let std = Standardizer::fit(train);
        let warnings: Vec<String> = std
            .dropped()
            .into_iter()
            .map(|j| format!("feature `{}` has zero variance and was dropped", train.feature_names()[j]))
            .collect();
        let z = std.transform(train);
        let d = train.n_features();

        let mut sorted = y.to_vec();
        sorted.sort_by(f64::total_cmp);
        let center = sorted[((eps * (n - 1) as f64).floor() as usize).min(n - 1)];
        let mean = y.iter().sum::<f64>() / n as f64;
        let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        let scale = if sd > 1e-12 { sd } else { 1.0 };
        let u: Vec<f64> = y.iter().map(|v| (v - center) / scale).collect();

        let mut w = vec![0.0; d + 1];
        let mut best = (f64::INFINITY, w.clone());
        let mut grad = vec![0.0; d + 1];
        let every = (config.steps / 20).max(1);
        let mut checkpoints = Vec::new();
        for t in 1..=config.steps + 1 {
            let mut loss = 0.0;
            grad.iter_mut().for_each(|g| *g = 0.0);
            for (i, &target) in u.iter().enumerate() {
                let row = &z[i * d..(i + 1) * d];
                let pred = affine(&w, row);
                loss += pinball(target, pred, eps);
                let g = pinball_subgradient(target, pred, eps);
                grad[0] += g;
                for (gj, v) in grad[1..].iter_mut().zip(row) {
                    *gj += g * v;
                }
            }
            loss /= n as f64;
            if loss < best.0 {
                best = (loss, w.clone());
            }
            if t % every == 0 || t == config.steps + 1 {
                checkpoints.push((t - 1, best.0 * scale));
            }
            if t > config.steps {
                break;
            }
            let step = config.step_size / (t as f64).sqrt();
            for (wj, gj) in w.iter_mut().zip(&grad) {
                *wj -= step * gj / n as f64;
            }
        }

        let mut weights = std.to_raw_weights(&best.1);
        weights.iter_mut().for_each(|v| *v *= scale);
        weights[0] += center;
        if weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("quantile regression diverged".into()));
        }
        Ok(Self {
            epsilon: eps,
            weights,
            checkpoints,
            warnings,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn checkpoints(&self) -> &[(usize, f64)] {
        &self.checkpoints
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Mean pinball loss of this model on `data`.
    pub fn mean_loss(&self, data: &Dataset) -> Result<f64> {
        let y = data.real_targets()?;
        let total: f64 = data
            .rows()
            .zip(y)
            .map(|(x, &t)| pinball(t, self.predict(x), self.epsilon))
            .sum();
        Ok(total / y.len() as f64)
    }
}

impl PointPredictor for QuantileModel {
    fn predict(&self, x: &[f64]) -> f64 {
        affine(&self.weights, x)
    }
}
