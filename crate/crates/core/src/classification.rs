//! Conformal prediction sets for classification.
//!
//! - naive: score `1 − p_y`; set `{y : p_y ≥ 1 − q}`.
//! - class-balanced: the naive score with one threshold per class, each
//!   calibrated only on points of that class; set `{y : p_y ≥ 1 − q_y}`.
//! - APS: score is the probability mass accumulated, in descending order of
//!   probability, up to and including the true class; the set takes classes in
//!   that order until the running mass first reaches `q` (the class that
//!   crosses is included). APS sets are never empty.
//!
//! Equal probabilities are ordered by ascending class index.

use serde::{Deserialize, Serialize};

use crate::models::ClassProbabilities;
use crate::quantile::{conformal_quantile, ConformalQuantile};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassificationMethod {
    Naive,
    ClassBalanced,
    Aps,
}

/// Sorted class indices.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
#[serde(transparent)]
pub struct PredictionSet {
    classes: Vec<usize>,
}

impl PredictionSet {
    pub fn new(mut classes: Vec<usize>) -> Self {
        classes.sort_unstable();
        classes.dedup();
        Self { classes }
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn contains(&self, class: usize) -> bool {
        self.classes.binary_search(&class).is_ok()
    }
}

pub fn score_softmax_naive(probs: &ClassProbabilities, true_class: usize) -> Result<f64> {
    Ok(1.0 - probs.get(true_class)?)
}

/// Cumulative probability through the true class in descending order.
pub fn score_aps(probs: &ClassProbabilities, true_class: usize) -> Result<f64> {
    probs.get(true_class)?;
    let p = probs.as_slice();
    let mut cum = 0.0;
    for c in probs.descending_order() {
        cum += p[c];
        if c == true_class {
            break;
        }
    }
    Ok(cum)
}

/// A calibrated set predictor: one threshold for naive and APS, `K` for
/// class-balanced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationCalibration {
    pub method: ClassificationMethod,
    pub quantiles: Vec<ConformalQuantile>,
    pub n_classes: usize,
}

fn check_inputs(cal_probs: &[ClassProbabilities], cal_labels: &[usize]) -> Result<usize> {
    if cal_probs.len() != cal_labels.len() {
        return Err(Error::LengthMismatch {
            left: cal_probs.len(),
            right: cal_labels.len(),
        });
    }
    let k = cal_probs.first().ok_or(Error::EmptyCalibration)?.n_classes();
    if let Some(p) = cal_probs.iter().find(|p| p.n_classes() != k) {
        return Err(Error::LengthMismatch {
            left: p.n_classes(),
            right: k,
        });
    }
    if let Some(&bad) = cal_labels.iter().find(|&&y| y >= k) {
        return Err(Error::ClassOutOfRange {
            index: bad,
            n_classes: k,
        });
    }
    Ok(k)
}

impl ClassificationCalibration {
    pub fn calibrate(
        method: ClassificationMethod,
        cal_probs: &[ClassProbabilities],
        cal_labels: &[usize],
        alpha: f64,
    ) -> Result<Self> {
        let k = check_inputs(cal_probs, cal_labels)?;
        let quantiles = match method {
            ClassificationMethod::Naive => {
                let scores: Vec<f64> = cal_probs
                    .iter()
                    .zip(cal_labels)
                    .map(|(p, &y)| score_softmax_naive(p, y))
                    .collect::<Result<_>>()?;
                vec![conformal_quantile(&scores, alpha)?]
            }
            ClassificationMethod::Aps => {
                let scores: Vec<f64> = cal_probs
                    .iter()
                    .zip(cal_labels)
                    .map(|(p, &y)| score_aps(p, y))
                    .collect::<Result<_>>()?;
                vec![conformal_quantile(&scores, alpha)?]
            }
            ClassificationMethod::ClassBalanced => {
                let mut per_class = vec![Vec::new(); k];
                for (p, &y) in cal_probs.iter().zip(cal_labels) {
                    per_class[y].push(score_softmax_naive(p, y)?);
                }
                let absent: Vec<usize> = (0..k).filter(|&c| per_class[c].is_empty()).collect();
                if !absent.is_empty() {
                    return Err(Error::AbsentClasses(absent));
                }
                per_class
                    .iter()
                    .map(|scores| conformal_quantile(scores, alpha))
                    .collect::<Result<_>>()?
            }
        };
        Ok(Self {
            method,
            quantiles,
            n_classes: k,
        })
    }

    pub fn predict_set(&self, probs: &ClassProbabilities) -> PredictionSet {
        let p = probs.as_slice();
        match self.method {
            ClassificationMethod::Naive => {
                let threshold = 1.0 - self.quantiles[0].q_hat;
                PredictionSet::new((0..p.len()).filter(|&c| p[c] >= threshold).collect())
            }
            ClassificationMethod::ClassBalanced => PredictionSet::new(
                (0..p.len())
                    .filter(|&c| p[c] >= 1.0 - self.quantiles[c].q_hat)
                    .collect(),
            ),
            ClassificationMethod::Aps => {
                let q_hat = self.quantiles[0].q_hat;
                let mut members = Vec::new();
                let mut cum = 0.0;
                for c in probs.descending_order() {
                    members.push(c);
                    cum += p[c];
                    if cum >= q_hat {
                        break;
                    }
                }
                PredictionSet::new(members)
            }
        }
    }
}

pub fn calibrate_naive_cls(
    cal_probs: &[ClassProbabilities],
    cal_labels: &[usize],
    alpha: f64,
) -> Result<ClassificationCalibration> {
    ClassificationCalibration::calibrate(ClassificationMethod::Naive, cal_probs, cal_labels, alpha)
}

pub fn calibrate_class_balanced(
    cal_probs: &[ClassProbabilities],
    cal_labels: &[usize],
    alpha: f64,
) -> Result<ClassificationCalibration> {
    ClassificationCalibration::calibrate(ClassificationMethod::ClassBalanced, cal_probs, cal_labels, alpha)
}

pub fn calibrate_aps(
    cal_probs: &[ClassProbabilities],
    cal_labels: &[usize],
    alpha: f64,
) -> Result<ClassificationCalibration> {
    ClassificationCalibration::calibrate(ClassificationMethod::Aps, cal_probs, cal_labels, alpha)
}

/// Counts of set sizes `0..=K`.
pub fn set_size_histogram(sets: &[PredictionSet], n_classes: usize) -> Result<Vec<usize>> {
    if sets.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut hist = vec![0; n_classes + 1];
    for s in sets {
        let size = s.len();
        if size > n_classes {
            return Err(Error::ClassOutOfRange {
                index: size,
                n_classes,
            });
        }
        hist[size] += 1;
    }
    Ok(hist)
}

/// Fraction of each class's points whose set contains the class; `None` for
/// classes with no points.
pub fn per_class_coverage(sets: &[PredictionSet], labels: &[usize], n_classes: usize) -> Result<Vec<Option<f64>>> {
    if sets.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: sets.len(),
            right: labels.len(),
        });
    }
    if sets.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut hits = vec![0usize; n_classes];
    let mut totals = vec![0usize; n_classes];
    for (s, &y) in sets.iter().zip(labels) {
        if y >= n_classes {
            return Err(Error::ClassOutOfRange { index: y, n_classes });
        }
        totals[y] += 1;
        if s.contains(y) {
            hits[y] += 1;
        }
    }
    Ok(hits
        .iter()
        .zip(&totals)
        .map(|(&h, &t)| (t > 0).then(|| h as f64 / t as f64))
        .collect())
}
