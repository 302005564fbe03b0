use crate::classification::PredictionSet;
use crate::regression::PredictionInterval;
use crate::{Error, Result};

/// A prediction that either contains a ground truth or does not.
pub trait Covers {
    type Truth: Copy;
    fn covers(&self, truth: Self::Truth) -> bool;
}

impl Covers for PredictionInterval {
    type Truth = f64;
    fn covers(&self, truth: f64) -> bool {
        self.contains(truth)
    }
}

impl Covers for PredictionSet {
    type Truth = usize;
    fn covers(&self, truth: usize) -> bool {
        self.contains(truth)
    }
}

/// Fraction of `truths` contained in the matching prediction.
pub fn empirical_coverage<P: Covers>(predictions: &[P], truths: &[P::Truth]) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: truths.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::EmptyInput);
    }
    let hits = predictions
        .iter()
        .zip(truths)
        .filter(|(p, &t)| p.covers(t))
        .count();
    Ok(hits as f64 / predictions.len() as f64)
}
