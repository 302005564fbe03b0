//! The finite-sample conformal quantile.

use serde::Serialize;

use crate::error::check_alpha;
use crate::{Error, Result};

/// Tolerance used to snap a nearly-integral real to that integer before
/// rounding it. In binary floating point `10 * (1 - 0.7)` evaluates to
/// `3.0000000000000004`, and a bare ceiling would turn rank 3 into rank 4.
pub const SNAP_TOLERANCE: f64 = 1e-9;

pub(crate) fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() <= SNAP_TOLERANCE {
        r
    } else {
        v
    }
}

/// The calibrated threshold and how it was obtained.
///
/// `q_hat` is `f64::INFINITY` exactly when `degenerate` is set, i.e. when the
/// required rank exceeds the number of calibration scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConformalQuantile {
    pub q_hat: f64,
    pub alpha: f64,
    pub n_cal: usize,
    pub rank: usize,
    pub degenerate: bool,
}

/// `⌈(n_cal + 1)(1 − α)⌉`, the 1-based order statistic that is the threshold.
pub fn conformal_rank(n_cal: usize, alpha: f64) -> Result<usize> {
    check_alpha(alpha)?;
    if n_cal == 0 {
        return Err(Error::EmptyCalibration);
    }
    Ok(snap((n_cal as f64 + 1.0) * (1.0 - alpha)).ceil() as usize)
}

/// The rank-th smallest score ("higher" order statistic, no interpolation),
/// or the `+∞` sentinel when the rank exceeds `scores.len()`.
pub fn conformal_quantile(scores: &[f64], alpha: f64) -> Result<ConformalQuantile> {
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFiniteScore(i));
    }
    let n_cal = scores.len();
    let rank = conformal_rank(n_cal, alpha)?;
    let degenerate = rank > n_cal;
    let q_hat = if degenerate {
        f64::INFINITY
    } else {
        let mut work = scores.to_vec();
        let (_, kth, _) = work.select_nth_unstable_by(rank - 1, f64::total_cmp);
        *kth
    };
    Ok(ConformalQuantile {
        q_hat,
        alpha,
        n_cal,
        rank,
        degenerate,
    })
}
