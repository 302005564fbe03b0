//! The repeated-calibration protocol: fixed models, fresh cal/val draws.

use serde::Serialize;

use super::beta::{beta_params, BetaParams};
use crate::{Error, Execution, Result};

/// One calibrate-then-validate round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub coverage: f64,
    /// Mean interval width or mean set size on the validation draw.
    pub mean_size: f64,
    /// Per-class coverage on the validation draw (classification only).
    pub per_class: Option<Vec<Option<f64>>>,
}

/// Something that can be recalibrated on a seeded cal/val redraw.
pub trait CoverageTrial: Sync {
    fn n_cal(&self) -> usize;
    fn n_val(&self) -> usize;
    fn alpha(&self) -> f64;
    fn run_trial(&self, seed: u64) -> Result<TrialOutcome>;
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialDistribution {
    pub coverages: Vec<f64>,
    pub mean_sizes: Vec<f64>,
    pub beta: BetaParams,
    pub t: usize,
    pub n_val: usize,
    /// Mean over trials of per-class coverage, skipping trials where the
    /// class was absent from validation.
    pub per_class_mean: Option<Vec<Option<f64>>>,
}

impl TrialDistribution {
    pub fn mean_coverage(&self) -> f64 {
        mean(&self.coverages)
    }

    /// Standard error of the trial mean.
    pub fn standard_error(&self) -> f64 {
        let m = self.mean_coverage();
        let t = self.coverages.len() as f64;
        if t < 2.0 {
            return 0.0;
        }
        let var = self.coverages.iter().map(|c| (c - m).powi(2)).sum::<f64>() / (t - 1.0);
        (var / t).sqrt()
    }

    pub fn mean_size(&self) -> f64 {
        mean(&self.mean_sizes)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Seed of trial `j` (1-based).
pub fn trial_seed(seed: u64, j: usize) -> u64 {
    seed ^ j as u64
}

/// Runs trials `j = 1..=t` with seeds `seed ⊕ j`; results are in trial order
/// regardless of execution mode.
pub fn run_trials<P: CoverageTrial + ?Sized>(
    pipeline: &P,
    t: usize,
    seed: u64,
    exec: Execution,
) -> Result<TrialDistribution> {
    if t == 0 {
        return Err(Error::InvalidParameter("T must be at least 1".into()));
    }
    let beta = beta_params(pipeline.n_cal(), pipeline.alpha())?;
    let outcomes = exec
        .map_range(t, |i| pipeline.run_trial(trial_seed(seed, i + 1)))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let per_class_mean = outcomes[0].per_class.as_ref().map(|first| {
        (0..first.len())
            .map(|c| {
                let seen: Vec<f64> = outcomes
                    .iter()
                    .filter_map(|o| o.per_class.as_ref().and_then(|v| v[c]))
                    .collect();
                (!seen.is_empty()).then(|| mean(&seen))
            })
            .collect()
    });
    Ok(TrialDistribution {
        coverages: outcomes.iter().map(|o| o.coverage).collect(),
        mean_sizes: outcomes.iter().map(|o| o.mean_size).collect(),
        beta,
        t,
        n_val: pipeline.n_val(),
        per_class_mean,
    })
}
