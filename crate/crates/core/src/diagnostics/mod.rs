//! Coverage measurement and the repeated-calibration validation protocol.

pub mod beta;
pub mod coverage;
pub mod ks;
pub mod report;
pub mod trials;

pub use beta::{beta_cdf, beta_params, beta_pdf, beta_quantile, BetaParams};
pub use coverage::{empirical_coverage, Covers};
pub use ks::{ks_statistic_vs_beta, ks_test, KsMode, KsResult};
pub use report::{coverage_histogram, qq_pairs, CoverageReport, HistogramRow, QqPair, SummaryStats};
pub use trials::{run_trials, trial_seed, CoverageTrial, TrialDistribution, TrialOutcome};

/// Pearson correlation; `NaN` when either side has zero variance.
pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len(), "correlation needs paired samples");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn correlation_basics() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((correlation(&x, &[2.0, 4.0, 6.0, 8.0]) - 1.0).abs() < 1e-15);
        assert!((correlation(&x, &[4.0, 3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        assert!(correlation(&x, &[1.0; 4]).is_nan());
    }
}
