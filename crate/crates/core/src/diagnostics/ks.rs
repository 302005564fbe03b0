use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::beta::{beta_quantile, regularized_incomplete_beta, BetaParams};
use super::trials::TrialDistribution;
use crate::rng::seeded;
use crate::{Error, Result};

pub const MIN_KS_TRIALS: usize = 20;
/// Asymptotic 5% Kolmogorov constant.
pub const KS_C_05: f64 = 1.358;

pub const DISCRETENESS_CAVEAT: &str = "coverage takes at most n_val + 1 distinct values; \
the asymptotic critical value assumes a continuous sample and is approximate";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KsMode {
    /// Against the exact Beta CDF.
    #[default]
    OneSample,
    /// Against `T` inverse-CDF draws from the same Beta.
    TwoSample,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KsResult {
    pub mode: KsMode,
    pub statistic: f64,
    pub critical_5pct: f64,
    pub pass: bool,
    pub n_trials: usize,
    pub n_reference: Option<usize>,
    pub caveat: String,
}

/// `sup |F_n − F|` for a sample against a continuous CDF.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

/// `sup |F_n − G_m|` between two samples.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(d)
}

/// `T` seeded inverse-CDF draws from `params`.
pub fn sample_beta(params: &BetaParams, t: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = seeded(seed);
    (0..t).map(|_| beta_quantile(params, rng.random::<f64>())).collect()
}

fn check_trials(t: usize) -> Result<()> {
    if t < MIN_KS_TRIALS {
        Err(Error::TooFewTrials(t))
    } else {
        Ok(())
    }
}

pub fn ks_statistic_vs_beta(trials: &TrialDistribution) -> Result<KsResult> {
    ks_against(&trials.coverages, &trials.beta)
}

/// One-sample test of `coverages` against `Beta(a, b)`.
pub fn ks_against(coverages: &[f64], params: &BetaParams) -> Result<KsResult> {
    let t = coverages.len();
    check_trials(t)?;
    if let Some(c) = coverages.iter().find(|c| !(0.0..=1.0).contains(*c)) {
        return Err(Error::InvalidParameter(format!("coverage {c} outside [0, 1]")));
    }
    let statistic = ks_one_sample(coverages, |x| regularized_incomplete_beta(params.a, params.b, x))?;
    let critical = KS_C_05 / (t as f64).sqrt();
    Ok(KsResult {
        mode: KsMode::OneSample,
        statistic,
        critical_5pct: critical,
        pass: statistic < critical,
        n_trials: t,
        n_reference: None,
        caveat: DISCRETENESS_CAVEAT.to_string(),
    })
}

/// Two-sample test against `T` simulated draws from the same Beta.
pub fn ks_two_sample_vs_beta(trials: &TrialDistribution, seed: u64) -> Result<KsResult> {
    let t = trials.coverages.len();
    check_trials(t)?;
    let reference = sample_beta(&trials.beta, t, seed)?;
    let statistic = ks_two_sample(&trials.coverages, &reference)?;
    let (n, m) = (t as f64, reference.len() as f64);
    let critical = KS_C_05 * ((n + m) / (n * m)).sqrt();
    Ok(KsResult {
        mode: KsMode::TwoSample,
        statistic,
        critical_5pct: critical,
        pass: statistic < critical,
        n_trials: t,
        n_reference: Some(reference.len()),
        caveat: DISCRETENESS_CAVEAT.to_string(),
    })
}

pub fn ks_test(trials: &TrialDistribution, mode: KsMode, seed: u64) -> Result<KsResult> {
    match mode {
        KsMode::OneSample => ks_statistic_vs_beta(trials),
        KsMode::TwoSample => ks_two_sample_vs_beta(trials, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::beta::{beta_cdf, beta_params};

    #[test]
    fn hand_example_against_uniform() {
        let uniform = BetaParams::shape(1.0, 1.0);
        let d = ks_one_sample(&[0.1, 0.3, 0.5, 0.7, 0.9], |x| beta_cdf(&uniform, x).unwrap()).unwrap();
        assert!((d - 0.1).abs() < 1e-12);
        // ECDF reaches 1 at 0.25 while F(0.25) = 0.25
        let d = ks_one_sample(&[0.05, 0.1, 0.15, 0.2, 0.25], |x| x).unwrap();
        assert!((d - 0.75).abs() < 1e-12);
        // F(0.9) = 0.9 while only 2/5 of the sample lies at or below it
        let d = ks_one_sample(&[0.0, 0.0, 0.9, 0.95, 1.0], |x| x).unwrap();
        assert!((d - 0.5).abs() < 1e-12);
    }

    #[test]
    fn constant_sample_fails() {
        let p = beta_params(126, 0.1).unwrap();
        for c in [0.0, 0.5, p.mean(), 1.0] {
            let r = ks_against(&vec![c; 100], &p).unwrap();
            assert!(r.statistic >= 0.5, "c={c} D={}", r.statistic);
            assert!(!r.pass);
        }
    }

    #[test]
    fn too_few_trials() {
        let p = beta_params(126, 0.1).unwrap();
        assert!(matches!(ks_against(&[0.9; 19], &p), Err(Error::TooFewTrials(19))));
        assert!(ks_against(&[0.9; 20], &p).is_ok());
    }

    #[test]
    fn two_sample_matches_hand_values() {
        assert_eq!(ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 1.0);
        let d = ks_two_sample(&[1.0, 3.0], &[2.0, 4.0]).unwrap();
        assert!((d - 0.5).abs() < 1e-12);
    }

    #[test]
    fn self_test_pass_rate() {
        let p = beta_params(126, 0.1).unwrap();
        let passes = (0..100u64)
            .filter(|&rep| {
                let draws = sample_beta(&p, 2000, rep).unwrap();
                ks_against(&draws, &p).unwrap().pass
            })
            .count();
        assert!(passes >= 90, "passes={passes}");
    }

    #[test]
    fn two_sample_self_test() {
        let p = beta_params(126, 0.1).unwrap();
        let passes = (0..50u64)
            .filter(|&rep| {
                let a = sample_beta(&p, 500, 1000 + rep).unwrap();
                let b = sample_beta(&p, 500, 2000 + rep).unwrap();
                let d = ks_two_sample(&a, &b).unwrap();
                d < KS_C_05 * (2.0f64 / 500.0).sqrt()
            })
            .count();
        assert!(passes >= 42, "passes={passes}");
    }
}
