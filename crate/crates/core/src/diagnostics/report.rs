use serde::{Deserialize, Serialize, Serializer};

use super::beta::{beta_pdf, beta_quantile, BetaParams};
use crate::{Error, Result};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Writes non-finite floats as `null` so reports stay valid JSON.
pub fn finite_or_null<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

fn finite_vec_or_null<S: Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    let mapped: Vec<Option<f64>> = v.iter().map(|x| x.is_finite().then_some(*x)).collect();
    mapped.serialize(s)
}

fn null_as_infinity<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

fn nulls_as_infinity<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    Ok(Vec::<Option<f64>>::deserialize(d)?
        .into_iter()
        .map(|v| v.unwrap_or(f64::INFINITY))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    #[serde(serialize_with = "finite_or_null", deserialize_with = "null_as_infinity")]
    pub mean: f64,
    #[serde(serialize_with = "finite_or_null", deserialize_with = "null_as_infinity")]
    pub sd: f64,
    #[serde(serialize_with = "finite_or_null", deserialize_with = "null_as_infinity")]
    pub min: f64,
    #[serde(serialize_with = "finite_or_null", deserialize_with = "null_as_infinity")]
    pub max: f64,
}

impl SummaryStats {
    /// Population statistics; an infinite value makes `mean`, `sd` and `max` infinite.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        let n = values.len() as f64;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Ok(Self {
                mean: f64::INFINITY,
                sd: f64::INFINITY,
                min,
                max,
            });
        }
        if min == max {
            return Ok(Self { mean: min, sd: 0.0, min, max });
        }
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Ok(Self {
            mean,
            sd: var.sqrt(),
            min,
            max,
        })
    }
}

/// Single-run summary of a calibrated predictor on its validation part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub schema_version: u32,
    pub method: String,
    pub task: String,
    pub alpha: f64,
    pub seed: u64,
    pub n_train: usize,
    /// Size of the part that trains the residual model (CRF only).
    pub n_residual: Option<usize>,
    pub n_cal: usize,
    pub n_val: usize,
    /// One threshold, or one per class; `null` when calibration is degenerate.
    #[serde(serialize_with = "finite_vec_or_null", deserialize_with = "nulls_as_infinity")]
    pub q_hat: Vec<f64>,
    pub degenerate: bool,
    pub empirical_coverage: f64,
    /// Mean of `Beta(n_cal + 1 − l, l)`, when `l ≥ 1`.
    pub expected_coverage: Option<f64>,
    /// `"width"` for regression, `"set_size"` for classification.
    pub size_kind: String,
    pub size: SummaryStats,
    pub per_class_coverage: Option<Vec<Option<f64>>>,
    pub set_size_histogram: Option<Vec<usize>>,
    pub empty_set_rate: Option<f64>,
    pub crossing_count: Option<usize>,
}

impl CoverageReport {
    pub fn min_class_coverage(&self) -> Option<f64> {
        self.per_class_coverage
            .as_ref()
            .and_then(|v| v.iter().flatten().copied().reduce(f64::min))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramRow {
    pub bin_left: f64,
    pub bin_right: f64,
    pub count: usize,
    pub beta_pdf_at_midpoint: f64,
}

/// `n_val + 1` equal bins partitioning `[0, 1]`; bin `k` holds exactly the
/// attainable coverage `k / n_val`.
pub fn coverage_histogram(coverages: &[f64], n_val: usize, beta: &BetaParams) -> Result<Vec<HistogramRow>> {
    if n_val == 0 {
        return Err(Error::InvalidParameter("n_val must be at least 1".into()));
    }
    let bins = n_val + 1;
    let width = 1.0 / bins as f64;
    let mut counts = vec![0usize; bins];
    for &c in coverages {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::InvalidParameter(format!("coverage {c} outside [0, 1]")));
        }
        counts[((c * bins as f64) as usize).min(bins - 1)] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| {
            let bin_left = k as f64 * width;
            let bin_right = if k + 1 == bins { 1.0 } else { (k + 1) as f64 * width };
            Ok(HistogramRow {
                bin_left,
                bin_right,
                count,
                beta_pdf_at_midpoint: beta_pdf(beta, 0.5 * (bin_left + bin_right))?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QqPair {
    pub level: f64,
    pub empirical: f64,
    pub theoretical: f64,
}

pub const QQ_LEVELS: usize = 99;

/// Empirical against Beta quantiles at levels `0.01, 0.02, .., 0.99`; the
/// empirical quantile is the inverse ECDF, `x_(⌈pT⌉)`.
pub fn qq_pairs(coverages: &[f64], beta: &BetaParams) -> Result<Vec<QqPair>> {
    if coverages.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = coverages.to_vec();
    sorted.sort_by(f64::total_cmp);
    let t = sorted.len();
    (1..=QQ_LEVELS)
        .map(|i| {
            let level = i as f64 / (QQ_LEVELS + 1) as f64;
            let rank = ((level * t as f64 - 1e-9).ceil() as usize).clamp(1, t);
            Ok(QqPair {
                level,
                empirical: sorted[rank - 1],
                theoretical: beta_quantile(beta, level)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::beta::beta_params;

    #[test]
    fn summary_stats() {
        let s = SummaryStats::from_values(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!((s.mean, s.min, s.max), (2.5, 1.0, 4.0));
        assert!((s.sd - 1.25f64.sqrt()).abs() < 1e-15);
        let inf = SummaryStats::from_values(&[1.0, f64::INFINITY]).unwrap();
        assert!(inf.mean.is_infinite());
        let json = serde_json::to_string(&inf).unwrap();
        assert_eq!(json, r#"{"mean":null,"sd":null,"min":1.0,"max":null}"#);
        let back: SummaryStats = serde_json::from_str(&json).unwrap();
        assert_eq!(back.max, f64::INFINITY);
        assert!(SummaryStats::from_values(&[]).is_err());
    }

    #[test]
    fn histogram_bins_hold_one_value_each() {
        let beta = beta_params(126, 0.1).unwrap();
        let n_val = 127;
        let values: Vec<f64> = (0..=n_val).map(|k| k as f64 / n_val as f64).collect();
        let rows = coverage_histogram(&values, n_val, &beta).unwrap();
        assert_eq!(rows.len(), n_val + 1);
        assert!(rows.iter().all(|r| r.count == 1));
        assert_eq!(rows[0].bin_left, 0.0);
        assert_eq!(rows[n_val].bin_right, 1.0);
        assert!(rows.windows(2).all(|w| w[0].bin_right == w[1].bin_left));
        assert!(rows.iter().all(|r| r.beta_pdf_at_midpoint.is_finite()));
        assert!(coverage_histogram(&[1.5], n_val, &beta).is_err());
    }

    #[test]
    fn qq_pairs_track_the_law() {
        let beta = beta_params(126, 0.1).unwrap();
        let draws = crate::diagnostics::ks::sample_beta(&beta, 5000, 3).unwrap();
        let pairs = qq_pairs(&draws, &beta).unwrap();
        assert_eq!(pairs.len(), 99);
        assert!((pairs[0].level - 0.01).abs() < 1e-15 && (pairs[98].level - 0.99).abs() < 1e-15);
        for p in &pairs {
            assert!((p.empirical - p.theoretical).abs() < 0.01, "{p:?}");
        }
        assert!(pairs.windows(2).all(|w| w[0].empirical <= w[1].empirical));
    }

    #[test]
    fn qq_empirical_is_inverse_ecdf() {
        let beta = beta_params(9, 0.1).unwrap();
        let sample: Vec<f64> = (1..=100).map(|i| i as f64 / 100.0).collect();
        let pairs = qq_pairs(&sample, &beta).unwrap();
        for (i, p) in pairs.iter().enumerate() {
            assert_eq!(p.empirical, sample[i]);
        }
    }
}
