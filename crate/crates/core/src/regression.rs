//! Conformal prediction intervals for regression.
//!
//! Three score functions are supported:
//!
//! | method | score `s(x, y)`                          | interval                                   |
//! |--------|------------------------------------------|--------------------------------------------|
//! | naive  | `|y − f(x)|`                             | `[f(x) − q, f(x) + q]`                     |
//! | CRF    | `|y − f(x)| / max(r(x), R_FLOOR)`        | `f(x) ± q · max(r(x), R_FLOOR)`            |
//! | CQR    | `max(t_lo(x) − y, y − t_hi(x))`          | `[t_lo(x) − q, t_hi(x) + q]`               |
//!
//! Calibration data must be disjoint from whatever trained the base models.
//! That is a caller contract; the pipeline layer owns the split.

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::models::{PointPredictor, QuantileModel};
use crate::quantile::{conformal_quantile, ConformalQuantile};
use crate::{Error, Result};

/// Lower bound applied to the residual model `r(x)` before dividing by it.
pub const R_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegressionMethod {
    Naive,
    Crf,
    Cqr,
}

/// A closed interval; endpoints are infinite only after degenerate calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PredictionInterval {
    pub lower: f64,
    pub upper: f64,
}

impl PredictionInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Inclusive at both endpoints.
    pub fn contains(&self, y: f64) -> bool {
        self.lower <= y && y <= self.upper
    }
}

pub fn score_absolute(f: &dyn PointPredictor, x: &[f64], y: f64) -> f64 {
    (f.predict(x) - y).abs()
}

pub fn score_normalized(f: &dyn PointPredictor, r: &dyn PointPredictor, x: &[f64], y: f64) -> f64 {
    (y - f.predict(x)).abs() / r.predict(x).max(R_FLOOR)
}

/// The larger of the two one-sided band violations; negative inside the band.
pub fn score_cqr(t_lo: &QuantileModel, t_hi: &QuantileModel, x: &[f64], y: f64) -> f64 {
    (t_lo.predict(x) - y).max(y - t_hi.predict(x))
}

/// What the base models say at one input, independent of any threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RegressionOutput {
    Point(f64),
    Scaled { center: f64, scale: f64 },
    Band { lower: f64, upper: f64 },
}

impl RegressionOutput {
    pub fn method(&self) -> RegressionMethod {
        match self {
            RegressionOutput::Point(_) => RegressionMethod::Naive,
            RegressionOutput::Scaled { .. } => RegressionMethod::Crf,
            RegressionOutput::Band { .. } => RegressionMethod::Cqr,
        }
    }

    pub fn score(&self, y: f64) -> f64 {
        match *self {
            RegressionOutput::Point(p) => (p - y).abs(),
            RegressionOutput::Scaled { center, scale } => (y - center).abs() / scale.max(R_FLOOR),
            RegressionOutput::Band { lower, upper } => (lower - y).max(y - upper),
        }
    }

    /// Width of the interval for `q_hat`, from its parameters rather than
    /// `upper − lower`, so equal-width intervals compare equal bit for bit.
    pub fn width(&self, q_hat: f64) -> f64 {
        if q_hat == f64::INFINITY {
            return f64::INFINITY;
        }
        match *self {
            RegressionOutput::Point(_) => 2.0 * q_hat,
            RegressionOutput::Scaled { scale, .. } => 2.0 * q_hat * scale.max(R_FLOOR),
            RegressionOutput::Band { lower, upper } => ((upper - lower) + 2.0 * q_hat).max(0.0),
        }
    }

    /// The interval for threshold `q_hat`, and whether a band crossed.
    ///
    /// A band whose shifted lower end exceeds its shifted upper end collapses
    /// to the single point at their midpoint.
    pub fn interval(&self, q_hat: f64) -> (PredictionInterval, bool) {
        if q_hat == f64::INFINITY {
            let all = PredictionInterval {
                lower: f64::NEG_INFINITY,
                upper: f64::INFINITY,
            };
            return (all, false);
        }
        match *self {
            RegressionOutput::Point(p) => (
                PredictionInterval {
                    lower: p - q_hat,
                    upper: p + q_hat,
                },
                false,
            ),
            RegressionOutput::Scaled { center, scale } => {
                let half = q_hat * scale.max(R_FLOOR);
                (
                    PredictionInterval {
                        lower: center - half,
                        upper: center + half,
                    },
                    false,
                )
            }
            RegressionOutput::Band { lower, upper } => {
                let (lo, hi) = (lower - q_hat, upper + q_hat);
                if lo > hi {
                    let mid = 0.5 * (lo + hi);
                    (PredictionInterval { lower: mid, upper: mid }, true)
                } else {
                    (PredictionInterval { lower: lo, upper: hi }, false)
                }
            }
        }
    }
}

/// Calibrates a threshold from precomputed model outputs and true targets.
pub fn calibrate_outputs(outputs: &[RegressionOutput], targets: &[f64], alpha: f64) -> Result<ConformalQuantile> {
    if outputs.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: outputs.len(),
            right: targets.len(),
        });
    }
    if outputs.is_empty() {
        return Err(Error::EmptyCalibration);
    }
    let method = outputs[0].method();
    if outputs.iter().any(|o| o.method() != method) {
        return Err(Error::InvalidParameter("calibration outputs mix methods".into()));
    }
    let scores: Vec<f64> = outputs.iter().zip(targets).map(|(o, &y)| o.score(y)).collect();
    conformal_quantile(&scores, alpha)
}

/// The fitted models a method needs.
#[derive(Clone, Copy)]
pub enum RegressionModels<'a> {
    Naive {
        f: &'a dyn PointPredictor,
    },
    Crf {
        f: &'a dyn PointPredictor,
        r: &'a dyn PointPredictor,
    },
    Cqr {
        t_lo: &'a QuantileModel,
        t_hi: &'a QuantileModel,
    },
}

impl RegressionModels<'_> {
    pub fn method(&self) -> RegressionMethod {
        match self {
            RegressionModels::Naive { .. } => RegressionMethod::Naive,
            RegressionModels::Crf { .. } => RegressionMethod::Crf,
            RegressionModels::Cqr { .. } => RegressionMethod::Cqr,
        }
    }

    pub fn output(&self, x: &[f64]) -> RegressionOutput {
        match *self {
            RegressionModels::Naive { f } => RegressionOutput::Point(f.predict(x)),
            RegressionModels::Crf { f, r } => RegressionOutput::Scaled {
                center: f.predict(x),
                scale: r.predict(x),
            },
            RegressionModels::Cqr { t_lo, t_hi } => RegressionOutput::Band {
                lower: t_lo.predict(x),
                upper: t_hi.predict(x),
            },
        }
    }
}

/// A calibrated interval predictor.
///
/// Prediction takes `&self` and is safe to call from several threads; the
/// number of CQR band crossings seen so far is tracked atomically.
pub struct RegressionCalibration<'a> {
    models: RegressionModels<'a>,
    quantile: ConformalQuantile,
    crossings: AtomicUsize,
}

impl<'a> RegressionCalibration<'a> {
    pub fn calibrate(models: RegressionModels<'a>, cal: &Dataset, alpha: f64) -> Result<Self> {
        let y = cal.real_targets()?;
        let outputs: Vec<RegressionOutput> = cal.rows().map(|x| models.output(x)).collect();
        let quantile = calibrate_outputs(&outputs, y, alpha)?;
        Ok(Self {
            models,
            quantile,
            crossings: AtomicUsize::new(0),
        })
    }

    pub fn method(&self) -> RegressionMethod {
        self.models.method()
    }

    pub fn quantile(&self) -> &ConformalQuantile {
        &self.quantile
    }

    pub fn predict_interval(&self, x: &[f64]) -> PredictionInterval {
        let (interval, crossed) = self.models.output(x).interval(self.quantile.q_hat);
        if crossed {
            self.crossings.fetch_add(1, Ordering::Relaxed);
        }
        interval
    }

    pub fn crossing_count(&self) -> usize {
        self.crossings.load(Ordering::Relaxed)
    }
}

/// Naive calibration on absolute residuals of `f` over `cal`.
pub fn calibrate_naive<'a>(f: &'a dyn PointPredictor, cal: &Dataset, alpha: f64) -> Result<RegressionCalibration<'a>> {
    RegressionCalibration::calibrate(RegressionModels::Naive { f }, cal, alpha)
}

/// Residual-normalized calibration over `cal2`, disjoint from the data that
/// trained `f` and `r`.
pub fn calibrate_crf<'a>(
    f: &'a dyn PointPredictor,
    r: &'a dyn PointPredictor,
    cal2: &Dataset,
    alpha: f64,
) -> Result<RegressionCalibration<'a>> {
    RegressionCalibration::calibrate(RegressionModels::Crf { f, r }, cal2, alpha)
}

/// Calibration of a quantile band `[t_lo, t_hi]`, fitted at levels `α/2` and `1 − α/2`.
pub fn calibrate_cqr<'a>(
    t_lo: &'a QuantileModel,
    t_hi: &'a QuantileModel,
    cal: &Dataset,
    alpha: f64,
) -> Result<RegressionCalibration<'a>> {
    RegressionCalibration::calibrate(RegressionModels::Cqr { t_lo, t_hi }, cal, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::QuantileFitConfig;

    struct Affine(f64, f64);
    impl PointPredictor for Affine {
        fn predict(&self, x: &[f64]) -> f64 {
            self.0 + self.1 * x[0]
        }
    }

    fn dataset(xs: &[f64], ys: &[f64]) -> Dataset {
        Dataset::regression(xs.iter().map(|&x| vec![x]).collect(), ys.to_vec()).unwrap()
    }

    #[test]
    fn absolute_score_examples() {
        let f = Affine(8.0, 0.0);
        assert_eq!(score_absolute(&f, &[0.0], 8.0), 0.0);
        assert_eq!(score_absolute(&f, &[0.0], 10.0), 2.0);
        for delta in [0.1, 3.0, 17.5] {
            assert_eq!(score_absolute(&f, &[0.0], 8.0 + delta), score_absolute(&f, &[0.0], 8.0 - delta));
        }
    }

    #[test]
    fn naive_hand_example() {
        // residuals {1,2,3,4,5}; rank ⌈6·0.5⌉ = 3
        let f = Affine(0.0, 0.0);
        let cal = dataset(&[0.0; 5], &[1.0, -2.0, 3.0, -4.0, 5.0]);
        let c = calibrate_naive(&f, &cal, 0.5).unwrap();
        assert_eq!(c.quantile().q_hat, 3.0);
        let iv = c.predict_interval(&[0.0]);
        assert_eq!((iv.lower, iv.upper), (-3.0, 3.0));
    }

    #[test]
    fn naive_constant_scores_and_width() {
        let f = Affine(1.0, 2.0);
        let xs: Vec<f64> = (0..20).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| 1.0 + 2.0 * x + if i % 2 == 0 { 0.75 } else { -0.75 }).collect();
        let c = calibrate_naive(&f, &dataset(&xs, &ys), 0.1).unwrap();
        assert_eq!(c.quantile().q_hat, 0.75);
        for x in [-3.0, 0.0, 12.5] {
            let iv = c.predict_interval(&[x]);
            assert_eq!(iv.lower, f.predict(&[x]) - 0.75);
            assert_eq!(iv.width(), 2.0 * c.quantile().q_hat);
        }
    }

    #[test]
    fn degenerate_calibration_gives_whole_line() {
        let f = Affine(0.0, 0.0);
        let c = calibrate_naive(&f, &dataset(&[0.0, 1.0, 2.0], &[1.0, 2.0, 3.0]), 0.05).unwrap();
        assert!(c.quantile().degenerate);
        let iv = c.predict_interval(&[0.0]);
        assert_eq!((iv.lower, iv.upper), (f64::NEG_INFINITY, f64::INFINITY));
    }

    #[test]
    fn empty_calibration_is_rejected() {
        let f = Affine(0.0, 0.0);
        let empty = Dataset::regression(vec![], vec![]).unwrap();
        assert!(matches!(calibrate_naive(&f, &empty, 0.1), Err(Error::EmptyCalibration)));
    }

    #[test]
    fn normalized_score_examples() {
        let f = Affine(8.0, 0.0);
        assert_eq!(score_normalized(&f, &Affine(2.0, 0.0), &[0.0], 10.0), 1.0);
        assert_eq!(score_normalized(&f, &Affine(5.0, 0.0), &[0.0], 8.0), 0.0);
        assert_eq!(score_normalized(&f, &Affine(0.0, 0.0), &[0.0], 9.0), 1.0 / R_FLOOR);
        assert_eq!(score_normalized(&f, &Affine(-3.0, 0.0), &[0.0], 9.0), 1.0 / R_FLOOR);
    }

    #[test]
    fn crf_unit_quantile_is_raw_band() {
        let out = RegressionOutput::Scaled { center: 4.0, scale: 1.5 };
        let (iv, _) = out.interval(1.0);
        assert_eq!((iv.lower, iv.upper), (2.5, 5.5));
        let (iv, _) = out.interval(2.97);
        assert!((iv.width() - 2.0 * 2.97 * 1.5).abs() < 1e-12);
    }

    #[test]
    fn crf_four_point_oracle() {
        // f(x) = x, r(x) = 1 + x on x = 0..3; ys give normalized scores {2, 0.5, 1, 0.25}
        let f = Affine(0.0, 1.0);
        let r = Affine(1.0, 1.0);
        let cal = dataset(&[0.0, 1.0, 2.0, 3.0], &[2.0, 0.0, 5.0, 4.0]);
        let c = calibrate_crf(&f, &r, &cal, 0.4).unwrap();
        // rank ⌈5·0.6⌉ = 3 over sorted {0.25, 0.5, 1, 2}
        assert_eq!(c.quantile().q_hat, 1.0);
        let iv = c.predict_interval(&[1.0]);
        assert_eq!((iv.lower, iv.upper), (-1.0, 3.0));
    }

    #[test]
    fn cqr_score_examples() {
        let band = RegressionOutput::Band { lower: 2.0, upper: 5.0 };
        assert_eq!(band.score(6.0), 1.0);
        assert!(band.score(3.5) < 0.0);
        assert_eq!(band.score(2.0), 0.0);
    }

    #[test]
    fn cqr_interval_examples() {
        let band = RegressionOutput::Band { lower: 2.0, upper: 5.0 };
        assert_eq!(band.interval(0.5).0, PredictionInterval { lower: 1.5, upper: 5.5 });
        assert_eq!(band.interval(0.0).0, PredictionInterval { lower: 2.0, upper: 5.0 });
        for q in [-1.0, -0.5, 0.0, 0.7, 3.0] {
            let (iv, crossed) = band.interval(q);
            assert!(!crossed);
            assert!((iv.width() - (3.0 + 2.0 * q)).abs() < 1e-12);
        }
        let (iv, crossed) = band.interval(-2.0);
        assert!(crossed);
        assert_eq!((iv.lower, iv.upper), (3.5, 3.5));
    }

    #[test]
    fn cqr_calibration_counts_crossings() {
        let ds = crate::dataset::make_synthetic_regression(400, crate::dataset::Noise::Heteroscedastic, 3).unwrap();
        let train = ds.subset(&(0..200).collect::<Vec<_>>());
        let cal = ds.subset(&(200..400).collect::<Vec<_>>());
        let lo = QuantileModel::fit(&train, &QuantileFitConfig::new(0.05)).unwrap();
        let hi = QuantileModel::fit(&train, &QuantileFitConfig::new(0.95)).unwrap();
        let c = calibrate_cqr(&lo, &hi, &cal, 0.1).unwrap();
        let x = [5.0];
        let iv = c.predict_interval(&x);
        assert!((iv.lower - (lo.predict(&x) - c.quantile().q_hat)).abs() < 1e-12);
        assert_eq!(c.crossing_count(), 0);
        assert_eq!(
            score_cqr(&lo, &hi, &x, 100.0),
            RegressionModels::Cqr { t_lo: &lo, t_hi: &hi }.output(&x).score(100.0)
        );
    }

    #[test]
    fn smaller_alpha_gives_nested_wider_intervals() {
        let f = Affine(0.0, 1.0);
        let xs: Vec<f64> = (0..60).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| x + ((i * 37) % 11) as f64 - 5.0).collect();
        let cal = dataset(&xs, &ys);
        let wide = calibrate_naive(&f, &cal, 0.05).unwrap();
        let narrow = calibrate_naive(&f, &cal, 0.2).unwrap();
        for x in [0.0, 2.0, 7.0] {
            let (a, b) = (wide.predict_interval(&[x]), narrow.predict_interval(&[x]));
            assert!(a.lower <= b.lower && b.upper <= a.upper);
        }
    }

    #[test]
    fn mixed_outputs_are_rejected() {
        let outs = [RegressionOutput::Point(0.0), RegressionOutput::Band { lower: 0.0, upper: 1.0 }];
        assert!(calibrate_outputs(&outs, &[0.0, 0.0], 0.1).is_err());
        assert!(calibrate_outputs(&outs[..1], &[0.0, 0.0], 0.1).is_err());
    }
}
