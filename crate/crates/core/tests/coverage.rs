use icp_core::classification::{calibrate_aps, calibrate_class_balanced, calibrate_naive_cls};
use icp_core::dataset::{make_blobs, make_synthetic_regression, split, split_len, BlobConfig, Noise};
use icp_core::diagnostics::{empirical_coverage, run_trials, CoverageTrial, TrialOutcome};
use icp_core::models::{fit_residual_model, KnnRegressor, QuantileFitConfig, QuantileModel, SoftmaxClassifier, SoftmaxFitConfig};
use icp_core::pipeline::{FittedPipeline, Method, PipelineConfig, Source};
use icp_core::regression::{calibrate_cqr, calibrate_crf, calibrate_naive};
use icp_core::{Execution, Result};
use proptest::prelude::*;

proptest! {
    #[test]
    fn split_partitions_exactly(n in 12usize..400, seed: u64, four: bool, w in prop::collection::vec(0.05f64..1.0, 4)) {
        let parts = if four { 4 } else { 3 };
        let total: f64 = w[..parts].iter().sum();
        let fractions: Vec<f64> = w[..parts].iter().map(|x| x / total).collect();
        if let Ok(s) = split_len(n, &fractions, seed) {
            let mut all: Vec<usize> = s.parts.concat();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            for (size, f) in s.sizes().iter().zip(&fractions) {
                prop_assert!((*size as f64 - f * n as f64).abs() < 1.0);
            }
        }
    }
}

#[test]
fn public_regression_api_covers() {
    let data = make_synthetic_regression(3000, Noise::Heteroscedastic, 4).unwrap();
    let s = split(&data, &[0.4, 0.2, 0.2, 0.2], 4).unwrap();
    let [train, cal1, cal2, val] = [0, 1, 2, 3].map(|i| data.subset(&s.parts[i]));
    let y = val.real_targets().unwrap();

    let f = KnnRegressor::fit(&train, 5).unwrap();
    let r = fit_residual_model(&f, &cal1, 5).unwrap();
    let lo = QuantileModel::fit(&train, &QuantileFitConfig::new(0.05)).unwrap();
    let hi = QuantileModel::fit(&train, &QuantileFitConfig::new(0.95)).unwrap();

    let calibrations = [
        calibrate_naive(&f, &cal2, 0.1).unwrap(),
        calibrate_crf(&f, &r, &cal2, 0.1).unwrap(),
        calibrate_cqr(&lo, &hi, &cal2, 0.1).unwrap(),
    ];
    for c in &calibrations {
        let intervals: Vec<_> = val.rows().map(|x| c.predict_interval(x)).collect();
        let coverage = empirical_coverage(&intervals, y).unwrap();
        assert!((0.85..=0.95).contains(&coverage), "{:?}: {coverage}", c.method());
    }
}

#[test]
fn public_classification_api_covers() {
    let data = make_blobs(&BlobConfig::new(3000, 4), 8).unwrap();
    let s = split(&data, &[0.5, 0.25, 0.25], 8).unwrap();
    let [train, cal, val] = [0, 1, 2].map(|i| data.subset(&s.parts[i]));
    let clf = SoftmaxClassifier::fit(&train, &SoftmaxFitConfig::default()).unwrap();
    let probs = |d: &icp_core::dataset::Dataset| d.rows().map(|x| clf.predict_proba(x)).collect::<Vec<_>>();
    let (cal_p, val_p) = (probs(&cal), probs(&val));
    let (cal_y, val_y) = (cal.labels().unwrap(), val.labels().unwrap());
    for c in [
        calibrate_naive_cls(&cal_p, cal_y, 0.1).unwrap(),
        calibrate_class_balanced(&cal_p, cal_y, 0.1).unwrap(),
        calibrate_aps(&cal_p, cal_y, 0.1).unwrap(),
    ] {
        let sets: Vec<_> = val_p.iter().map(|p| c.predict_set(p)).collect();
        assert!(empirical_coverage(&sets, val_y).unwrap() >= 0.85, "{:?}", c.method);
    }
}

#[test]
fn degenerate_calibration_covers_everything() {
    // 5 calibration points at alpha = 0.1 need rank 6
    let mut cfg = PipelineConfig::new(
        Method::NaiveReg,
        Source::SyntheticRegression {
            n: 20,
            noise: Noise::Homoscedastic { sigma: 1.0 },
        },
    );
    cfg.fractions = Some(vec![0.5, 0.25, 0.25]);
    let out = FittedPipeline::fit(&cfg).unwrap().run().unwrap();
    assert_eq!(out.report.n_cal, 5);
    assert!(out.report.degenerate);
    assert_eq!(out.report.empirical_coverage, 1.0);
    let json = serde_json::to_value(&out.report).unwrap();
    assert!(json["q_hat"][0].is_null());
    assert!(json["size"]["mean"].is_null());
}

#[test]
fn pipeline_trials_are_pure_functions_of_their_inputs() {
    for method in [Method::NaiveReg, Method::Aps] {
        let source = match method {
            Method::Aps => Source::Blobs(BlobConfig::new(1000, 3)),
            _ => Source::synthetic_for(method.task()),
        };
        let mut cfg = PipelineConfig::new(method, source);
        cfg.seed = 17;
        let a = FittedPipeline::fit(&cfg).unwrap().trials(40).unwrap();
        cfg.execution = Execution::Sequential;
        let b = FittedPipeline::fit(&cfg).unwrap().trials(40).unwrap();
        assert_eq!(a, b);
        assert!(a.coverages.iter().all(|c| (0.0..=1.0).contains(c)));
        cfg.seed = 18;
        assert_ne!(FittedPipeline::fit(&cfg).unwrap().trials(40).unwrap(), a);
    }
}

struct Fixed(f64);

impl CoverageTrial for Fixed {
    fn n_cal(&self) -> usize {
        126
    }
    fn n_val(&self) -> usize {
        127
    }
    fn alpha(&self) -> f64 {
        0.1
    }
    fn run_trial(&self, _seed: u64) -> Result<TrialOutcome> {
        Ok(TrialOutcome {
            coverage: self.0,
            mean_size: 1.0,
            per_class: None,
        })
    }
}

#[test]
fn single_trial_is_one_coverage() {
    let d = run_trials(&Fixed(0.75), 1, 0, Execution::Parallel).unwrap();
    assert_eq!(d.coverages, vec![0.75]);
    assert_eq!(d.beta.a, 115.0);
    assert_eq!(d.standard_error(), 0.0);
}
