//! End-to-end runs: load or generate data, split, fit, calibrate, validate.
//!
//! Part roles by fractions list:
//! three parts are `train / cal / val`; CRF takes four, `train / cal1 / cal2 / val`,
//! where `cal1` trains the residual model and `cal2` calibrates.

use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classification::{per_class_coverage, set_size_histogram, ClassificationCalibration, ClassificationMethod, PredictionSet};
use crate::dataset::{load_csv, make_blobs, make_synthetic_regression, split, BlobConfig, Dataset, Noise, SplitIndices, Task};
use crate::diagnostics::{
    beta_params, empirical_coverage, run_trials, CoverageReport, CoverageTrial, KsMode, SummaryStats, TrialDistribution,
    TrialOutcome,
};
use crate::error::check_alpha;
use crate::models::{
    fit_residual_model, ClassProbabilities, KnnRegressor, PointPredictor, QuantileFitConfig, QuantileModel,
    SoftmaxClassifier, SoftmaxFitConfig,
};
use crate::quantile::ConformalQuantile;
use crate::regression::{calibrate_outputs, PredictionInterval, RegressionOutput};
use crate::diagnostics::report::REPORT_SCHEMA_VERSION;
use crate::rng::{permutation, seeded};
use crate::{Error, Execution, Result};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    NaiveReg,
    Crf,
    Cqr,
    NaiveCls,
    ClassBalanced,
    Aps,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::NaiveReg,
        Method::Crf,
        Method::Cqr,
        Method::NaiveCls,
        Method::ClassBalanced,
        Method::Aps,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::NaiveReg => "naive-reg",
            Method::Crf => "crf",
            Method::Cqr => "cqr",
            Method::NaiveCls => "naive-cls",
            Method::ClassBalanced => "class-balanced",
            Method::Aps => "aps",
        }
    }

    pub fn task(self) -> Task {
        match self {
            Method::NaiveReg | Method::Crf | Method::Cqr => Task::Regression,
            _ => Task::Classification,
        }
    }

    pub fn part_names(self) -> &'static [&'static str] {
        match self {
            Method::Crf => &["train", "cal1", "cal2", "val"],
            _ => &["train", "cal", "val"],
        }
    }

    pub fn default_fractions(self) -> Vec<f64> {
        match self {
            Method::Crf => vec![0.4, 0.2, 0.2, 0.2],
            _ => vec![0.5, 0.25, 0.25],
        }
    }

    fn classification_method(self) -> Option<ClassificationMethod> {
        match self {
            Method::NaiveCls => Some(ClassificationMethod::Naive),
            Method::ClassBalanced => Some(ClassificationMethod::ClassBalanced),
            Method::Aps => Some(ClassificationMethod::Aps),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
                Error::Config(format!("unknown method '{s}' (expected one of {})", names.join(", ")))
            })
    }
}

/// Where the data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Source {
    Csv { path: PathBuf, target: String },
    SyntheticRegression { n: usize, noise: Noise },
    Blobs(BlobConfig),
}

impl Source {
    /// The default synthetic source for a task.
    pub fn synthetic_for(task: Task) -> Self {
        match task {
            Task::Regression => Source::SyntheticRegression {
                n: 2000,
                noise: Noise::Homoscedastic { sigma: 1.0 },
            },
            Task::Classification => Source::Blobs(BlobConfig::new(5000, 5)),
        }
    }

    fn task(&self) -> Option<Task> {
        match self {
            Source::Csv { .. } => None,
            Source::SyntheticRegression { .. } => Some(Task::Regression),
            Source::Blobs(_) => Some(Task::Classification),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    /// Neighbours for the point predictor `f`.
    pub knn_k: usize,
    /// Neighbours for the CRF residual model `r`.
    pub residual_k: usize,
    pub quantile_steps: usize,
    pub quantile_step_size: f64,
    pub softmax_steps: usize,
    pub softmax_step_size: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            knn_k: 5,
            residual_k: 5,
            quantile_steps: 2000,
            quantile_step_size: 1.0,
            softmax_steps: 500,
            softmax_step_size: 0.5,
        }
    }
}

/// A complete, reproducible description of one run or trial study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub method: Method,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Defaults to the method's standard split when absent.
    #[serde(default)]
    pub fractions: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    /// Seed for synthetic data; defaults to `seed`.
    #[serde(default)]
    pub data_seed: Option<u64>,
    pub source: Source,
    #[serde(default)]
    pub models: ModelParams,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub ks_mode: KsMode,
    #[serde(default)]
    pub execution: Execution,
}

fn schema_version() -> u32 {
    CONFIG_SCHEMA_VERSION
}

fn default_alpha() -> f64 {
    0.1
}

fn default_trials() -> usize {
    1000
}

impl PipelineConfig {
    pub fn new(method: Method, source: Source) -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            method,
            alpha: default_alpha(),
            fractions: None,
            seed: 0,
            data_seed: None,
            source,
            models: ModelParams::default(),
            trials: default_trials(),
            ks_mode: KsMode::default(),
            execution: Execution::default(),
        }
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn fractions(&self) -> Vec<f64> {
        self.fractions.clone().unwrap_or_else(|| self.method.default_fractions())
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported config schema_version {} (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        check_alpha(self.alpha)?;
        let parts = self.method.part_names();
        let fractions = self.fractions();
        if fractions.len() < parts.len() {
            // Fractions are read as train, cal.., val; the missing parts are
            // the calibration parts beyond those supplied.
            let missing = if fractions.len() >= 2 {
                parts[fractions.len() - 1..parts.len() - 1].join(", ")
            } else {
                parts[fractions.len()..].join(", ")
            };
            return Err(Error::Config(format!(
                "{} needs {} fractions ({}), got {}; missing the {} part",
                self.method,
                parts.len(),
                parts.join(", "),
                fractions.len(),
                missing
            )));
        }
        if fractions.len() > parts.len() {
            return Err(Error::Config(format!(
                "{} takes {} fractions ({}), got {}",
                self.method,
                parts.len(),
                parts.join(", "),
                fractions.len()
            )));
        }
        if let Some(task) = self.source.task() {
            if task != self.method.task() {
                return Err(Error::Config(format!(
                    "method {} is a {} method but the source generates {} data",
                    self.method,
                    self.method.task().name(),
                    task.name()
                )));
            }
        }
        let m = &self.models;
        if m.knn_k == 0 || m.residual_k == 0 {
            return Err(Error::Config("knn_k and residual_k must be at least 1".into()));
        }
        Ok(())
    }

    pub fn load_data(&self) -> Result<Dataset> {
        let data_seed = self.data_seed.unwrap_or(self.seed);
        match &self.source {
            Source::Csv { path, target } => load_csv(path, target, self.method.task()),
            Source::SyntheticRegression { n, noise } => make_synthetic_regression(*n, *noise, data_seed),
            Source::Blobs(cfg) => make_blobs(cfg, data_seed),
        }
    }
}

enum FittedModels {
    Naive(KnnRegressor),
    Crf { f: KnnRegressor, r: KnnRegressor },
    Cqr { lo: QuantileModel, hi: QuantileModel },
    Softmax(SoftmaxClassifier),
}

/// Base-model outputs on the calibration/validation pool, which is all a
/// calibration round needs.
enum PoolOutputs {
    Regression {
        outputs: Vec<RegressionOutput>,
        targets: Vec<f64>,
    },
    Classification {
        method: ClassificationMethod,
        probs: Vec<ClassProbabilities>,
        labels: Vec<usize>,
        n_classes: usize,
    },
}

/// Per-point prediction on the validation part.
#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Interval(PredictionInterval),
    Set(PredictionSet),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    /// Row index in the loaded dataset.
    pub index: usize,
    pub truth: f64,
    pub prediction: Prediction,
    /// Interval width or set size.
    pub size: f64,
    pub covered: bool,
}

struct Evaluation {
    quantiles: Vec<ConformalQuantile>,
    predictions: Vec<Prediction>,
    coverage: f64,
    sizes: Vec<f64>,
    crossings: Option<usize>,
    per_class: Option<Vec<Option<f64>>>,
    set_histogram: Option<Vec<usize>>,
}

/// Models fitted once on the training part(s); calibration can then be
/// redone on any cal/val partition of the pool.
pub struct FittedPipeline {
    config: PipelineConfig,
    split: SplitIndices,
    n_train: usize,
    n_residual: Option<usize>,
    /// Dataset row of each pool position.
    pool_rows: Vec<usize>,
    n_cal: usize,
    n_val: usize,
    models: FittedModels,
    outputs: PoolOutputs,
}

impl FittedPipeline {
    pub fn fit(config: &PipelineConfig) -> Result<Self> {
        config.validate()?;
        let data = config.load_data()?;
        Self::fit_on(config, &data)
    }

    pub fn fit_on(config: &PipelineConfig, data: &Dataset) -> Result<Self> {
        config.validate()?;
        if data.task() != config.method.task() {
            return Err(Error::WrongTask {
                expected: config.method.task().name(),
            });
        }
        let split = split(data, &config.fractions(), config.seed)?;
        let exec = config.execution;
        let m = &config.models;
        let train = data.subset(&split.parts[0]);
        let (models, n_residual) = match config.method {
            Method::NaiveReg => (FittedModels::Naive(KnnRegressor::fit(&train, m.knn_k)?), None),
            Method::Crf => {
                let f = KnnRegressor::fit(&train, m.knn_k)?;
                let cal1 = data.subset(&split.parts[1]);
                let r = fit_residual_model(&f, &cal1, m.residual_k)?;
                (FittedModels::Crf { f, r }, Some(cal1.n_samples()))
            }
            Method::Cqr => {
                let fit = |eps: f64| {
                    QuantileModel::fit(
                        &train,
                        &QuantileFitConfig {
                            epsilon: eps,
                            steps: m.quantile_steps,
                            step_size: m.quantile_step_size,
                        },
                    )
                };
                let half = config.alpha / 2.0;
                (
                    FittedModels::Cqr {
                        lo: fit(half)?,
                        hi: fit(1.0 - half)?,
                    },
                    None,
                )
            }
            _ => {
                let cfg = SoftmaxFitConfig {
                    steps: m.softmax_steps,
                    step_size: m.softmax_step_size,
                };
                (FittedModels::Softmax(SoftmaxClassifier::fit(&train, &cfg)?), None)
            }
        };

        let (cal_part, val_part) = {
            let p = &split.parts;
            (&p[p.len() - 2], &p[p.len() - 1])
        };
        let pool_rows: Vec<usize> = cal_part.iter().chain(val_part).copied().collect();
        let pool = data.subset(&pool_rows);
        let outputs = match &models {
            FittedModels::Softmax(clf) => PoolOutputs::Classification {
                method: config
                    .method
                    .classification_method()
                    .expect("classification method"),
                probs: exec.map_range(pool.n_samples(), |i| clf.predict_proba(pool.row(i))),
                labels: pool.labels()?.to_vec(),
                n_classes: clf.n_classes(),
            },
            regression => {
                let outputs = match regression {
                    FittedModels::Naive(f) => {
                        f.predict_all(&pool, exec).into_iter().map(RegressionOutput::Point).collect()
                    }
                    FittedModels::Crf { f, r } => f
                        .predict_all(&pool, exec)
                        .into_iter()
                        .zip(r.predict_all(&pool, exec))
                        .map(|(center, scale)| RegressionOutput::Scaled { center, scale })
                        .collect(),
                    FittedModels::Cqr { lo, hi } => lo
                        .predict_all(&pool, exec)
                        .into_iter()
                        .zip(hi.predict_all(&pool, exec))
                        .map(|(lower, upper)| RegressionOutput::Band { lower, upper })
                        .collect(),
                    FittedModels::Softmax(_) => unreachable!(),
                };
                PoolOutputs::Regression {
                    outputs,
                    targets: pool.real_targets()?.to_vec(),
                }
            }
        };
        Ok(Self {
            config: config.clone(),
            n_train: train.n_samples(),
            n_residual,
            n_cal: cal_part.len(),
            n_val: val_part.len(),
            split,
            pool_rows,
            models,
            outputs,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn split(&self) -> &SplitIndices {
        &self.split
    }

    /// Training diagnostics, such as warnings from quantile regression.
    pub fn warnings(&self) -> Vec<String> {
        match &self.models {
            FittedModels::Cqr { lo, hi } => lo.warnings().iter().chain(hi.warnings()).cloned().collect(),
            _ => Vec::new(),
        }
    }

    fn evaluate(&self, cal: &[usize], val: &[usize]) -> Result<Evaluation> {
        let alpha = self.config.alpha;
        match &self.outputs {
            PoolOutputs::Regression { outputs, targets } => {
                let cal_out: Vec<RegressionOutput> = cal.iter().map(|&i| outputs[i]).collect();
                let cal_y: Vec<f64> = cal.iter().map(|&i| targets[i]).collect();
                let q = calibrate_outputs(&cal_out, &cal_y, alpha)?;
                let mut crossings = 0;
                let intervals: Vec<PredictionInterval> = val
                    .iter()
                    .map(|&i| {
                        let (iv, crossed) = outputs[i].interval(q.q_hat);
                        crossings += usize::from(crossed);
                        iv
                    })
                    .collect();
                let truths: Vec<f64> = val.iter().map(|&i| targets[i]).collect();
                Ok(Evaluation {
                    quantiles: vec![q],
                    coverage: empirical_coverage(&intervals, &truths)?,
                    sizes: val.iter().map(|&i| outputs[i].width(q.q_hat)).collect(),
                    crossings: matches!(self.models, FittedModels::Cqr { .. }).then_some(crossings),
                    predictions: intervals.into_iter().map(Prediction::Interval).collect(),
                    per_class: None,
                    set_histogram: None,
                })
            }
            PoolOutputs::Classification {
                method,
                probs,
                labels,
                n_classes,
            } => {
                let cal_p: Vec<ClassProbabilities> = cal.iter().map(|&i| probs[i].clone()).collect();
                let cal_y: Vec<usize> = cal.iter().map(|&i| labels[i]).collect();
                let calib = ClassificationCalibration::calibrate(*method, &cal_p, &cal_y, alpha)?;
                let sets: Vec<PredictionSet> = val.iter().map(|&i| calib.predict_set(&probs[i])).collect();
                let truths: Vec<usize> = val.iter().map(|&i| labels[i]).collect();
                Ok(Evaluation {
                    quantiles: calib.quantiles,
                    coverage: empirical_coverage(&sets, &truths)?,
                    sizes: sets.iter().map(|s| s.len() as f64).collect(),
                    crossings: None,
                    per_class: Some(per_class_coverage(&sets, &truths, *n_classes)?),
                    set_histogram: Some(set_size_histogram(&sets, *n_classes)?),
                    predictions: sets.into_iter().map(Prediction::Set).collect(),
                })
            }
        }
    }

    fn truth_at(&self, pos: usize) -> f64 {
        match &self.outputs {
            PoolOutputs::Regression { targets, .. } => targets[pos],
            PoolOutputs::Classification { labels, .. } => labels[pos] as f64,
        }
    }

    /// Calibrates on the configured cal part and validates on the val part.
    pub fn run(&self) -> Result<RunOutput> {
        let cal: Vec<usize> = (0..self.n_cal).collect();
        let val: Vec<usize> = (self.n_cal..self.n_cal + self.n_val).collect();
        let eval = self.evaluate(&cal, &val)?;
        let records: Vec<PredictionRecord> = val
            .iter()
            .zip(eval.predictions)
            .zip(&eval.sizes)
            .map(|((&pos, prediction), &size)| {
                let truth = self.truth_at(pos);
                let covered = match &prediction {
                    Prediction::Interval(iv) => iv.contains(truth),
                    Prediction::Set(s) => s.contains(truth as usize),
                };
                PredictionRecord {
                    index: self.pool_rows[pos],
                    truth,
                    prediction,
                    size,
                    covered,
                }
            })
            .collect();
        let is_classification = matches!(self.outputs, PoolOutputs::Classification { .. });
        let report = CoverageReport {
            schema_version: REPORT_SCHEMA_VERSION,
            method: self.config.method.name().to_string(),
            task: self.config.method.task().name().to_string(),
            alpha: self.config.alpha,
            seed: self.config.seed,
            n_train: self.n_train,
            n_residual: self.n_residual,
            n_cal: self.n_cal,
            n_val: self.n_val,
            q_hat: eval.quantiles.iter().map(|q| q.q_hat).collect(),
            degenerate: eval.quantiles.iter().any(|q| q.degenerate),
            empirical_coverage: eval.coverage,
            expected_coverage: beta_params(self.n_cal, self.config.alpha).ok().map(|b| b.mean()),
            size_kind: if is_classification { "set_size" } else { "width" }.to_string(),
            size: SummaryStats::from_values(&eval.sizes)?,
            empty_set_rate: is_classification
                .then(|| eval.sizes.iter().filter(|&&s| s == 0.0).count() as f64 / self.n_val as f64),
            per_class_coverage: eval.per_class,
            set_size_histogram: eval.set_histogram,
            crossing_count: eval.crossings,
        };
        Ok(RunOutput { report, records })
    }

    /// Runs `t` recalibration trials with seeds `config.seed ⊕ j`.
    pub fn trials(&self, t: usize) -> Result<TrialDistribution> {
        run_trials(self, t, self.config.seed, self.config.execution)
    }
}

impl CoverageTrial for FittedPipeline {
    fn n_cal(&self) -> usize {
        self.n_cal
    }

    fn n_val(&self) -> usize {
        self.n_val
    }

    fn alpha(&self) -> f64 {
        self.config.alpha
    }

    fn run_trial(&self, seed: u64) -> Result<TrialOutcome> {
        let perm = permutation(self.pool_rows.len(), &mut seeded(seed));
        let (cal, val) = perm.split_at(self.n_cal);
        let eval = self.evaluate(cal, val)?;
        Ok(TrialOutcome {
            coverage: eval.coverage,
            mean_size: eval.sizes.iter().sum::<f64>() / eval.sizes.len() as f64,
            per_class: eval.per_class,
        })
    }
}

pub struct RunOutput {
    pub report: CoverageReport,
    pub records: Vec<PredictionRecord>,
}

impl RunOutput {
    /// Writes one row per validation point.
    ///
    /// Regression columns: `index,truth,lower,upper,covered`.
    /// Classification columns: `index,truth,set,set_size,covered`, with set
    /// members joined by `;`.
    pub fn write_predictions_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io_err = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
        let classification = self.report.task == Task::Classification.name();
        if classification {
            writeln!(out, "index,truth,set,set_size,covered").map_err(io_err)?;
        } else {
            writeln!(out, "index,truth,lower,upper,covered").map_err(io_err)?;
        }
        for r in &self.records {
            let covered = u8::from(r.covered);
            match &r.prediction {
                Prediction::Interval(iv) => {
                    writeln!(out, "{},{},{},{},{covered}", r.index, r.truth, iv.lower, iv.upper)
                }
                Prediction::Set(s) => {
                    let members: Vec<String> = s.classes().iter().map(usize::to_string).collect();
                    writeln!(out, "{},{},{},{},{covered}", r.index, r.truth as usize, members.join(";"), s.len())
                }
            }
            .map_err(io_err)?;
        }
        out.flush().map_err(io_err)
    }
}
