//! Datasets: CSV ingestion, seeded splitting and synthetic generators.
//!
//! CSV files are comma-separated UTF-8 with a mandatory header row, `.` as
//! the decimal separator and no quoting of numeric cells. Lines starting
//! with `#` are comments; [`write_csv`] uses one to stamp the generator settings
//! of synthetic data.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::rng::{self, Rng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Regression,
    Classification,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Regression => "regression",
            Task::Classification => "classification",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Real(Vec<f64>),
    Labels { labels: Vec<usize>, n_classes: usize },
}

impl Targets {
    fn len(&self) -> usize {
        match self {
            Targets::Real(v) => v.len(),
            Targets::Labels { labels, .. } => labels.len(),
        }
    }
}

/// Feature matrix (row-major) plus task-tagged targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    n_features: usize,
    targets: Targets,
    feature_names: Vec<String>,
    target_name: String,
}

impl Dataset {
    pub fn regression(rows: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        Self::from_rows(rows, Targets::Real(targets))
    }

    pub fn classification(rows: Vec<Vec<f64>>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        Self::from_rows(rows, Targets::Labels { labels, n_classes })
    }

    fn from_rows(rows: Vec<Vec<f64>>, targets: Targets) -> Result<Self> {
        let n_features = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != n_features) {
            return Err(Error::InvalidDataset(format!(
                "row {i} has {} features, expected {n_features}",
                rows[i].len()
            )));
        }
        let features = rows.into_iter().flatten().collect();
        let feature_names = (0..n_features).map(|j| format!("x{j}")).collect();
        Self::from_parts(features, n_features, targets, feature_names, "y".to_string())
    }

    /// Builds a dataset from a row-major feature buffer, checking every invariant.
    pub fn from_parts(
        features: Vec<f64>,
        n_features: usize,
        targets: Targets,
        feature_names: Vec<String>,
        target_name: String,
    ) -> Result<Self> {
        let n = targets.len();
        if features.len() != n * n_features {
            return Err(Error::InvalidDataset(format!(
                "{} feature values do not form {n} rows of {n_features}",
                features.len()
            )));
        }
        if feature_names.len() != n_features {
            return Err(Error::InvalidDataset(format!(
                "{} feature names for {n_features} features",
                feature_names.len()
            )));
        }
        if let Some(p) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite feature at row {}, column {}",
                p / n_features.max(1),
                p % n_features.max(1)
            )));
        }
        match &targets {
            Targets::Real(y) => {
                if let Some(i) = y.iter().position(|v| !v.is_finite()) {
                    return Err(Error::InvalidDataset(format!("non-finite target at row {i}")));
                }
            }
            Targets::Labels { labels, n_classes } => {
                if *n_classes < 2 {
                    return Err(Error::InvalidDataset(format!(
                        "classification needs at least 2 classes, got {n_classes}"
                    )));
                }
                if let Some(&bad) = labels.iter().find(|&&c| c >= *n_classes) {
                    return Err(Error::ClassOutOfRange {
                        index: bad,
                        n_classes: *n_classes,
                    });
                }
            }
        }
        Ok(Self {
            features,
            n_features,
            targets,
            feature_names,
            target_name,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.targets.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn task(&self) -> Task {
        match self.targets {
            Targets::Real(_) => Task::Regression,
            Targets::Labels { .. } => Task::Classification,
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n_samples()).map(move |i| self.row(i))
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    /// Real-valued targets; errors on a classification dataset.
    pub fn real_targets(&self) -> Result<&[f64]> {
        match &self.targets {
            Targets::Real(y) => Ok(y),
            Targets::Labels { .. } => Err(Error::WrongTask {
                expected: "regression",
            }),
        }
    }

    /// Class labels; errors on a regression dataset.
    pub fn labels(&self) -> Result<&[usize]> {
        match &self.targets {
            Targets::Labels { labels, .. } => Ok(labels),
            Targets::Real(_) => Err(Error::WrongTask {
                expected: "classification",
            }),
        }
    }

    pub fn n_classes(&self) -> Option<usize> {
        match self.targets {
            Targets::Labels { n_classes, .. } => Some(n_classes),
            Targets::Real(_) => None,
        }
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    /// The rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        let targets = match &self.targets {
            Targets::Real(y) => Targets::Real(indices.iter().map(|&i| y[i]).collect()),
            Targets::Labels { labels, n_classes } => Targets::Labels {
                labels: indices.iter().map(|&i| labels[i]).collect(),
                n_classes: *n_classes,
            },
        };
        Dataset {
            features,
            n_features: self.n_features,
            targets,
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
        }
    }
}

/// Loads a CSV file; every non-target column becomes a feature, in header order.
///
/// Under [`Task::Classification`] the target must hold non-negative integers
/// and the class count is `max label + 1`.
pub fn load_csv(path: impl AsRef<Path>, target_column: &str, task: Task) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let target_idx = header
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| Error::MissingColumn(target_column.to_string()))?;
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != target_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut features = Vec::new();
    let mut raw_targets = Vec::new();
    let mut lines = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        for (j, cell) in record.iter().enumerate() {
            let value = cell
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::NonNumeric {
                    line,
                    column: header[j].clone(),
                    value: cell.to_string(),
                })?;
            if j == target_idx {
                raw_targets.push(value);
            } else {
                features.push(value);
            }
        }
        lines.push(line);
    }

    let targets = match task {
        Task::Regression => Targets::Real(raw_targets),
        Task::Classification => {
            let mut labels = Vec::with_capacity(raw_targets.len());
            for (&v, &line) in raw_targets.iter().zip(&lines) {
                if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
                    return Err(Error::InvalidLabel { line, value: v });
                }
                labels.push(v as usize);
            }
            let n_classes = labels.iter().max().map_or(0, |m| m + 1);
            Targets::Labels { labels, n_classes }
        }
    };
    Dataset::from_parts(
        features,
        feature_names.len(),
        targets,
        feature_names,
        target_column.to_string(),
    )
}

/// Writes `dataset` as CSV (features then target). `stamp`, when given, is
/// written first as a `#` comment line. Floats use the shortest round-trip
/// representation, so [`load_csv`] reproduces the dataset exactly.
pub fn write_csv(dataset: &Dataset, path: impl AsRef<Path>, stamp: Option<&str>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = File::create(path).map_err(io_err)?;
    if let Some(stamp) = stamp {
        writeln!(file, "# {}", stamp.replace('\n', " ")).map_err(io_err)?;
    }
    let mut writer = csv::Writer::from_writer(file);
    let mut header = dataset.feature_names.clone();
    header.push(dataset.target_name.clone());
    writer.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for i in 0..dataset.n_samples() {
        record.clear();
        record.extend(dataset.row(i).iter().map(|v| v.to_string()));
        record.push(match &dataset.targets {
            Targets::Real(y) => y[i].to_string(),
            Targets::Labels { labels, .. } => labels[i].to_string(),
        });
        writer.write_record(&record)?;
    }
    writer.flush().map_err(io_err)?;
    Ok(())
}

/// Disjoint index sets produced by [`split`], in the order of the fractions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SplitIndices {
    pub parts: Vec<Vec<usize>>,
    pub seed: u64,
}

impl SplitIndices {
    pub fn sizes(&self) -> Vec<usize> {
        self.parts.iter().map(Vec::len).collect()
    }
}

/// Apportions `total` items by `weights` with largest-remainder rounding.
///
/// Equal remainders (within 1e-9) favour the later part, so 506 split
/// 50/25/25 gives (253, 126, 127).
pub fn largest_remainder(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|e| (e + 1e-9).floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    let rem = |i: usize| exact[i] - sizes[i] as f64;
    order.sort_by(|&a, &b| {
        let (ra, rb) = (rem(a), rem(b));
        if (ra - rb).abs() <= 1e-9 {
            b.cmp(&a)
        } else {
            rb.total_cmp(&ra)
        }
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        sizes[i] += 1;
    }
    sizes
}

/// Shuffles `0..dataset.n_samples()` with ChaCha8(`seed`) and cuts it into
/// 3 or 4 consecutive parts sized by [`largest_remainder`]. Each part is
/// returned sorted ascending.
pub fn split(dataset: &Dataset, fractions: &[f64], seed: u64) -> Result<SplitIndices> {
    split_len(dataset.n_samples(), fractions, seed)
}

pub fn split_len(n: usize, fractions: &[f64], seed: u64) -> Result<SplitIndices> {
    if !(3..=4).contains(&fractions.len()) {
        return Err(Error::InvalidFractions(format!(
            "expected 3 or 4 fractions, got {}",
            fractions.len()
        )));
    }
    if fractions.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
        return Err(Error::InvalidFractions(format!(
            "fractions must be positive: {fractions:?}"
        )));
    }
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidFractions(format!("fractions sum to {sum}, not 1")));
    }
    let sizes = largest_remainder(n, fractions);
    if let Some(p) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::InvalidFractions(format!(
            "part {p} would be empty for n={n}"
        )));
    }
    let perm = rng::permutation(n, &mut rng::seeded(seed));
    let mut parts = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for size in sizes {
        let mut part = perm[start..start + size].to_vec();
        part.sort_unstable();
        parts.push(part);
        start += size;
    }
    Ok(SplitIndices { parts, seed })
}

/// Noise law for [`make_synthetic_regression`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Noise {
    /// `y = 2x + 1 + sigma * eps`.
    Homoscedastic { sigma: f64 },
    /// `y = 2x + 1 + (0.2 + 0.3x) * eps`.
    Heteroscedastic,
}

impl Noise {
    pub fn scale_at(self, x: f64) -> f64 {
        match self {
            Noise::Homoscedastic { sigma } => sigma,
            Noise::Heteroscedastic => 0.2 + 0.3 * x,
        }
    }
}

/// One feature `x ~ Uniform(0, 10)`, `y = 2x + 1 + s(x) * eps` with standard
/// normal `eps`. For each sample `x` is drawn first, then `eps`, from ChaCha8(`seed`).
pub fn make_synthetic_regression(n: usize, noise: Noise, seed: u64) -> Result<Dataset> {
    if n < 10 {
        return Err(Error::InvalidParameter(format!("need n >= 10, got {n}")));
    }
    if let Noise::Homoscedastic { sigma } = noise {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::InvalidParameter(format!("sigma must be >= 0, got {sigma}")));
        }
    }
    let mut rng = rng::seeded(seed);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let x = 10.0 * rng.random::<f64>();
        let eps: f64 = rng.sample(StandardNormal);
        xs.push(x);
        ys.push(2.0 * x + 1.0 + noise.scale_at(x) * eps);
    }
    Dataset::from_parts(
        xs,
        1,
        Targets::Real(ys),
        vec!["x".to_string()],
        "y".to_string(),
    )
}

/// Gaussian blobs, one isotropic component per class.
///
/// Unless `means` is given, class `c` is centred at
/// `radius * (cos(2πc/K), sin(2πc/K))`. Every class has covariance
/// `spread² · I`. Class counts follow `priors` (uniform by default) under
/// largest-remainder rounding, and labels are assigned in shuffled order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlobConfig {
    pub n: usize,
    pub n_classes: usize,
    pub radius: f64,
    pub spread: f64,
    pub priors: Option<Vec<f64>>,
    pub means: Option<Vec<Vec<f64>>>,
}

impl Default for BlobConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            n_classes: 3,
            radius: 2.0,
            spread: 1.0,
            priors: None,
            means: None,
        }
    }
}

impl BlobConfig {
    pub fn new(n: usize, n_classes: usize) -> Self {
        Self {
            n,
            n_classes,
            ..Self::default()
        }
    }

    pub fn class_means(&self) -> Vec<Vec<f64>> {
        if let Some(means) = &self.means {
            return means.clone();
        }
        (0..self.n_classes)
            .map(|c| {
                let theta = std::f64::consts::TAU * c as f64 / self.n_classes as f64;
                vec![self.radius * theta.cos(), self.radius * theta.sin()]
            })
            .collect()
    }
}

pub fn make_synthetic_classification(n: usize, n_classes: usize, seed: u64) -> Result<Dataset> {
    make_blobs(&BlobConfig::new(n, n_classes), seed)
}

pub fn make_blobs(config: &BlobConfig, seed: u64) -> Result<Dataset> {
    let k = config.n_classes;
    if k < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 classes, got {k}")));
    }
    if config.n < 10 * k {
        return Err(Error::InvalidParameter(format!(
            "n={} too small for {k} classes (need n >= {})",
            config.n,
            10 * k
        )));
    }
    if !(config.spread.is_finite() && config.spread > 0.0) {
        return Err(Error::InvalidParameter(format!("spread must be > 0, got {}", config.spread)));
    }
    let means = config.class_means();
    let dim = means.first().map_or(0, Vec::len);
    if means.len() != k || dim == 0 || means.iter().any(|m| m.len() != dim) {
        return Err(Error::InvalidParameter(format!(
            "need {k} class means of equal positive dimension"
        )));
    }
    let priors = match &config.priors {
        Some(p) if p.len() != k || p.iter().any(|w| !(w.is_finite() && *w > 0.0)) => {
            return Err(Error::InvalidParameter(format!(
                "priors must be {k} positive weights, got {p:?}"
            )))
        }
        Some(p) => p.clone(),
        None => vec![1.0; k],
    };
    let counts = largest_remainder(config.n, &priors);
    let mut labels: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(c, &m)| std::iter::repeat_n(c, m))
        .collect();

    let mut rng: Rng = rng::seeded(seed);
    rand::seq::SliceRandom::shuffle(labels.as_mut_slice(), &mut rng);
    let mut features = Vec::with_capacity(config.n * dim);
    for &c in &labels {
        for mu in &means[c] {
            let z: f64 = rng.sample(StandardNormal);
            features.push(mu + config.spread * z);
        }
    }
    Dataset::from_parts(
        features,
        dim,
        Targets::Labels { labels, n_classes: k },
        (0..dim).map(|j| format!("x{j}")).collect(),
        "label".to_string(),
    )
}
