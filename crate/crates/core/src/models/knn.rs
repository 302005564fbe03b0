use super::PointPredictor;
use crate::dataset::Dataset;
use crate::{Error, Execution, Result};

/// Brute-force k-nearest-neighbours regression under Euclidean distance.
///
/// The prediction is the unweighted mean of the `k` nearest training targets.
/// Equal distances are resolved in favour of the lower training index.
#[derive(Debug, Clone)]
pub struct KnnRegressor {
    k: usize,
    n_features: usize,
    features: Vec<f64>,
    targets: Vec<f64>,
}

impl KnnRegressor {
    pub fn fit(train: &Dataset, k: usize) -> Result<Self> {
        let targets = train.real_targets()?.to_vec();
        if k == 0 || k > targets.len() {
            return Err(Error::InvalidParameter(format!(
                "k={k} must lie in [1, {}]",
                targets.len()
            )));
        }
        Ok(Self {
            k,
            n_features: train.n_features(),
            features: train.features().to_vec(),
            targets,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_train(&self) -> usize {
        self.targets.len()
    }

    /// Training indices of the `k` nearest neighbours, nearest first.
    pub fn neighbors(&self, x: &[f64]) -> Vec<usize> {
        let d = self.n_features;
        let mut dist: Vec<(f64, usize)> = (0..self.targets.len())
            .map(|i| {
                let row = &self.features[i * d..(i + 1) * d];
                let sq: f64 = row.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                (sq, i)
            })
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, cmp);
            dist.truncate(self.k);
        }
        dist.sort_unstable_by(cmp);
        dist.into_iter().map(|(_, i)| i).collect()
    }
}

impl PointPredictor for KnnRegressor {
    fn predict(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.neighbors(x).into_iter().map(|i| self.targets[i]).sum();
        sum / self.k as f64
    }
}

/// Fits the residual-magnitude model `r` on `{(x_i, |y_i − f(x_i)|)}` over
/// `cal1`. `f` must have been fitted on data disjoint from `cal1`.
pub fn fit_residual_model(f: &dyn PointPredictor, cal1: &Dataset, k: usize) -> Result<KnnRegressor> {
    let y = cal1.real_targets()?;
    let preds = f.predict_all(cal1, Execution::Sequential);
    let residuals: Vec<f64> = y.iter().zip(&preds).map(|(y, p)| (y - p).abs()).collect();
    let rows = cal1.rows().map(<[f64]>::to_vec).collect();
    KnnRegressor::fit(&Dataset::regression(rows, residuals)?, k)
}
