//! The shared classifier contract, the majority-class null model and KNN.

use ndarray::{Array1, Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A fitted binary classifier. Higher scores mean "more positive";
/// `predict` is `score > threshold`.
pub trait Classifier {
    fn score(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>>;

    /// 0.5 for probability-scaled scores, 0 for margins.
    fn threshold(&self) -> f64;

    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<u8>> {
        let t = self.threshold();
        Ok(self.score(x)?.iter().map(|&s| u8::from(s > t)).collect())
    }
}

pub(crate) fn check_labels(n_rows: usize, labels: &[u8]) -> Result<()> {
    if labels.len() != n_rows {
        return Err(Error::usage(format!("{} labels for {n_rows} rows", labels.len())));
    }
    if let Some(bad) = labels.iter().find(|&&y| y > 1) {
        return Err(Error::usage(format!("label {bad} is not 0 or 1")));
    }
    Ok(())
}

pub(crate) fn check_width(expected: usize, x: ArrayView2<'_, f64>) -> Result<()> {
    if x.ncols() != expected {
        return Err(Error::usage(format!(
            "model expects {expected} feature columns, got {}",
            x.ncols()
        )));
    }
    Ok(())
}

/// Majority class of `labels`; an exact tie goes to 0.
pub fn majority_label(labels: &[u8]) -> u8 {
    let ones = labels.iter().filter(|&&y| y == 1).count();
    u8::from(2 * ones > labels.len())
}

/// Predicts the training majority everywhere.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NullModel {
    pub majority: u8,
    pub n_features: usize,
}

impl NullModel {
    pub fn fit(x: ArrayView2<'_, f64>, labels: &[u8]) -> Result<Self> {
        check_labels(x.nrows(), labels)?;
        if labels.is_empty() {
            return Err(Error::usage("null model needs at least one training label"));
        }
        Ok(NullModel { majority: majority_label(labels), n_features: x.ncols() })
    }
}

impl Classifier for NullModel {
    fn score(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        check_width(self.n_features, x)?;
        Ok(Array1::from_elem(x.nrows(), f64::from(self.majority)))
    }

    fn threshold(&self) -> f64 {
        0.5
    }
}

/// Constant majority-label predictions for `n_test` rows.
pub fn null_fit_predict(labels_train: &[u8], n_test: usize) -> Result<Vec<u8>> {
    if labels_train.is_empty() {
        return Err(Error::usage("null model needs at least one training label"));
    }
    Ok(vec![majority_label(labels_train); n_test])
}

/// Lazy K-nearest-neighbour classifier under squared Euclidean distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub features: Array2<f64>,
    pub labels: Vec<u8>,
}

pub fn knn_fit(x: ArrayView2<'_, f64>, labels: &[u8], k: usize) -> Result<KnnModel> {
    check_labels(x.nrows(), labels)?;
    if k == 0 || k > x.nrows() {
        return Err(Error::usage(format!("K = {k} must lie in 1..={}", x.nrows())));
    }
    Ok(KnnModel { k, features: x.to_owned(), labels: labels.to_vec() })
}

impl KnnModel {
    /// Training indices of the K nearest rows to `query`, nearest first;
    /// equal distances resolve to the lower index.
    pub fn neighbors(&self, query: &[f64]) -> Vec<usize> {
        let mut dist: Vec<(f64, usize)> = self
            .features
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                let d = row.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                (d, i)
            })
            .collect();
        let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, order);
            dist.truncate(self.k);
        }
        dist.sort_unstable_by(order);
        dist.into_iter().map(|(_, i)| i).collect()
    }
}

impl Classifier for KnnModel {
    fn score(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        check_width(self.features.ncols(), x)?;
        let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
        let scores: Vec<f64> = rows
            .par_iter()
            .map(|q| {
                let hits = self.neighbors(q).iter().filter(|&&i| self.labels[i] == 1).count();
                hits as f64 / self.k as f64
            })
            .collect();
        Ok(Array1::from(scores))
    }

    fn threshold(&self) -> f64 {
        0.5
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn nearest_label() {
        let x = array![[0.0], [1.0], [10.0]];
        let m = knn_fit(x.view(), &[0, 0, 1], 1).unwrap();
        let q = array![[9.0]];
        assert_eq!(m.score(q.view()).unwrap()[0], 1.0);
        assert_eq!(m.predict(q.view()).unwrap(), vec![1]);
    }

    #[test]
    fn k_bounds() {
        let x = array![[0.0], [1.0], [2.0]];
        assert!(knn_fit(x.view(), &[0, 1, 0], 3).is_ok());
        assert!(matches!(knn_fit(x.view(), &[0, 1, 0], 4), Err(Error::Usage(_))));
        assert!(matches!(knn_fit(x.view(), &[0, 1, 0], 0), Err(Error::Usage(_))));
    }

    #[test]
    fn score_is_vote_fraction() {
        let x = Array2::from_shape_fn((10, 1), |(i, _)| i as f64);
        let y = [1, 0, 0, 1, 0, 0, 1, 0, 0, 0];
        let m = knn_fit(x.view(), &y, 10).unwrap();
        assert!((m.score(array![[3.0]].view()).unwrap()[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn half_vote_predicts_zero() {
        let x = array![[0.0], [1.0]];
        let m = knn_fit(x.view(), &[0, 1], 2).unwrap();
        assert_eq!(m.predict(array![[0.5]].view()).unwrap(), vec![0]);
    }

    #[test]
    fn distance_tie_prefers_lower_index() {
        let x = array![[-1.0], [1.0]];
        let m = knn_fit(x.view(), &[1, 0], 1).unwrap();
        assert_eq!(m.neighbors(&[0.0]), vec![0]);
        let m = knn_fit(x.view(), &[0, 1], 1).unwrap();
        assert_eq!(m.predict(array![[0.0]].view()).unwrap(), vec![0]);
    }

    #[test]
    fn width_mismatch() {
        let m = knn_fit(array![[0.0, 1.0]].view(), &[1], 1).unwrap();
        assert!(matches!(m.score(array![[0.0]].view()), Err(Error::Usage(_))));
    }

    #[test]
    fn null_model_rules() {
        let mut y = vec![0u8; 90];
        y.extend(vec![1u8; 10]);
        assert_eq!(null_fit_predict(&y, 3).unwrap(), vec![0, 0, 0]);
        assert_eq!(null_fit_predict(&[0, 1, 1, 0], 2).unwrap(), vec![0, 0]);
        assert_eq!(null_fit_predict(&[1, 1, 0], 1).unwrap(), vec![1]);
        assert!(null_fit_predict(&[], 1).is_err());
    }

    #[test]
    fn null_accuracy_on_reported_test_totals() {
        let truth: Vec<u8> = (0..1455).map(|i| u8::from(i < 117)).collect();
        let pred = null_fit_predict(&[0, 0, 1], truth.len()).unwrap();
        let correct = pred.iter().zip(&truth).filter(|(p, t)| p == t).count();
        assert_eq!(correct, 1338);
        assert!((correct as f64 / 1455.0 - 0.9196).abs() < 5e-5);
    }
}
