use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, permutation, rng_from_seed, shuffle};

/// How to carve rows into train and test (or validation) sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub test_fraction: f64,
    pub n_splits: usize,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitPlan {
    fn default() -> Self {
        SplitPlan { test_fraction: 0.25, n_splits: 5, seed: 0, stratified: false }
    }
}

/// Disjoint, covering index sets, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn test_size(n_rows: usize, fraction: f64) -> Result<usize> {
    if n_rows < 2 {
        return Err(Error::usage(format!("cannot split {n_rows} rows")));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::usage(format!("test fraction {fraction} must lie in (0, 1)")));
    }
    let n_test = (fraction * n_rows as f64).round() as usize;
    if n_test == 0 || n_test == n_rows {
        return Err(Error::usage(format!(
            "test fraction {fraction} leaves an empty side for {n_rows} rows"
        )));
    }
    Ok(n_test)
}

fn split_once(n_rows: usize, n_test: usize, labels: Option<&[u8]>, seed: u64) -> Split {
    let mut rng = rng_from_seed(seed);
    let mut test = match labels {
        None => {
            let perm = permutation(&mut rng, n_rows);
            perm[..n_test].to_vec()
        }
        Some(labels) => {
            let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
            for (i, &y) in labels.iter().enumerate() {
                by_class[usize::from(y != 0)].push(i);
            }
            // Largest-remainder allocation of n_test across the classes.
            let exact: Vec<f64> = by_class
                .iter()
                .map(|c| n_test as f64 * c.len() as f64 / n_rows as f64)
                .collect();
            let mut quota: Vec<usize> = exact.iter().map(|q| q.floor() as usize).collect();
            let mut left = n_test - quota.iter().sum::<usize>();
            let mut order = [0usize, 1];
            order.sort_by(|&a, &b| {
                let fa = exact[a] - exact[a].floor();
                let fb = exact[b] - exact[b].floor();
                fb.total_cmp(&fa).then(a.cmp(&b))
            });
            for &c in order.iter().cycle() {
                if left == 0 {
                    break;
                }
                if quota[c] < by_class[c].len() {
                    quota[c] += 1;
                    left -= 1;
                }
            }
            let mut test = Vec::with_capacity(n_test);
            for (c, members) in by_class.iter_mut().enumerate() {
                shuffle(&mut rng, members);
                test.extend_from_slice(&members[..quota[c]]);
            }
            test
        }
    };
    test.sort_unstable();
    let mut in_test = vec![false; n_rows];
    for &i in &test {
        in_test[i] = true;
    }
    let train = (0..n_rows).filter(|&i| !in_test[i]).collect();
    Split { train, test }
}

fn check_labels(n_rows: usize, plan: &SplitPlan, labels: Option<&[u8]>) -> Result<Option<Vec<u8>>> {
    if !plan.stratified {
        return Ok(None);
    }
    let labels = labels.ok_or_else(|| Error::usage("stratified split needs labels"))?;
    if labels.len() != n_rows {
        return Err(Error::usage(format!(
            "{} labels supplied for {n_rows} rows",
            labels.len()
        )));
    }
    Ok(Some(labels.to_vec()))
}

/// One seeded train/test split with `round(test_fraction * n_rows)` test rows.
///
/// In stratified mode each class contributes its proportional share of the
/// test set to within one row.
pub fn train_test_split(n_rows: usize, plan: &SplitPlan, labels: Option<&[u8]>) -> Result<Split> {
    let n_test = test_size(n_rows, plan.test_fraction)?;
    let labels = check_labels(n_rows, plan, labels)?;
    Ok(split_once(n_rows, n_test, labels.as_deref(), plan.seed))
}

/// Repeated random train/validation partitions. Split `k` is drawn from
/// sub-stream `k` of the plan's seed.
#[derive(Debug, Clone)]
pub struct ShuffleSplit {
    n_rows: usize,
    n_test: usize,
    labels: Option<Vec<u8>>,
    seed: u64,
    n_splits: usize,
    next: usize,
}

impl ShuffleSplit {
    pub fn new(n_rows: usize, plan: &SplitPlan, labels: Option<&[u8]>) -> Result<Self> {
        if plan.n_splits == 0 {
            return Err(Error::usage("n_splits must be at least 1"));
        }
        let n_test = test_size(n_rows, plan.test_fraction)?;
        let labels = check_labels(n_rows, plan, labels)?;
        Ok(ShuffleSplit { n_rows, n_test, labels, seed: plan.seed, n_splits: plan.n_splits, next: 0 })
    }
}

impl Iterator for ShuffleSplit {
    type Item = Split;

    fn next(&mut self) -> Option<Split> {
        if self.next >= self.n_splits {
            return None;
        }
        let seed = derive_seed(self.seed, self.next as u64);
        self.next += 1;
        Some(split_once(self.n_rows, self.n_test, self.labels.as_deref(), seed))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.n_splits - self.next;
        (left, Some(left))
    }
}

impl ExactSizeIterator for ShuffleSplit {}

pub fn shuffle_split_iter(n_rows: usize, plan: &SplitPlan, labels: Option<&[u8]>) -> Result<ShuffleSplit> {
    ShuffleSplit::new(n_rows, plan, labels)
}

/// Normal-approximation interval `p ± 2·sqrt(p(1−p)/n)`, clipped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProportionCi {
    pub error: f64,
    pub lo: f64,
    pub hi: f64,
}

pub fn proportion_ci(p: f64, n: usize) -> Result<ProportionCi> {
    if n == 0 {
        return Err(Error::usage("proportion interval needs n >= 1"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::usage(format!("proportion {p} outside [0, 1]")));
    }
    let error = 2.0 * (p * (1.0 - p) / n as f64).sqrt();
    Ok(ProportionCi { error, lo: (p - error).max(0.0), hi: (p + error).min(1.0) })
}
