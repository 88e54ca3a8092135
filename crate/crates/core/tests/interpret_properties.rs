use nalgebra::DMatrix;
use ndarray::Array2;
use nonresp::interpret::{feature_correlation, hier_cluster, importance_csv, permutation_importance, DendrogramNode};
use nonresp::model::ModelConfig;
use nonresp::preprocess::{FittedPipeline, Recipe};
use nonresp::rng::rng_from_seed;
use nonresp::tabular::{ColumnData, ColumnSpec, Role, Schema, Table};
use proptest::prelude::*;
use rand::Rng;

/// `signal` drives the label, `noise` is irrelevant, `flat` is constant.
fn table(n: usize, seed: u64, flat_value: f64) -> Table {
    let mut rng = rng_from_seed(seed);
    let schema = Schema::new(vec![
        ColumnSpec::numeric("signal", Role::Feature),
        ColumnSpec::numeric("noise", Role::Feature),
        ColumnSpec::numeric("flat", Role::Feature),
        ColumnSpec::categorical("y", Role::Target, ["0", "1"]).unwrap(),
    ])
    .unwrap();
    let s: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    let z: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    let y: Vec<u32> = s.iter().map(|v| u32::from(*v + 0.2 * rng.gen::<f64>() > 0.6)).collect();
    Table::new(
        schema,
        vec![
            ColumnData::Numeric(s),
            ColumnData::Numeric(z),
            ColumnData::Numeric(vec![flat_value; n]),
            ColumnData::Categorical(y),
        ],
    )
    .unwrap()
}

fn fitted(train: &Table, model: &ModelConfig) -> FittedPipeline {
    let rows: Vec<usize> = (0..train.n_rows()).collect();
    FittedPipeline::fit(train, &rows, &Recipe::default(), model).unwrap()
}

#[test]
fn signal_ranks_first_and_constant_feature_scores_zero() {
    let train = table(400, 1, 2.0);
    let test = table(200, 2, 2.0);
    let pipe = fitted(&train, &ModelConfig::Cart(Default::default()));
    let imp = permutation_importance(&pipe, &test, 5, 7).unwrap();
    assert_eq!(imp.rank_of("signal"), Some(1));
    let flat = imp.features.iter().find(|f| f.feature == "flat").unwrap();
    assert!(flat.drops.iter().all(|&d| d == 0.0));
    let csv = importance_csv(&imp);
    assert!(csv.starts_with("feature,mean_drop,std,rank\nsignal,"));
    assert_eq!(imp, permutation_importance(&pipe, &test, 5, 7).unwrap());
}

#[test]
fn feature_constant_in_training_is_ignored_by_logistic_regression() {
    // Standard scaling maps a column that was constant in training to 0,
    // so its coefficient never sees data; varying it at test time cannot matter.
    let train = table(300, 3, 1.0);
    let mut test = table(150, 4, 1.0);
    let flat = test.column_index("flat").unwrap();
    test = test.with_column(flat, ColumnData::Numeric((0..150).map(|i| i as f64).collect())).unwrap();
    let pipe = fitted(&train, &ModelConfig::Logreg(Default::default()));
    let imp = permutation_importance(&pipe, &test, 4, 0).unwrap();
    let f = imp.features.iter().find(|f| f.feature == "flat").unwrap();
    assert!(f.drops.iter().all(|&d| d == 0.0));
}

#[test]
fn single_repeat_reports_zero_std() {
    let train = table(200, 5, 0.0);
    let pipe = fitted(&train, &ModelConfig::Knn { k: 3 });
    let imp = permutation_importance(&pipe, &table(80, 6, 0.0), 1, 3).unwrap();
    assert!(imp.features.iter().all(|f| f.std == 0.0));
    let mut ranks: Vec<usize> = imp.features.iter().map(|f| f.rank).collect();
    ranks.sort();
    assert_eq!(ranks, vec![1, 2, 3]);
    assert!(permutation_importance(&pipe, &table(80, 6, 0.0), 0, 3).is_err());
}

#[test]
fn independent_uniform_columns_are_nearly_uncorrelated() {
    let mut rng = rng_from_seed(99);
    let x = Array2::from_shape_fn((10_000, 3), |_| rng.gen::<f64>());
    let c = feature_correlation(&x).unwrap();
    for a in 0..3 {
        for b in 0..3 {
            if a != b {
                assert!(c.values[[a, b]].abs() < 0.05, "{}", c.values[[a, b]]);
            }
        }
    }
}

fn check_heights(node: &DendrogramNode) {
    if let DendrogramNode::Merge { left, right, height } = node {
        assert!(*height >= left.height() && *height >= right.height());
        check_heights(left);
        check_heights(right);
    }
}

#[test]
fn merge_heights_never_decrease_on_random_matrices() {
    let mut rng = rng_from_seed(17);
    for _ in 0..100 {
        let d = rng.gen_range(2..12);
        let mut m = Array2::<f64>::eye(d);
        for a in 0..d {
            for b in a + 1..d {
                // Coarse values force many tied distances.
                let v = f64::from(rng.gen_range(-4i32..=4)) / 4.0;
                m[[a, b]] = v;
                m[[b, a]] = v;
            }
        }
        let root = hier_cluster(&m).unwrap();
        check_heights(&root);
        let mut leaves = root.leaves();
        leaves.sort();
        assert_eq!(leaves, (0..d).collect::<Vec<_>>());
        assert_eq!(root, hier_cluster(&m).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn correlation_is_symmetric_unit_diagonal_and_psd(
        (n, d, cells) in (3usize..40, 2usize..7).prop_flat_map(|(n, d)| {
            (Just(n), Just(d), prop::collection::vec(0u8..4, n * d))
        })
    ) {
        let x = Array2::from_shape_vec((n, d), cells.into_iter().map(f64::from).collect()).unwrap();
        let c = feature_correlation(&x).unwrap();
        for a in 0..d {
            prop_assert_eq!(c.values[[a, a]], 1.0);
            for b in 0..d {
                prop_assert_eq!(c.values[[a, b]], c.values[[b, a]]);
                prop_assert!(c.values[[a, b]].abs() <= 1.0);
            }
        }
        let m = DMatrix::from_fn(d, d, |i, j| c.values[[i, j]]);
        let min_eig = m.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(min_eig > -1e-6, "smallest eigenvalue {}", min_eig);
    }
}
