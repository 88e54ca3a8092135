use ndarray::Array2;
use nonresp::classify::{knn_fit, null_fit_predict, Classifier};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Full sort on (distance, index) and a plain vote count.
fn brute_force_score(train: &Array2<f64>, y: &[u8], q: &[f64], k: usize) -> f64 {
    let mut d: Vec<(f64, usize)> = (0..train.nrows())
        .map(|i| {
            let dist: f64 = train.row(i).iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum();
            (dist, i)
        })
        .collect();
    d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    d[..k].iter().filter(|(_, i)| y[*i] == 1).count() as f64 / k as f64
}

#[test]
fn matches_exhaustive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        // Small integer grid so distance ties actually occur.
        let train = Array2::from_shape_fn((50, 3), |_| rng.gen_range(0..4) as f64);
        let y: Vec<u8> = (0..50).map(|_| rng.gen_range(0..2)).collect();
        let queries = Array2::from_shape_fn((30, 3), |_| rng.gen_range(0..4) as f64);
        let model = knn_fit(train.view(), &y, 5).unwrap();
        let scores = model.score(queries.view()).unwrap();
        for (qi, q) in queries.rows().into_iter().enumerate() {
            assert_eq!(scores[qi], brute_force_score(&train, &y, q.as_slice().unwrap(), 5));
        }
    }
}

fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<u8>, Vec<f64>)> {
    (2usize..25).prop_flat_map(|n| {
        (
            prop::collection::vec(-5.0f64..5.0, n * 2),
            prop::collection::vec(0u8..2, n),
            prop::collection::vec(-5.0f64..5.0, 8),
        )
    })
}

proptest! {
    #[test]
    fn k_equal_n_is_null_model((xs, y, qs) in instance()) {
        let n = y.len();
        let x = Array2::from_shape_vec((n, 2), xs).unwrap();
        let q = Array2::from_shape_vec((4, 2), qs).unwrap();
        let m = knn_fit(x.view(), &y, n).unwrap();
        prop_assert_eq!(m.predict(q.view()).unwrap(), null_fit_predict(&y, 4).unwrap());
    }

    #[test]
    fn scores_on_vote_grid_and_scale_free((xs, y, qs) in instance(), k in 1usize..5, c in 0.1f64..10.0) {
        let n = y.len();
        let k = k.min(n);
        let x = Array2::from_shape_vec((n, 2), xs).unwrap();
        let q = Array2::from_shape_vec((4, 2), qs).unwrap();
        let m = knn_fit(x.view(), &y, k).unwrap();
        let s = m.score(q.view()).unwrap();
        for v in s.iter() {
            let votes = v * k as f64;
            prop_assert!((votes - votes.round()).abs() < 1e-9 && (0.0..=1.0).contains(v));
        }
        let scaled = knn_fit((&x * c).view(), &y, k).unwrap();
        let qc = &q * c;
        for (i, row) in q.rows().into_iter().enumerate() {
            prop_assert_eq!(m.neighbors(row.as_slice().unwrap()), scaled.neighbors(qc.row(i).as_slice().unwrap()));
        }
    }

    #[test]
    fn duplicated_rows_keep_1nn_predictions((xs, y, qs) in instance()) {
        let n = y.len();
        let x = Array2::from_shape_vec((n, 2), xs.clone()).unwrap();
        let q = Array2::from_shape_vec((4, 2), qs).unwrap();
        let mut doubled = xs.clone();
        doubled.extend_from_slice(&xs);
        let x2 = Array2::from_shape_vec((2 * n, 2), doubled).unwrap();
        let y2: Vec<u8> = y.iter().chain(&y).copied().collect();
        let a = knn_fit(x.view(), &y, 1).unwrap().predict(q.view()).unwrap();
        let b = knn_fit(x2.view(), &y2, 1).unwrap().predict(q.view()).unwrap();
        prop_assert_eq!(a, b);
    }
}
