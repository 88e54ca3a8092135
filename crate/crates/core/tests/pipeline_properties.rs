use ndarray::Array2;
use nonresp::model::ModelConfig;
use nonresp::preprocess::{
    encoder_fit, pipeline_fit_predict, scaler_fit, scaler_transform, EncoderKind, FittedPipeline, Recipe,
    ScalerKind, ScalerState,
};
use nonresp::tabular::{
    synth_generate, train_test_split, ColumnData, ColumnSpec, Role, Schema, SplitPlan, SyntheticConfig, Table,
};
use proptest::prelude::*;

fn scaler_bits(s: &ScalerState) -> Vec<u64> {
    let (a, b) = match s {
        ScalerState::Standard { mean, std } => (mean, std),
        ScalerState::MinMax { min, max } => (min, max),
    };
    a.iter().chain(b.iter()).map(|v| v.to_bits()).collect()
}

fn synthetic(n_rows: usize, seed: u64) -> Table {
    synth_generate(&SyntheticConfig { n_rows, seed, ..SyntheticConfig::default() }).unwrap()
}

#[test]
fn corrupting_test_rows_leaves_fitted_state_bit_identical() {
    let table = synthetic(800, 3);
    let split = train_test_split(table.n_rows(), &SplitPlan { seed: 11, ..SplitPlan::default() }, None).unwrap();
    let age = table.column_index("age").unwrap();
    let ColumnData::Numeric(values) = table.column(age) else { panic!("age is numeric") };
    let mut corrupted = values.clone();
    for &r in &split.test {
        corrupted[r] = 1e12;
    }
    let dirty = table.with_column(age, ColumnData::Numeric(corrupted)).unwrap();

    for kind in [ScalerKind::Standard, ScalerKind::MinMax] {
        let recipe = Recipe { scaler: Some(kind), ..Recipe::default() };
        let model = ModelConfig::Logreg(Default::default());
        let clean = FittedPipeline::fit(&table, &split.train, &recipe, &model).unwrap();
        let leaky = FittedPipeline::fit(&dirty, &split.train, &recipe, &model).unwrap();
        assert_eq!(scaler_bits(clean.scaler.as_ref().unwrap()), scaler_bits(leaky.scaler.as_ref().unwrap()));
        assert_eq!(clean.imputer, leaky.imputer);
        assert_eq!(clean.encoder, leaky.encoder);
        assert_eq!(clean.model, leaky.model);
    }
}

#[test]
fn overlapping_index_sets_are_rejected() {
    let table = synthetic(50, 1);
    let train: Vec<usize> = (0..30).collect();
    let test: Vec<usize> = (29..50).collect();
    assert!(pipeline_fit_predict(&table, &train, &test, &Recipe::default(), &ModelConfig::Null).is_err());
}

fn categorical_table(levels: usize, codes: &[u32]) -> Table {
    let names: Vec<String> = (0..levels).map(|l| format!("l{l:02}")).collect();
    let schema = Schema::new(vec![
        ColumnSpec::categorical("c", Role::Feature, names).unwrap(),
        ColumnSpec::categorical("y", Role::Target, ["0", "1"]).unwrap(),
    ])
    .unwrap();
    Table::new(
        schema,
        vec![ColumnData::Categorical(codes.to_vec()), ColumnData::Categorical(vec![0; codes.len()])],
    )
    .unwrap()
}

proptest! {
    #[test]
    fn ordinal_and_one_hot_both_decode_to_the_original_level(
        (levels, codes) in (2usize..8).prop_flat_map(|l| (Just(l), prop::collection::vec(0..l as u32, 1..40))),
        drop_first in any::<bool>(),
    ) {
        let table = categorical_table(levels, &codes);
        let ordinal = encoder_fit(&table, EncoderKind::Ordinal, false).unwrap().transform(&table).unwrap();
        let hot = encoder_fit(&table, EncoderKind::OneHot, drop_first).unwrap().transform(&table).unwrap();
        let offset = usize::from(drop_first);
        prop_assert_eq!(hot.ncols(), levels - offset);
        for (r, &code) in codes.iter().enumerate() {
            prop_assert_eq!(ordinal[[r, 0]] as u32, code);
            let row = hot.row(r);
            prop_assert!(row.iter().all(|&v| v == 0.0 || v == 1.0));
            let decoded = match row.iter().position(|&v| v == 1.0) {
                Some(p) => p + offset,
                None => 0,
            };
            prop_assert!(row.sum() <= 1.0);
            prop_assert!(drop_first || row.sum() == 1.0);
            prop_assert_eq!(decoded as u32, code);
        }
    }

    #[test]
    fn scaled_training_columns_are_normalized(
        (n, d, cells) in (2usize..30, 1usize..5).prop_flat_map(|(n, d)| {
            (Just(n), Just(d), prop::collection::vec(-1e3f64..1e3, n * d))
        }),
        constant_col in any::<bool>(),
    ) {
        let mut x = Array2::from_shape_vec((n, d), cells).unwrap();
        if constant_col {
            x.column_mut(0).fill(7.5);
        }
        let std_state = scaler_fit(&x, ScalerKind::Standard).unwrap();
        let z = scaler_transform(&std_state, &x).unwrap();
        let mm = scaler_transform(&scaler_fit(&x, ScalerKind::MinMax).unwrap(), &x).unwrap();
        for j in 0..d {
            let col = z.column(j);
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let raw = x.column(j);
            let spread = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - raw.iter().cloned().fold(f64::INFINITY, f64::min);
            prop_assert!(mean.abs() < 1e-10, "mean {}", mean);
            if spread > 0.0 {
                prop_assert!((var.sqrt() - 1.0).abs() < 1e-10, "std {}", var.sqrt());
            } else {
                prop_assert!(col.iter().all(|&v| v == 0.0));
            }
            prop_assert!(mm.column(j).iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }
}
