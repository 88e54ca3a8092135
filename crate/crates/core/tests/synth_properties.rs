use nonresp::tabular::{synth_generate, ColumnData, SyntheticConfig, Table};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn rate_by_level(table: &Table, feature: &str, level: &str) -> f64 {
    let col = table.column_index(feature).unwrap();
    let labels = table.labels().unwrap();
    let (mut hits, mut total) = (0usize, 0usize);
    for (r, &y) in labels.iter().enumerate() {
        if table.level(col, r) == Some(level) {
            total += 1;
            hits += usize::from(y);
        }
    }
    hits as f64 / total as f64
}

#[test]
fn default_plant_phone_rate_is_near_one_in_five() {
    for seed in 0..3 {
        let t = synth_generate(&SyntheticConfig { n_rows: 20_000, seed, ..SyntheticConfig::default() }).unwrap();
        let phone = rate_by_level(&t, "interview_mode", "phone");
        let web = rate_by_level(&t, "interview_mode", "web");
        assert!((0.17..=0.23).contains(&phone), "seed {seed}: phone rate {phone}");
        assert!(web < phone / 2.0, "seed {seed}: web rate {web}");
    }
}

/// Pearson chi-square p-value of independence between a cell grouping and
/// the label, dropping empty groups.
fn independence_p(groups: &[usize], labels: &[u8], n_groups: usize) -> f64 {
    let mut counts = vec![[0.0f64; 2]; n_groups];
    for (&g, &y) in groups.iter().zip(labels) {
        counts[g][y as usize] += 1.0;
    }
    counts.retain(|c| c[0] + c[1] > 0.0);
    let n: f64 = counts.iter().map(|c| c[0] + c[1]).sum();
    let col = [counts.iter().map(|c| c[0]).sum::<f64>(), counts.iter().map(|c| c[1]).sum::<f64>()];
    let mut stat = 0.0;
    for c in &counts {
        let row = c[0] + c[1];
        for k in 0..2 {
            let e = row * col[k] / n;
            stat += (c[k] - e) * (c[k] - e) / e;
        }
    }
    let dof = (counts.len() - 1) as f64;
    if dof == 0.0 {
        return 1.0;
    }
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}

#[test]
fn without_planted_effects_labels_are_independent_of_every_feature() {
    let mut total_rejections = 0;
    for seed in 0..20 {
        let cfg = SyntheticConfig { planted: Vec::new(), seed: 100 + seed, ..SyntheticConfig::default() };
        let t = synth_generate(&cfg).unwrap();
        let labels = t.labels().unwrap();
        let mut rejections = 0;
        for col in t.schema().feature_indices() {
            let (groups, y, n_groups): (Vec<usize>, Vec<u8>, usize) = match t.column(col) {
                ColumnData::Categorical(codes) => {
                    let levels = t.schema().columns()[col].levels().unwrap().len();
                    let keep: Vec<usize> = (0..codes.len()).filter(|&r| !t.column(col).is_missing(r)).collect();
                    (keep.iter().map(|&r| codes[r] as usize).collect(), keep.iter().map(|&r| labels[r]).collect(), levels)
                }
                ColumnData::Numeric(v) => {
                    // Five equal-width age bands.
                    let keep: Vec<usize> = (0..v.len()).filter(|&r| !v[r].is_nan()).collect();
                    let band = |a: f64| (((a - 50.0) / 10.0).floor().max(0.0) as usize).min(4);
                    (keep.iter().map(|&r| band(v[r])).collect(), keep.iter().map(|&r| labels[r]).collect(), 5)
                }
            };
            if independence_p(&groups, &y, n_groups) < 0.001 {
                rejections += 1;
            }
        }
        assert!(rejections <= 1, "seed {seed}: {rejections} features rejected at 0.001");
        total_rejections += rejections;
    }
    assert!(total_rejections <= 4, "{total_rejections} rejections over 1000 tests");
}
