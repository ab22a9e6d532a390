use lineup_core::data::{self, make_splits, parse_csv, synth_dataset, SplitRatios};
use lineup_core::FeatureKind;
use proptest::prelude::*;

fn csv_from(cats: &[(u8, Option<u8>, bool)]) -> String {
    let mut s = String::from("num,color,y\n");
    for (i, (num, color, y)) in cats.iter().enumerate() {
        let c = color.map(|c| ["red", "green", "blue"][c as usize % 3].to_string()).unwrap_or_default();
        s.push_str(&format!("{},{},{}\n", *num as f64 + i as f64 * 0.5, c, if *y { "yes" } else { "no" }));
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn one_hot_rows_have_exactly_one_active_level(
        mut cells in prop::collection::vec((any::<u8>(), prop::option::of(0u8..3), any::<bool>()), 4..40)
    ) {
        cells[0].2 = true;
        cells[1].2 = false;
        cells[0].1 = Some(0);
        let ds = parse_csv(csv_from(&cells).as_bytes(), "t", "y", "yes").unwrap();
        let cat: Vec<usize> = ds
            .schema()
            .entries()
            .iter()
            .enumerate()
            .filter(|(_, f)| f.kind == FeatureKind::Categorical)
            .map(|(j, _)| j)
            .collect();
        prop_assert!(!cat.is_empty());
        for r in 0..ds.n_rows() {
            let active: f64 = cat.iter().map(|&j| ds.row(r)[j]).sum();
            prop_assert_eq!(active, 1.0);
        }
    }

    #[test]
    fn splits_partition_and_stratify(n in 20usize..300, seed in any::<u64>(), m in 1usize..4) {
        let (ds, _) = synth_dataset(n, m, seed).unwrap();
        let s = make_splits(&ds, SplitRatios::default(), seed).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());

        let n_pos = ds.labels().iter().filter(|&&l| l == 1).count() as f64;
        for part in [&s.validation, &s.test] {
            let pos = part.iter().filter(|&&i| ds.labels()[i] == 1).count() as f64;
            let expected = part.len() as f64 * n_pos / n as f64;
            prop_assert!((pos - expected).abs() <= 1.0, "pos {} expected {}", pos, expected);
        }
    }

    #[test]
    fn splits_are_a_function_of_the_seed(seed in any::<u64>()) {
        let (ds, _) = synth_dataset(120, 3, 9).unwrap();
        let a = make_splits(&ds, SplitRatios::default(), seed).unwrap();
        let b = make_splits(&ds, SplitRatios::default(), seed).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn loan_fixture_imputes_and_encodes() {
    let csv = data::synth_loan_csv(300, 4);
    let ds = parse_csv(csv.as_bytes(), "loans", "grade", "A").unwrap();
    let names = ds.schema().names();
    assert!(names.contains(&"installment".to_string()));
    assert!(names.iter().any(|n| n.starts_with("term=")));
    assert!(ds.rows().iter().flatten().all(|v| v.is_finite()));
}

#[test]
fn load_csv_reads_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("loans.csv");
    std::fs::write(&path, data::synth_loan_csv(50, 1)).unwrap();
    let ds = data::load_csv(&path, "grade", "A").unwrap();
    assert_eq!(ds.name(), "loans");
    assert_eq!(ds.n_rows(), 50);
    assert!(data::load_csv(dir.path().join("missing.csv"), "grade", "A").is_err());
}
