use lineup_core::compare::{
    build_scatter_panel, classify_quadrant, normalize_importance, order_feature_panels, select_in_rect,
};
use lineup_core::{Outcome, RectSelection};
use proptest::prelude::*;

fn expected(above_x: bool, above_y: bool, label: u8) -> (u8, Outcome, Outcome) {
    let q = match (above_x, above_y) {
        (true, true) => 1,
        (false, true) => 2,
        (false, false) => 3,
        (true, false) => 4,
    };
    let outcome = |above: bool| match (above, label) {
        (true, 1) => Outcome::TP,
        (true, _) => Outcome::FP,
        (false, 0) => Outcome::TN,
        (false, _) => Outcome::FN,
    };
    (q, outcome(above_x), outcome(above_y))
}

#[test]
fn quadrant_truth_table_including_boundary() {
    // "above" means ≥ 0.5, so 0.5 itself is exercised as an above value
    for (ax, ay, label) in (0..8).map(|k| (k & 4 != 0, k & 2 != 0, (k & 1) as u8)) {
        for (px, py) in [
            (if ax { 0.5 } else { 0.4999999999 }, if ay { 0.5 } else { 0.4999999999 }),
            (if ax { 0.93 } else { 0.07 }, if ay { 0.61 } else { 0.0 }),
        ] {
            let panel = build_scatter_panel("x", "y", &[0], &[px], &[py], &[label], 0.5).unwrap();
            let p = &panel.points[0];
            assert_eq!((p.quadrant, p.outcome_x, p.outcome_y), expected(ax, ay, label), "({px}, {py}, {label})");
        }
    }
}

fn panel_input() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<u8>)> {
    (1usize..60).prop_flat_map(|n| {
        let grid = (0u32..=10).prop_map(|k| k as f64 / 10.0);
        (
            prop::collection::vec(grid.clone(), n),
            prop::collection::vec(grid, n),
            prop::collection::vec(0u8..=1, n),
        )
    })
}

fn interval() -> impl Strategy<Value = [f64; 2]> {
    (0.0f64..=1.0, 0.0f64..=1.0).prop_map(|(a, b)| [a.min(b), a.max(b)])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn agreement_means_quadrant_one_or_three((px, py, labels) in panel_input()) {
        let ids: Vec<usize> = (0..px.len()).collect();
        let panel = build_scatter_panel("a", "b", &ids, &px, &py, &labels, 0.5).unwrap();
        prop_assert_eq!(panel.quadrant_counts.iter().sum::<usize>(), px.len());
        for p in &panel.points {
            let agree = (p.p_x >= 0.5) == (p.p_y >= 0.5);
            prop_assert_eq!(matches!(p.quadrant, 1 | 3), agree);
            prop_assert_eq!(agree, p.outcome_x.predicted_positive() == p.outcome_y.predicted_positive());
            prop_assert_eq!(p.quadrant, classify_quadrant(p.p_x, p.p_y, 0.5));
        }
    }

    #[test]
    fn self_pairs_sit_on_the_diagonal((px, _, labels) in panel_input()) {
        let ids: Vec<usize> = (0..px.len()).collect();
        let panel = build_scatter_panel("a", "a", &ids, &px, &px, &labels, 0.5).unwrap();
        for p in &panel.points {
            prop_assert_eq!(p.p_x, p.p_y);
            prop_assert_eq!(p.outcome_x, p.outcome_y);
            prop_assert!(matches!(p.quadrant, 1 | 3));
        }
    }

    #[test]
    fn normalization_is_idempotent(raw in prop::collection::vec(0.0f64..100.0, 1..12)) {
        let names: Vec<String> = (0..raw.len()).map(|j| format!("f{j}")).collect();
        let once = normalize_importance("m", &names, &raw).unwrap();
        let twice = normalize_importance("m", &names, &once.values).unwrap();
        if once.degenerate {
            prop_assert!(once.values.iter().all(|v| *v == 0.0));
        } else {
            prop_assert!((once.values.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            for (a, b) in once.values.iter().zip(&twice.values) {
                prop_assert!((a - b).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn nested_rectangles_select_nested_sets(
        (px, py, labels) in panel_input(),
        inner_x in interval(),
        inner_y in interval(),
        grow in (0.0f64..0.3, 0.0f64..0.3, 0.0f64..0.3, 0.0f64..0.3),
    ) {
        let ids: Vec<usize> = (0..px.len()).collect();
        let panel = build_scatter_panel("a", "b", &ids, &px, &py, &labels, 0.5).unwrap();
        let rect = |x: [f64; 2], y: [f64; 2]| RectSelection { x_model: "a".into(), y_model: "b".into(), x_range: x, y_range: y };
        let outer_x = [(inner_x[0] - grow.0).max(0.0), (inner_x[1] + grow.1).min(1.0)];
        let outer_y = [(inner_y[0] - grow.2).max(0.0), (inner_y[1] + grow.3).min(1.0)];
        let small = select_in_rect(&panel, &rect(inner_x, inner_y)).unwrap();
        let big = select_in_rect(&panel, &rect(outer_x, outer_y)).unwrap();
        prop_assert!(small.iter().all(|i| big.contains(i)));
        let all = select_in_rect(&panel, &rect([0.0, 1.0], [0.0, 1.0])).unwrap();
        prop_assert_eq!(all, ids);
    }
}

#[test]
fn panel_order_matches_column_means() {
    let names = |ns: &[&str]| ns.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let vs = vec![
        normalize_importance("a", &names(&["installment", "fico", "dti"]), &[3.0, 5.0, 2.0]).unwrap(),
        normalize_importance("b", &names(&["log_installment", "fico", "dti"]), &[6.0, 2.0, 2.0]).unwrap(),
        normalize_importance("c", &names(&["installment", "fico", "dti"]), &[1.0, 1.0, 8.0]).unwrap(),
    ];
    // column means over the union, zero-filled
    let universe = ["installment", "fico", "dti", "log_installment"];
    let mut means: Vec<(f64, &str)> = universe
        .iter()
        .map(|f| {
            let total: f64 = vs
                .iter()
                .map(|v| v.feature_names.iter().position(|n| n == f).map_or(0.0, |j| v.values[j]))
                .sum();
            (total / 3.0, *f)
        })
        .collect();
    means.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
    let expected: Vec<String> = means.iter().map(|(_, f)| f.to_string()).collect();
    assert_eq!(order_feature_panels(&vs), expected);
}
