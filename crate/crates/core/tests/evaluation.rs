use threadcast::eval::{
    bin_medians, remaining_fraction, run_dynamics_experiment, run_structure_experiment, Cohort,
    EvalConfig, Metric, Model, ReportRow,
};
use threadcast::ingest::Forest;
use threadcast::tree::{TimedTree, NO_PARENT};

/// Heap-shaped tree: node i replies to (i - 1) / 2, one comment every
/// `step` hours.
fn heap_tree(n: usize, step: f64) -> TimedTree {
    let parents = (0..n)
        .map(|i| if i == 0 { NO_PARENT } else { (i - 1) / 2 })
        .collect();
    let times = (0..n).map(|i| i as f64 * step).collect();
    TimedTree::new(parents, times).unwrap()
}

fn wide_config(runs: usize) -> EvalConfig {
    EvalConfig {
        runs,
        small: [1, 1000],
        large: [1001, 2000],
        bins: 2,
        ..Default::default()
    }
}

#[test]
fn identical_trees_give_finite_reproducible_errors() {
    let forest = Forest::from_trees(vec![heap_tree(60, 0.05); 4], "hand");
    let config = wide_config(5);
    let first = run_structure_experiment(&forest, &config);
    let second = run_structure_experiment(&forest, &config);
    assert_eq!(first, second);
    for model in [Model::Hawkes, Model::Pa] {
        let rows: Vec<&ReportRow> = first.rows.iter().filter(|r| r.model == model).collect();
        assert_eq!(rows.len(), 8, "{model:?}");
        assert!(rows.iter().all(|r| r.value.is_finite() && r.value >= 0.0));
    }
    let mut reseeded = config.clone();
    reseeded.seed += 1;
    assert_ne!(
        run_structure_experiment(&forest, &reseeded).rows,
        first.rows
    );
}

#[test]
fn single_tree_single_run_gives_one_row_per_model_and_metric() {
    let forest = Forest::from_trees(vec![heap_tree(30, 0.1)], "hand");
    let report = run_structure_experiment(&forest, &wide_config(1));
    for metric in [Metric::EpsDMin, Metric::EpsDMax] {
        let mut models: Vec<Model> = report
            .rows
            .iter()
            .filter(|r| r.metric == metric)
            .map(|r| r.model)
            .collect();
        models.sort();
        assert_eq!(models, vec![Model::Hawkes, Model::Pa], "{metric:?}");
    }
}

#[test]
fn quiet_future_gives_zero_remaining_fraction_and_skips() {
    // every comment lands before the 4 h window closes
    let forest = Forest::from_trees(vec![heap_tree(40, 0.05)], "hand");
    let config = EvalConfig {
        windows: vec![4.0],
        ..wide_config(3)
    };
    let report = run_dynamics_experiment(&forest, &config);
    let remaining: Vec<&ReportRow> = report
        .rows
        .iter()
        .filter(|r| r.metric == Metric::RemainingFraction)
        .collect();
    assert_eq!(remaining.len(), 1);
    assert_eq!(
        (remaining[0].model, remaining[0].value),
        (Model::Observed, 0.0)
    );
    assert!(report.rows.iter().all(|r| r.metric != Metric::NllFuture));
    for model in [Model::Hawkes, Model::Dp, Model::Rpp] {
        assert!(report.skips.iter().any(|s| s.model == model), "{model:?}");
    }
    assert_eq!(remaining_fraction(40, 40), 0.0);
}

fn row(size: usize, value: f64) -> ReportRow {
    ReportRow {
        tree: size.to_string(),
        cohort: Cohort::Small,
        size,
        model: Model::Hawkes,
        window: Some(6.0),
        metric: Metric::EpsS,
        value,
        flags: String::new(),
    }
}

#[test]
fn two_bin_medians_by_hand() {
    // edges 1, 10, 100 over the small cohort [1, 99]
    let config = EvalConfig {
        small: [1, 99],
        large: [100, 200],
        bins: 2,
        ..Default::default()
    };
    let rows = vec![
        row(2, 0.4),
        row(3, -0.1),
        row(5, 0.2),
        row(7, 0.9),
        row(9, -0.3),
        row(10, 0.05),
        row(20, -0.6),
        row(40, 0.15),
        row(60, 0.25),
        row(99, -0.05),
    ];
    let out = bin_medians(&rows, &config);
    let get = |bin| out.iter().find(|b| b.bin == bin).unwrap();
    // bin 0 sorted: -0.3 -0.1 0.2 0.4 0.9; abs: 0.1 0.2 0.3 0.4 0.9
    assert_eq!(
        (
            get(Some(0)).median,
            get(Some(0)).median_abs,
            get(Some(0)).count
        ),
        (0.2, 0.3, 5)
    );
    // bin 1 sorted: -0.6 -0.05 0.05 0.15 0.25; abs: 0.05 0.05 0.15 0.25 0.6
    assert_eq!(
        (
            get(Some(1)).median,
            get(Some(1)).median_abs,
            get(Some(1)).count
        ),
        (0.05, 0.15, 5)
    );
    // whole cohort, ten values: (0.05 + 0.15) / 2 and (0.2 + 0.25) / 2
    let all = get(None);
    assert_eq!(all.count, 10);
    assert!((all.median - 0.1).abs() < 1e-15);
    assert!((all.median_abs - 0.225).abs() < 1e-15);
    assert_eq!(out.len(), 3);
}
