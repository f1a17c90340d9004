use threadcast::hawkes::{
    fit_hawkes, fit_pooled_kernel, nll_future_until, predict_size, simulate_tree, ConditionalModel,
    HawkesParams,
};
use threadcast::rng::{stream, Purpose};
use threadcast::tree::TimedTree;
use threadcast_testkit as tk;

fn reference() -> HawkesParams {
    HawkesParams::from_values(5.0, 2.0, 0.9, -1.0, 1.2, 0.7).unwrap()
}

fn grow(p: &HawkesParams, count: u64, seed: u64) -> Vec<TimedTree> {
    (0..count)
        .map(|i| {
            simulate_tree(p, f64::INFINITY, &mut stream(seed, i, 0, Purpose::Simulate)).unwrap()
        })
        .collect()
}

fn weibull_sf(p: &HawkesParams, t: f64) -> f64 {
    (-(t / p.root.b).powf(p.root.alpha)).exp()
}

fn lognorm_sf(p: &HawkesParams, t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    1.0 - tk::normal_cdf_by_quadrature((t.ln() - p.kernel.mu) / p.kernel.sigma)
}

#[test]
fn mean_prediction_matches_conditional_expectation() {
    let p = reference();
    let t_learn = 8.0;
    let tree = grow(&p, 40, 11)
        .into_iter()
        .find(|t| t.len() > 20 && t.max_time() > t_learn)
        .expect("a tree with activity after the window");
    let observed = tree.truncate(t_learn);
    let residual: f64 = p.root.a * weibull_sf(&p, t_learn)
        + observed
            .comment_times()
            .iter()
            .map(|&tau| p.n_b * lognorm_sf(&p, t_learn - tau))
            .sum::<f64>();
    let expected = observed.len() as f64 + residual / (1.0 - p.n_b);

    let mut rng = stream(3, 0, 0, Purpose::PredictHawkes);
    let pred = predict_size(&p, &observed, t_learn, 100_000, &mut rng).unwrap();
    let sizes: Vec<f64> = pred.sizes.iter().map(|&s| s as f64).collect();
    let se = tk::std_error(&sizes);
    assert!(
        (pred.mean - expected).abs() < 3.0 * se,
        "mean {} vs {expected} (se {se})",
        pred.mean
    );
}

#[test]
fn more_runs_give_less_variable_predictions() {
    let p = reference();
    let tree = grow(&p, 10, 5).into_iter().max_by_key(|t| t.len()).unwrap();
    let observed = tree.truncate(4.0);
    let spread = |runs: usize| {
        let means: Vec<f64> = (0..200)
            .map(|r| {
                let mut rng = stream(9, runs as u64, r, Purpose::PredictHawkes);
                predict_size(&p, &observed, 4.0, runs, &mut rng)
                    .unwrap()
                    .mean
            })
            .collect();
        tk::variance(&means)
    };
    let (one, fifty) = (spread(1), spread(50));
    assert!(fifty < one, "var(50 runs) {fifty} vs var(1 run) {one}");
}

#[test]
fn residual_mass_vanishes_for_late_windows() {
    let p = reference();
    for tree in grow(&p, 20, 8) {
        let m = ConditionalModel::new(&p, &tree, 1000.0).unwrap();
        assert!(m.residual_mean() < 1e-3, "{}", m.residual_mean());
    }
}

#[test]
fn new_root_children_follow_the_thinned_intensity() {
    let p = reference();
    let t_learn = 3.0;
    let observed = grow(&p, 1, 21).pop().unwrap().truncate(t_learn);
    let model = ConditionalModel::new(&p, &observed, t_learn).unwrap();
    let mut rng = stream(4, 0, 0, Purpose::PredictHawkes);
    let fresh: Vec<f64> = (0..20_000)
        .map(|_| {
            let sim = model.sample_tree(f64::INFINITY, &mut rng).unwrap();
            (sim.root_degree() - observed.root_degree()) as f64
        })
        .collect();
    let expected = p.root.a * weibull_sf(&p, t_learn);
    let m = tk::mean(&fresh);
    assert!(
        (m - expected).abs() < 3.0 * tk::std_error(&fresh),
        "{m} vs {expected}"
    );
}

#[test]
fn generating_parameters_score_best_on_a_fixed_window() {
    let p = reference();
    let perturbed = [
        HawkesParams::from_values(10.0, 2.0, 0.9, -1.0, 1.2, 0.7).unwrap(),
        HawkesParams::from_values(5.0, 2.0, 0.9, 0.0, 1.2, 0.7).unwrap(),
        HawkesParams::from_values(5.0, 2.0, 0.9, -1.0, 1.2, 0.35).unwrap(),
        HawkesParams::from_values(5.0, 6.0, 0.9, -1.0, 1.2, 0.7).unwrap(),
    ];
    let t_learn = 4.0;
    // every tree scored on (t_learn, inf): no selection on the future
    let trees = grow(&p, 500, 31);
    let median_nll = |q: &HawkesParams| {
        let v: Vec<f64> = trees
            .iter()
            .map(|t| nll_future_until(q, t, t_learn, f64::INFINITY).unwrap())
            .collect();
        tk::median(&v)
    };
    let truth = median_nll(&p);
    for q in &perturbed {
        let other = median_nll(q);
        assert!(truth < other, "true {truth} vs perturbed {other} ({q:?})");
    }
}

fn distance(x: &HawkesParams, y: &HawkesParams) -> f64 {
    let lr = |a: f64, b: f64| (a / b).ln().abs();
    lr(x.root.a, y.root.a)
        + lr(x.root.b, y.root.b)
        + lr(x.root.alpha, y.root.alpha)
        + (x.kernel.mu - y.kernel.mu).abs()
        + lr(x.kernel.sigma, y.kernel.sigma)
        + (x.n_b - y.n_b).abs()
}

#[test]
fn longer_windows_approach_the_full_fit() {
    let p = HawkesParams::from_values(30.0, 2.0, 0.9, -1.0, 1.2, 0.7).unwrap();
    let trees = grow(&p, 500, 41);
    let windows = [2.0, 6.0, 24.0];
    let pooled: Vec<_> = windows
        .iter()
        .chain([f64::INFINITY].iter())
        .map(|&w| fit_pooled_kernel(trees.iter(), w).unwrap().params)
        .collect();
    let mut medians = Vec::new();
    for (i, &w) in windows.iter().enumerate() {
        let d: Vec<f64> = trees
            .iter()
            .filter_map(|t| {
                let full = fit_hawkes(t, f64::INFINITY, Some(&pooled[3])).ok()?;
                let part = fit_hawkes(t, w, Some(&pooled[i])).ok()?;
                Some(distance(&part.params, &full.params))
            })
            .collect();
        assert!(d.len() > 400);
        medians.push(tk::median(&d));
    }
    assert!(
        medians.windows(2).all(|w| w[1] < w[0]),
        "median distances {medians:?}"
    );
}

#[test]
fn conditional_from_root_only_matches_unconditional() {
    let p = reference();
    let root = TimedTree::root_only();
    let model = ConditionalModel::new(&p, &root, 0.0).unwrap();
    let mut r1 = stream(5, 0, 0, Purpose::Simulate);
    let mut r2 = stream(5, 1, 0, Purpose::Simulate);
    let a: Vec<f64> = (0..10_000)
        .map(|_| model.sample_tree(f64::INFINITY, &mut r1).unwrap().len() as f64)
        .collect();
    let b: Vec<f64> = (0..10_000)
        .map(|_| simulate_tree(&p, f64::INFINITY, &mut r2).unwrap().len() as f64)
        .collect();
    let pv = tk::ks_two_sample_pvalue(&a, &b);
    assert!(pv > 0.01, "p = {pv}");
}
