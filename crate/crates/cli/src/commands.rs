use crate::manifest::{beside, ManifestBuilder};
use crate::output::write_csv;
use crate::{
    CcdfSample, Command, EvaluateArgs, ExperimentArg, FitArgs, Format, Global, IngestArgs,
    ModelArg, PredictArgs, PredictModel, SimulateArgs, SimulatePaArgs, StatsArgs,
};
use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::time::Instant;
use threadcast::baselines::{
    dp_nll_future, dp_predict_size, fit_dp, fit_pa, fit_rpp, rpp_nll_future, rpp_predict_size,
    simulate_pa, PaParams,
};
use threadcast::eval::{
    bin_medians, pooled_kernel, run_dynamics_experiment, run_structure_experiment, tree_key,
    EvalConfig, Report,
};
use threadcast::hawkes::{
    fit_hawkes, nll_future, predict_size, simulate_tree, HawkesParams, KernelSource,
};
use threadcast::ingest::{self, Forest, IngestOptions, InputFormat, Thread};
use threadcast::kernels::LognormKernel;
use threadcast::rng::{stream, Purpose};
use threadcast::temporal::{ccdf, classify_comments, local_variation, EventSeries};

const DEFAULT_SEED: u64 = 42;

pub fn dispatch(cmd: &Command, global: &Global, argv: &[String], started: Instant) -> Result<()> {
    let config = serde_json::to_value(cmd)?;
    let manifest = ManifestBuilder::new(argv, config, started);
    match cmd {
        Command::Ingest(a) => ingest_cmd(a, manifest),
        Command::Stats(a) => stats_cmd(a, manifest),
        Command::Fit(a) => fit_cmd(a, manifest),
        Command::Simulate(a) => simulate_cmd(a, global, manifest),
        Command::Predict(a) => predict_cmd(a, global, manifest),
        Command::SimulatePa(a) => simulate_pa_cmd(a, global, manifest),
        Command::Evaluate(a) => evaluate_cmd(a, global, manifest),
    }
}

fn load_forest(path: &Path) -> Result<Forest> {
    let forest = ingest::load(path).with_context(|| format!("loading {}", path.display()))?;
    tracing::info!(
        trees = forest.len(),
        nodes = forest.node_count(),
        "loaded forest"
    );
    Ok(forest)
}

fn ingest_cmd(a: &IngestArgs, manifest: ManifestBuilder) -> Result<()> {
    let file = File::open(&a.input).with_context(|| format!("opening {}", a.input.display()))?;
    let format = match a.format {
        Format::Canonical => InputFormat::Canonical,
        Format::Reddit => InputFormat::Reddit,
    };
    let meta = a
        .input
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let got = ingest::ingest(
        BufReader::new(file),
        format,
        IngestOptions { strict: a.strict },
        meta,
    )?;
    ingest::persist(&got.forest, &a.out)?;
    tracing::info!(
        records = got.records,
        kept = got.kept(),
        skipped = got.skips.total(),
        threads = got.forest.len(),
        "ingested"
    );
    manifest
        .input(&a.input)
        .output(&a.out)
        .summary(json!({
            "records": got.records,
            "kept": got.kept(),
            "skipped": got.skips.total(),
            "skipped_by_reason": got.skips,
            "threads": got.forest.len(),
        }))
        .write(&beside(&a.out))
}

#[derive(Serialize)]
struct StatsRow {
    tree: String,
    n: usize,
    d_root: usize,
    n_b: Option<f64>,
    depth: usize,
    lv: Option<f64>,
    early: usize,
    mid: usize,
    late: usize,
}

#[derive(Serialize)]
struct CcdfRow {
    x: f64,
    ccdf: f64,
}

fn stats_cmd(a: &StatsArgs, manifest: ManifestBuilder) -> Result<()> {
    let forest = load_forest(&a.forest)?;
    let rows = match a.ccdf {
        None => {
            let rows: Vec<StatsRow> = forest
                .threads
                .par_iter()
                .map(|th| {
                    let t = &th.tree;
                    let c = classify_comments(t);
                    StatsRow {
                        tree: th.id.clone(),
                        n: t.len(),
                        d_root: t.root_degree(),
                        n_b: t.branching_number().ok(),
                        depth: t.depth(),
                        lv: local_variation(&EventSeries::from_tree(t)).ok(),
                        early: c.early,
                        mid: c.mid,
                        late: c.late,
                    }
                })
                .collect();
            let header = [
                "tree", "n", "d_root", "n_b", "depth", "lv", "early", "mid", "late",
            ];
            write_csv(&a.out, &header, &rows)?;
            rows.len()
        }
        Some(kind) => {
            let sample: Vec<f64> = match kind {
                CcdfSample::Sizes => forest.trees().map(|t| t.len() as f64).collect(),
                CcdfSample::Rootdeg => forest.trees().map(|t| t.root_degree() as f64).collect(),
                CcdfSample::Fwddeg => forest
                    .trees()
                    .flat_map(|t| t.forward_degrees())
                    .map(|d| d as f64)
                    .collect(),
                CcdfSample::RespRoot => forest
                    .trees()
                    .flat_map(|t| t.response_times().root)
                    .collect(),
                CcdfSample::RespComment => forest
                    .trees()
                    .flat_map(|t| t.response_times().comment)
                    .map(|r| r.delay)
                    .collect(),
            };
            let rows: Vec<CcdfRow> = ccdf(&sample)?
                .into_iter()
                .map(|(x, ccdf)| CcdfRow { x, ccdf })
                .collect();
            write_csv(&a.out, &["x", "ccdf"], &rows)?;
            rows.len()
        }
    };
    manifest
        .input(&a.forest)
        .output(&a.out)
        .summary(json!({ "rows": rows }))
        .write(&beside(&a.out))
}

#[derive(Serialize, Deserialize, Default)]
struct HawkesRow {
    #[serde(default)]
    tree: String,
    #[serde(default)]
    status: String,
    a: Option<f64>,
    b: Option<f64>,
    alpha: Option<f64>,
    mu: Option<f64>,
    sigma: Option<f64>,
    n_b: Option<f64>,
    #[serde(default)]
    n_b_raw: Option<f64>,
    #[serde(default)]
    loglik: Option<f64>,
    #[serde(default)]
    converged: Option<bool>,
    #[serde(default)]
    kernel_source: Option<String>,
}

#[derive(Serialize, Default)]
struct PaRow {
    tree: String,
    status: String,
    beta: Option<f64>,
    gamma_c: Option<f64>,
    gamma: Option<f64>,
    loglik: Option<f64>,
    converged: Option<bool>,
}

#[derive(Serialize, Default)]
struct DpRow {
    tree: String,
    status: String,
    total: Option<f64>,
    mu: Option<f64>,
    sigma: Option<f64>,
    loglik: Option<f64>,
    converged: Option<bool>,
}

#[derive(Serialize, Default)]
struct RppRow {
    tree: String,
    status: String,
    c: Option<f64>,
    mu: Option<f64>,
    sigma: Option<f64>,
    d: Option<f64>,
    loglik: Option<f64>,
    converged: Option<bool>,
}

fn forest_pooled_kernel(forest: &Forest, t_learn: f64) -> Option<LognormKernel> {
    let all: Vec<usize> = (0..forest.len()).collect();
    pooled_kernel(forest, &all, t_learn)
}

fn fit_cmd(a: &FitArgs, manifest: ManifestBuilder) -> Result<()> {
    let forest = load_forest(&a.forest)?;
    let t = a.t_learn.0;
    let threads = &forest.threads;
    let (failed, total) = match a.model {
        ModelArg::Hawkes => {
            let pooled = forest_pooled_kernel(&forest, t);
            let rows: Vec<HawkesRow> = threads
                .par_iter()
                .map(|th| match fit_hawkes(&th.tree, t, pooled.as_ref()) {
                    Ok(f) => HawkesRow {
                        tree: th.id.clone(),
                        status: "ok".into(),
                        a: Some(f.params.root.a),
                        b: Some(f.params.root.b),
                        alpha: Some(f.params.root.alpha),
                        mu: Some(f.params.kernel.mu),
                        sigma: Some(f.params.kernel.sigma),
                        n_b: Some(f.params.n_b),
                        n_b_raw: Some(f.n_b_raw),
                        loglik: Some(f.loglik()),
                        converged: Some(f.converged),
                        kernel_source: Some(
                            match f.kernel_source {
                                KernelSource::Fitted => "fitted",
                                KernelSource::Pooled => "pooled",
                            }
                            .into(),
                        ),
                    },
                    Err(e) => HawkesRow {
                        tree: th.id.clone(),
                        status: e.to_string(),
                        ..Default::default()
                    },
                })
                .collect();
            write_csv(&a.out, &[], &rows)?;
            (rows.iter().filter(|r| r.status != "ok").count(), rows.len())
        }
        ModelArg::Pa => {
            let rows: Vec<PaRow> = threads
                .par_iter()
                .map(|th| match fit_pa(&th.tree.truncate(t)) {
                    Ok(f) => PaRow {
                        tree: th.id.clone(),
                        status: "ok".into(),
                        beta: Some(f.params.beta),
                        gamma_c: Some(f.params.gamma_c),
                        gamma: Some(f.params.gamma),
                        loglik: Some(f.loglik),
                        converged: Some(f.converged),
                    },
                    Err(e) => PaRow {
                        tree: th.id.clone(),
                        status: e.to_string(),
                        ..Default::default()
                    },
                })
                .collect();
            write_csv(&a.out, &[], &rows)?;
            (rows.iter().filter(|r| r.status != "ok").count(), rows.len())
        }
        ModelArg::Dp => {
            let rows: Vec<DpRow> = threads
                .par_iter()
                .map(|th| match fit_dp(&EventSeries::from_tree(&th.tree), t) {
                    Ok(f) => DpRow {
                        tree: th.id.clone(),
                        status: "ok".into(),
                        total: Some(f.params.total),
                        mu: Some(f.params.shape.mu),
                        sigma: Some(f.params.shape.sigma),
                        loglik: Some(f.loglik),
                        converged: Some(f.converged),
                    },
                    Err(e) => DpRow {
                        tree: th.id.clone(),
                        status: e.to_string(),
                        ..Default::default()
                    },
                })
                .collect();
            write_csv(&a.out, &[], &rows)?;
            (rows.iter().filter(|r| r.status != "ok").count(), rows.len())
        }
        ModelArg::Rpp => {
            let rows: Vec<RppRow> = threads
                .par_iter()
                .map(|th| match fit_rpp(&EventSeries::from_tree(&th.tree), t) {
                    Ok(f) => RppRow {
                        tree: th.id.clone(),
                        status: "ok".into(),
                        c: Some(f.params.c),
                        mu: Some(f.params.shape.mu),
                        sigma: Some(f.params.shape.sigma),
                        d: Some(f.params.d),
                        loglik: Some(f.loglik),
                        converged: Some(f.converged),
                    },
                    Err(e) => RppRow {
                        tree: th.id.clone(),
                        status: e.to_string(),
                        ..Default::default()
                    },
                })
                .collect();
            write_csv(&a.out, &[], &rows)?;
            (rows.iter().filter(|r| r.status != "ok").count(), rows.len())
        }
    };
    tracing::info!(trees = total, failed, "fitted");
    manifest
        .input(&a.forest)
        .output(&a.out)
        .summary(json!({ "trees": total, "failed": failed }))
        .write(&beside(&a.out))
}

fn parse_inline(s: &str) -> Result<HawkesParams> {
    let mut v = [None; 6];
    let names = ["a", "b", "alpha", "mu", "sigma", "n_b"];
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, x) = part
            .split_once('=')
            .ok_or_else(|| anyhow!("expected key=value, got `{part}`"))?;
        let i = names
            .iter()
            .position(|n| *n == k.trim())
            .ok_or_else(|| anyhow!("unknown parameter `{k}`"))?;
        v[i] = Some(
            x.trim()
                .parse::<f64>()
                .with_context(|| format!("value of {k}"))?,
        );
    }
    let get = |i: usize| v[i].ok_or_else(|| anyhow!("missing parameter `{}`", names[i]));
    Ok(HawkesParams::from_values(
        get(0)?,
        get(1)?,
        get(2)?,
        get(3)?,
        get(4)?,
        get(5)?,
    )?)
}

/// Parameter sets with labels, from a CSV written by `fit` or inline values.
fn read_param_sets(arg: &str) -> Result<(Vec<(String, HawkesParams)>, Option<&Path>)> {
    let path = Path::new(arg);
    if !path.is_file() {
        return Ok((vec![(String::new(), parse_inline(arg)?)], None));
    }
    let mut out = Vec::new();
    let mut reader = csv::Reader::from_path(path)?;
    for (i, row) in reader.deserialize::<HawkesRow>().enumerate() {
        let r = row?;
        let (Some(a), Some(b), Some(alpha), Some(mu), Some(sigma), Some(n_b)) =
            (r.a, r.b, r.alpha, r.mu, r.sigma, r.n_b)
        else {
            continue;
        };
        let label = if r.tree.is_empty() {
            i.to_string()
        } else {
            r.tree
        };
        out.push((
            label,
            HawkesParams::from_values(a, b, alpha, mu, sigma, n_b)?,
        ));
    }
    if out.is_empty() {
        bail!("no complete parameter rows in {}", path.display());
    }
    Ok((out, Some(path)))
}

fn label(set: &str, run: usize) -> String {
    if set.is_empty() {
        run.to_string()
    } else {
        format!("{set}/{run}")
    }
}

fn simulate_cmd(a: &SimulateArgs, g: &Global, manifest: ManifestBuilder) -> Result<()> {
    let seed = g.seed.unwrap_or(DEFAULT_SEED);
    let (sets, source) = read_param_sets(&a.params)?;
    let jobs: Vec<(usize, usize)> = (0..sets.len())
        .flat_map(|s| (0..a.runs).map(move |r| (s, r)))
        .collect();
    let threads = jobs
        .par_iter()
        .map(|&(s, r)| {
            let mut rng = stream(seed, s as u64, r as u64, Purpose::Simulate);
            let tree = simulate_tree(&sets[s].1, a.horizon.0, &mut rng)?;
            Ok(Thread {
                id: label(&sets[s].0, r),
                tree,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let forest = Forest::new(threads, format!("simulate:seed={seed}"));
    ingest::persist(&forest, &a.out)?;
    tracing::info!(
        trees = forest.len(),
        nodes = forest.node_count(),
        "simulated"
    );
    let mut manifest = manifest.seed(seed).output(&a.out);
    if let Some(p) = source {
        manifest = manifest.input(p);
    }
    manifest
        .summary(json!({ "trees": forest.len(), "nodes": forest.node_count() }))
        .write(&beside(&a.out))
}

#[derive(Serialize)]
struct PredRow {
    tree: String,
    observed: usize,
    final_size: usize,
    mean_pred: Option<f64>,
    nll: Option<f64>,
    status: String,
}

fn predict_one(
    th: &Thread,
    model: PredictModel,
    t: f64,
    runs: usize,
    seed: u64,
    pooled: Option<&LognormKernel>,
) -> PredRow {
    let tree = &th.tree;
    let cut = tree.truncate(t);
    let mut row = PredRow {
        tree: th.id.clone(),
        observed: cut.len(),
        final_size: tree.len(),
        mean_pred: None,
        nll: None,
        status: "ok".into(),
    };
    let key = tree_key(&th.id);
    let t_end = tree.max_time();
    let has_future = t_end > t;
    let series = EventSeries::from_tree(tree);
    let outcome: Result<(f64, Option<f64>), String> = match model {
        PredictModel::Hawkes => (|| {
            let fit = fit_hawkes(tree, t, pooled).map_err(|e| format!("fit: {e}"))?;
            let mut rng = stream(seed, key, 0, Purpose::PredictHawkes);
            let p = predict_size(&fit.params, &cut, t, runs, &mut rng)
                .map_err(|e| format!("predict: {e}"))?;
            let nll = has_future
                .then(|| nll_future(&fit.params, tree, t))
                .transpose()
                .map_err(|e| format!("nll: {e}"))?;
            Ok((p.mean, nll))
        })(),
        PredictModel::Dp => (|| {
            let fit = fit_dp(&series, t).map_err(|e| format!("fit: {e}"))?;
            let mut rng = stream(seed, key, 0, Purpose::PredictDp);
            let (m, _) = dp_predict_size(&fit.params, cut.len(), t, runs, &mut rng)
                .map_err(|e| format!("predict: {e}"))?;
            let nll = has_future
                .then(|| dp_nll_future(&fit.params, &series, t, t_end))
                .transpose()
                .map_err(|e| format!("nll: {e}"))?;
            Ok((m, nll))
        })(),
        PredictModel::Rpp => (|| {
            let fit = fit_rpp(&series, t).map_err(|e| format!("fit: {e}"))?;
            let mut rng = stream(seed, key, 0, Purpose::PredictRpp);
            let (m, _) = rpp_predict_size(&fit.params, cut.len(), t, runs, &mut rng)
                .map_err(|e| format!("predict: {e}"))?;
            let nll = has_future
                .then(|| rpp_nll_future(&fit.params, &series, t, t_end))
                .transpose()
                .map_err(|e| format!("nll: {e}"))?;
            Ok((m, nll))
        })(),
    };
    match outcome {
        Ok((m, nll)) => {
            row.mean_pred = Some(m);
            row.nll = nll;
            if !has_future {
                row.status = "no future events".into();
            }
        }
        Err(e) => row.status = e,
    }
    row
}

fn predict_cmd(a: &PredictArgs, g: &Global, manifest: ManifestBuilder) -> Result<()> {
    if a.runs == 0 {
        bail!("--runs must be at least 1");
    }
    if !a.t_learn.0.is_finite() {
        bail!("--t-learn must be a finite number of hours");
    }
    let seed = g.seed.unwrap_or(DEFAULT_SEED);
    let forest = load_forest(&a.forest)?;
    let t = a.t_learn.0;
    let pooled = match a.model {
        PredictModel::Hawkes => forest_pooled_kernel(&forest, t),
        _ => None,
    };
    let rows: Vec<PredRow> = forest
        .threads
        .par_iter()
        .map(|th| predict_one(th, a.model, t, a.runs, seed, pooled.as_ref()))
        .collect();
    write_csv(&a.out, &[], &rows)?;
    let failed = rows.iter().filter(|r| r.mean_pred.is_none()).count();
    tracing::info!(trees = rows.len(), failed, "predicted");
    manifest
        .seed(seed)
        .input(&a.forest)
        .output(&a.out)
        .summary(json!({ "trees": rows.len(), "failed": failed }))
        .write(&beside(&a.out))
}

fn simulate_pa_cmd(a: &SimulatePaArgs, g: &Global, manifest: ManifestBuilder) -> Result<()> {
    let seed = g.seed.unwrap_or(DEFAULT_SEED);
    if a.n == 0 {
        bail!("--n must be at least 1");
    }
    let params = PaParams::new(a.beta, a.gamma_c, a.gamma)?;
    let threads: Vec<Thread> = (0..a.runs)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, 0, r as u64, Purpose::StructurePa);
            Thread {
                id: r.to_string(),
                tree: simulate_pa(&params, a.n, &mut rng),
            }
        })
        .collect();
    let forest = Forest::new(threads, format!("simulate-pa:seed={seed}"));
    ingest::persist(&forest, &a.out)?;
    tracing::info!(trees = forest.len(), "simulated");
    manifest
        .seed(seed)
        .output(&a.out)
        .summary(json!({ "trees": forest.len(), "nodes": forest.node_count() }))
        .write(&beside(&a.out))
}

fn evaluate_cmd(a: &EvaluateArgs, g: &Global, manifest: ManifestBuilder) -> Result<()> {
    let mut config = match &a.config {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str::<EvalConfig>(&text)
                .with_context(|| format!("parsing {}", p.display()))?
        }
        None => EvalConfig::default(),
    };
    if let Some(s) = g.seed {
        config.seed = s;
    }
    config.validate()?;
    let forest = load_forest(&a.forest)?;
    let mut report = Report::default();
    if a.experiment != ExperimentArg::Dynamics {
        report.extend(run_structure_experiment(&forest, &config));
        tracing::info!(rows = report.rows.len(), "structure experiment done");
    }
    if a.experiment != ExperimentArg::Structure {
        report.extend(run_dynamics_experiment(&forest, &config));
        tracing::info!(rows = report.rows.len(), "dynamics experiment done");
    }
    let bins = bin_medians(&report.rows, &config);
    let rows_path = a.out.join("rows.csv");
    let bins_path = a.out.join("bins.csv");
    let skips_path = a.out.join("skips.csv");
    write_csv(
        &rows_path,
        &[
            "tree", "cohort", "size", "model", "window", "metric", "value", "flags",
        ],
        &report.rows,
    )?;
    write_csv(
        &bins_path,
        &[
            "cohort",
            "bin",
            "size_lo",
            "size_hi",
            "model",
            "window",
            "metric",
            "median",
            "median_abs",
            "count",
        ],
        &bins,
    )?;
    write_csv(
        &skips_path,
        &["tree", "cohort", "size", "model", "window", "reason"],
        &report.skips,
    )?;
    let mut manifest = manifest
        .seed(config.seed)
        .input(&a.forest)
        .output(&rows_path)
        .output(&bins_path)
        .output(&skips_path)
        .summary(json!({
            "resolved_config": config,
            "rows": report.rows.len(),
            "bins": bins.len(),
            "skips": report.skips.len(),
        }));
    if let Some(p) = &a.config {
        manifest = manifest.input(p);
    }
    manifest.write(&a.out.join("manifest.json"))?;
    Ok(())
}
