use super::metrics::{layer_profile_errors, relative_size_error, remaining_fraction};
use super::{Cohort, EvalConfig, Metric, Model, Report, ReportRow, SkipRow};
use crate::baselines::{
    self, dp_nll_future, dp_predict_size, fit_dp, fit_pa, fit_rpp, rpp_nll_future, rpp_predict_size,
};
use crate::hawkes::{self, fit_hawkes, fit_pooled_kernel, nll_future, predict_size, KernelSource};
use crate::ingest::{Forest, Thread};
use crate::kernels::LognormKernel;
use crate::rng::{fnv1a, stream, Purpose};
use crate::temporal::EventSeries;
use crate::tree::{DepthProfile, TimedTree};
use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Structure,
    Dynamics,
}

pub fn tree_key(id: &str) -> u64 {
    fnv1a(id.as_bytes())
}

/// Indices of the forest's trees in `cohort`, ascending. Cohorts larger
/// than the sample cap are subsampled with the global seed.
pub fn select_cohort(forest: &Forest, cohort: Cohort, config: &EvalConfig) -> Vec<usize> {
    let [lo, hi] = config.bounds(cohort);
    let members: Vec<usize> = forest
        .threads
        .iter()
        .enumerate()
        .filter(|(_, t)| (lo..=hi).contains(&t.tree.len()))
        .map(|(i, _)| i)
        .collect();
    if members.len() <= config.sample_cap {
        return members;
    }
    let mut rng = stream(config.seed, cohort as u64, 0, Purpose::Sampling);
    let mut picked: Vec<usize> = index::sample(&mut rng, members.len(), config.sample_cap)
        .into_iter()
        .map(|i| members[i])
        .collect();
    picked.sort_unstable();
    picked
}

struct Ctx<'a> {
    thread: &'a Thread,
    cohort: Cohort,
    report: Report,
}

impl<'a> Ctx<'a> {
    fn new(thread: &'a Thread, cohort: Cohort) -> Self {
        Self {
            thread,
            cohort,
            report: Report::default(),
        }
    }

    fn row(
        &mut self,
        model: Model,
        window: Option<f64>,
        metric: Metric,
        value: f64,
        flags: &[&str],
    ) {
        self.report.rows.push(ReportRow {
            tree: self.thread.id.clone(),
            cohort: self.cohort,
            size: self.thread.tree.len(),
            model,
            window,
            metric,
            value,
            flags: flags.join(";"),
        });
    }

    fn skip(&mut self, model: Model, window: Option<f64>, reason: impl ToString) {
        self.report.skips.push(SkipRow {
            tree: self.thread.id.clone(),
            cohort: self.cohort,
            size: self.thread.tree.len(),
            model,
            window,
            reason: reason.to_string(),
        });
    }
}

fn comment_replies(tree: &TimedTree) -> usize {
    tree.len() - 1 - tree.root_degree()
}

/// Kernel pooled over the `members` of a forest for trees too sparse to fit
/// their own; `None` when no member needs it.
pub fn pooled_kernel(forest: &Forest, members: &[usize], t_learn: f64) -> Option<LognormKernel> {
    let needed = members.iter().any(|&i| {
        let cut = forest.threads[i].tree.truncate(t_learn);
        cut.root_degree() > 0 && comment_replies(&cut) < 2
    });
    if !needed {
        return None;
    }
    fit_pooled_kernel(members.iter().map(|&i| &forest.threads[i].tree), t_learn)
        .ok()
        .map(|f| f.params)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Profile errors, treating an empty simulated profile as all layers
/// missing: both errors are then the reference's mean layer count.
fn profile_errors(sim: &DepthProfile, reference: &DepthProfile) -> (f64, f64, bool) {
    match layer_profile_errors(sim, reference) {
        Ok((lo, hi)) => (lo, hi, false),
        Err(_) => {
            let e = reference.total() as f64 / reference.depth().max(1) as f64;
            (e, e, true)
        }
    }
}

fn structure_tree(
    thread: &Thread,
    cohort: Cohort,
    pooled: Option<&LognormKernel>,
    config: &EvalConfig,
) -> Report {
    let mut ctx = Ctx::new(thread, cohort);
    let tree = &thread.tree;
    let key = tree_key(&thread.id);
    let reference = tree.depth_profile();
    let hawkes = match fit_hawkes(tree, f64::INFINITY, pooled) {
        Ok(f) => f,
        Err(e) => {
            ctx.skip(Model::Hawkes, None, format!("fit: {e}"));
            ctx.skip(Model::Pa, None, "no paired hawkes simulation");
            return ctx.report;
        }
    };
    let pa = fit_pa(tree);
    let mut sizes = Vec::with_capacity(config.runs);
    let (mut h_lo, mut h_hi) = (Vec::new(), Vec::new());
    let mut empty_sim = false;
    for r in 0..config.runs {
        let mut rng = stream(config.seed, key, r as u64, Purpose::StructureHawkes);
        match hawkes::simulate_tree(&hawkes.params, f64::INFINITY, &mut rng) {
            Ok(sim) => {
                let (lo, hi, empty) = profile_errors(&sim.depth_profile(), &reference);
                empty_sim |= empty;
                h_lo.push(lo);
                h_hi.push(hi);
                sizes.push(sim.len());
            }
            Err(e) => {
                ctx.skip(Model::Hawkes, None, format!("simulate: {e}"));
                ctx.skip(Model::Pa, None, "no paired hawkes simulation");
                return ctx.report;
            }
        }
    }
    let mut flags = Vec::new();
    if hawkes.kernel_source == KernelSource::Pooled {
        flags.push("pooled_kernel");
    }
    if !hawkes.converged {
        flags.push("not_converged");
    }
    if empty_sim {
        flags.push("empty_simulation");
    }
    ctx.row(Model::Hawkes, None, Metric::EpsDMin, mean(&h_lo), &flags);
    ctx.row(Model::Hawkes, None, Metric::EpsDMax, mean(&h_hi), &flags);
    match pa {
        Ok(pa) => {
            let (mut lo, mut hi) = (Vec::new(), Vec::new());
            for (r, &n) in sizes.iter().enumerate() {
                let mut rng = stream(config.seed, key, r as u64, Purpose::StructurePa);
                let sim = baselines::simulate_pa(&pa.params, n, &mut rng);
                let (l, h, _) = profile_errors(&sim.depth_profile(), &reference);
                lo.push(l);
                hi.push(h);
            }
            let flags: &[&str] = if pa.converged {
                &[]
            } else {
                &["not_converged"]
            };
            ctx.row(Model::Pa, None, Metric::EpsDMin, mean(&lo), flags);
            ctx.row(Model::Pa, None, Metric::EpsDMax, mean(&hi), flags);
        }
        Err(e) => ctx.skip(Model::Pa, None, format!("fit: {e}")),
    }
    ctx.report
}

/// Fits Hawkes and PA to each full cohort tree, simulates `runs` paired
/// trees per model (PA trees take the node count of the same replicate's
/// Hawkes tree) and reports mean layer-profile errors.
pub fn run_structure_experiment(forest: &Forest, config: &EvalConfig) -> Report {
    let mut report = Report::default();
    for cohort in Cohort::ALL {
        let members = select_cohort(forest, cohort, config);
        let pooled = pooled_kernel(forest, &members, f64::INFINITY);
        let parts: Vec<Report> = members
            .par_iter()
            .map(|&i| structure_tree(&forest.threads[i], cohort, pooled.as_ref(), config))
            .collect();
        parts.into_iter().for_each(|p| report.extend(p));
    }
    report
}

fn dynamics_tree(
    thread: &Thread,
    cohort: Cohort,
    pooled: &[Option<LognormKernel>],
    config: &EvalConfig,
) -> Report {
    let mut ctx = Ctx::new(thread, cohort);
    let tree = &thread.tree;
    let key = tree_key(&thread.id);
    let size = tree.len();
    let series = EventSeries::from_tree(tree);
    let t_end = tree.max_time();
    for (wi, &w) in config.windows.iter().enumerate() {
        let win = Some(w);
        let cut = tree.truncate(w);
        let observed = cut.len();
        ctx.row(
            Model::Observed,
            win,
            Metric::RemainingFraction,
            remaining_fraction(observed, size),
            &[],
        );
        if t_end <= w {
            for m in [Model::Hawkes, Model::Dp, Model::Rpp] {
                ctx.skip(m, win, "no future events");
            }
            continue;
        }
        let replicate = wi as u64;

        match fit_hawkes(tree, w, pooled[wi].as_ref()) {
            Ok(fit) => {
                let mut flags = Vec::new();
                if fit.kernel_source == KernelSource::Pooled {
                    flags.push("pooled_kernel");
                }
                if !fit.converged {
                    flags.push("not_converged");
                }
                match nll_future(&fit.params, tree, w) {
                    Ok(v) => ctx.row(Model::Hawkes, win, Metric::NllFuture, v, &flags),
                    Err(e) => ctx.skip(Model::Hawkes, win, format!("nll: {e}")),
                }
                let mut rng = stream(config.seed, key, replicate, Purpose::PredictHawkes);
                match predict_size(&fit.params, &cut, w, config.runs, &mut rng) {
                    Ok(p) => ctx.row(
                        Model::Hawkes,
                        win,
                        Metric::EpsS,
                        relative_size_error(p.mean, size),
                        &flags,
                    ),
                    Err(e) => ctx.skip(Model::Hawkes, win, format!("predict: {e}")),
                }
            }
            Err(e) => ctx.skip(Model::Hawkes, win, format!("fit: {e}")),
        }

        match fit_dp(&series, w) {
            Ok(fit) => {
                let flags: &[&str] = if fit.converged {
                    &[]
                } else {
                    &["not_converged"]
                };
                match dp_nll_future(&fit.params, &series, w, t_end) {
                    Ok(v) => ctx.row(Model::Dp, win, Metric::NllFuture, v, flags),
                    Err(e) => ctx.skip(Model::Dp, win, format!("nll: {e}")),
                }
                let mut rng = stream(config.seed, key, replicate, Purpose::PredictDp);
                match dp_predict_size(&fit.params, observed, w, config.runs, &mut rng) {
                    Ok((m, _)) => ctx.row(
                        Model::Dp,
                        win,
                        Metric::EpsS,
                        relative_size_error(m, size),
                        flags,
                    ),
                    Err(e) => ctx.skip(Model::Dp, win, format!("predict: {e}")),
                }
            }
            Err(e) => ctx.skip(Model::Dp, win, format!("fit: {e}")),
        }

        match fit_rpp(&series, w) {
            Ok(fit) => {
                let flags: &[&str] = if fit.converged {
                    &[]
                } else {
                    &["not_converged"]
                };
                match rpp_nll_future(&fit.params, &series, w, t_end) {
                    Ok(v) => ctx.row(Model::Rpp, win, Metric::NllFuture, v, flags),
                    Err(e) => ctx.skip(Model::Rpp, win, format!("nll: {e}")),
                }
                let mut rng = stream(config.seed, key, replicate, Purpose::PredictRpp);
                match rpp_predict_size(&fit.params, observed, w, config.runs, &mut rng) {
                    Ok((m, _)) => ctx.row(
                        Model::Rpp,
                        win,
                        Metric::EpsS,
                        relative_size_error(m, size),
                        flags,
                    ),
                    Err(e) => ctx.skip(Model::Rpp, win, format!("predict: {e}")),
                }
            }
            Err(e) => ctx.skip(Model::Rpp, win, format!("fit: {e}")),
        }
    }
    ctx.report
}

/// For every cohort tree and learning window, fits Hawkes, DP and RPP to
/// the observed part and scores the future: NLL on `(t_learn, T_end]` and
/// the relative error of the `runs`-sample mean final size.
pub fn run_dynamics_experiment(forest: &Forest, config: &EvalConfig) -> Report {
    let mut report = Report::default();
    for cohort in Cohort::ALL {
        let members = select_cohort(forest, cohort, config);
        let pooled: Vec<Option<LognormKernel>> = config
            .windows
            .iter()
            .map(|&w| pooled_kernel(forest, &members, w))
            .collect();
        let parts: Vec<Report> = members
            .par_iter()
            .map(|&i| dynamics_tree(&forest.threads[i], cohort, &pooled, config))
            .collect();
        parts.into_iter().for_each(|p| report.extend(p));
    }
    report
}
