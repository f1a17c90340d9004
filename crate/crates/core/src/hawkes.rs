//! The discussion-tree Hawkes model.
//!
//! Event intensity is `lambda(t) = mu(t) + n_b * sum_{tau_i < t} phi(t - tau_i)`
//! with a Weibull-shaped `mu` for replies to the post and a lognormal `phi`
//! for replies to comments. Simulation uses the cluster representation:
//! the post has `Poisson(a)` direct replies at Weibull times, and every
//! comment has `Poisson(n_b)` replies after lognormal delays.

use crate::kernels::{
    self, fit_lognormal_kernel, fit_weibull_intensity, floor_delay, KernelData, KernelError,
    LognormKernel, WeibullIntensity,
};
use crate::temporal::EventSeries;
use crate::tree::{clamp_branching, TimedTree, TreeBuilder, TreeError};
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hard limit on nodes generated for one tree.
pub const NODE_CAP: usize = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HawkesError {
    #[error("branching number {0} is not subcritical")]
    Supercritical(f64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("learning window {t_learn} h ends before the last observed event at {last} h")]
    InvalidWindow { t_learn: f64, last: f64 },
    #[error("no events after the learning window")]
    NoFutureEvents,
    #[error("simulation exceeded {0} nodes")]
    SimulationBlowup(usize),
    #[error("insufficient data: {0}")]
    InsufficientData(&'static str),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HawkesParams {
    pub root: WeibullIntensity,
    pub kernel: LognormKernel,
    pub n_b: f64,
}

impl HawkesParams {
    pub fn new(
        root: WeibullIntensity,
        kernel: LognormKernel,
        n_b: f64,
    ) -> Result<Self, HawkesError> {
        if !(0.0..1.0).contains(&n_b) {
            return Err(HawkesError::Supercritical(n_b));
        }
        Ok(Self { root, kernel, n_b })
    }

    /// Convenience constructor from the six scalars.
    pub fn from_values(
        a: f64,
        b: f64,
        alpha: f64,
        mu: f64,
        sigma: f64,
        n_b: f64,
    ) -> Result<Self, HawkesError> {
        Self::new(
            WeibullIntensity::new(a, b, alpha)?,
            LognormKernel::new(mu, sigma)?,
            n_b,
        )
    }

    pub fn expected_size(&self) -> f64 {
        1.0 + self.root.a / (1.0 - self.n_b)
    }

    /// Intensity at `t` given the comment times strictly before `t`.
    pub fn intensity(&self, t: f64, history: &[f64]) -> f64 {
        let excitation: f64 = history
            .iter()
            .filter(|&&s| s < t)
            .map(|&s| self.kernel.pdf(t - s))
            .sum();
        self.root.intensity(t) + self.n_b * excitation
    }
}

/// Expected size of an unpruned tree, `1 + a / (1 - n_b)`.
pub fn expected_size(a: f64, n_b: f64) -> Result<f64, HawkesError> {
    if !(n_b < 1.0) {
        return Err(HawkesError::Supercritical(n_b));
    }
    Ok(1.0 + a / (1.0 - n_b))
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if !(mean > 0.0) {
        return 0;
    }
    Poisson::new(mean)
        .map(|d| d.sample(rng) as usize)
        .unwrap_or(0)
}

/// Grows replies to every node in `builder` from index `from` onward with
/// the unconditioned offspring law.
fn grow_descendants<R: Rng + ?Sized>(
    params: &HawkesParams,
    builder: &mut TreeBuilder,
    from: usize,
    horizon: f64,
    rng: &mut R,
) -> Result<(), HawkesError> {
    let mut next = from;
    while next < builder.len() {
        let t = builder.time(next);
        for _ in 0..poisson(params.n_b, rng) {
            let child = t + params.kernel.sample(rng);
            if child <= horizon {
                if builder.len() >= NODE_CAP {
                    return Err(HawkesError::SimulationBlowup(NODE_CAP));
                }
                builder.push(next, child);
            }
        }
        next += 1;
    }
    Ok(())
}

/// Simulates one discussion tree up to `horizon` hours (may be infinite).
pub fn simulate_tree<R: Rng + ?Sized>(
    params: &HawkesParams,
    horizon: f64,
    rng: &mut R,
) -> Result<TimedTree, HawkesError> {
    let mut builder = TreeBuilder::new();
    for _ in 0..poisson(params.root.a, rng) {
        let t = params.root.sample(rng);
        if t <= horizon {
            builder.push(0, t);
        }
    }
    grow_descendants(params, &mut builder, 1, horizon, rng)?;
    Ok(builder.build()?)
}

/// Total progeny of `first` independent Galton-Watson roots with
/// `Poisson(n_b)` offspring.
fn progeny<R: Rng + ?Sized>(first: usize, n_b: f64, rng: &mut R) -> Result<usize, HawkesError> {
    let mut total = 0usize;
    let mut generation = first;
    while generation > 0 {
        total += generation;
        if total > NODE_CAP {
            return Err(HawkesError::SimulationBlowup(NODE_CAP));
        }
        generation = poisson(n_b * generation as f64, rng);
    }
    Ok(total)
}

/// Future growth of a tree observed up to `t_learn`.
///
/// The post's remaining replies are `Poisson(a * S_W(t_learn))` at Weibull
/// times conditioned past `t_learn`; an observed comment created at `tau`
/// has `Poisson(n_b * S_LN(t_learn - tau))` remaining replies at delays
/// conditioned past `t_learn - tau`. New comments reply with the
/// unconditioned law.
#[derive(Debug, Clone)]
pub struct ConditionalModel<'a> {
    params: HawkesParams,
    observed: &'a TimedTree,
    t_learn: f64,
    root_residual: f64,
    comment_residual: Vec<f64>,
}

impl<'a> ConditionalModel<'a> {
    pub fn new(
        params: &HawkesParams,
        observed: &'a TimedTree,
        t_learn: f64,
    ) -> Result<Self, HawkesError> {
        let last = observed.max_time();
        if !(t_learn >= last) {
            return Err(HawkesError::InvalidWindow { t_learn, last });
        }
        let root_residual = params.root.a * params.root.survival(t_learn);
        let comment_residual = observed
            .comment_times()
            .iter()
            .map(|&tau| params.n_b * params.kernel.sf(t_learn - tau))
            .collect();
        Ok(Self {
            params: *params,
            observed,
            t_learn,
            root_residual,
            comment_residual,
        })
    }

    /// Expected number of first-generation new comments.
    pub fn residual_mean(&self) -> f64 {
        self.root_residual + self.comment_residual.iter().sum::<f64>()
    }

    /// Expected final size, `observed + residual / (1 - n_b)`.
    pub fn expected_size(&self) -> f64 {
        self.observed.len() as f64 + self.residual_mean() / (1.0 - self.params.n_b)
    }

    pub fn sample_tree<R: Rng + ?Sized>(
        &self,
        horizon: f64,
        rng: &mut R,
    ) -> Result<TimedTree, HawkesError> {
        let p = &self.params;
        let mut builder = TreeBuilder::from_tree(self.observed);
        let first_new = builder.len();
        for _ in 0..poisson(self.root_residual, rng) {
            let t = p.root.sample_after(self.t_learn, rng);
            if t <= horizon {
                builder.push(0, t);
            }
        }
        for (j, &mean) in self.comment_residual.iter().enumerate() {
            let node = j + 1;
            let tau = self.observed.time(node);
            for _ in 0..poisson(mean, rng) {
                let t = tau + p.kernel.sample_after(self.t_learn - tau, rng);
                if t <= horizon {
                    builder.push(node, t);
                }
            }
        }
        grow_descendants(p, &mut builder, first_new, horizon, rng)?;
        Ok(builder.build()?)
    }

    /// Final size with an infinite horizon. Only offspring counts matter, so
    /// the first generation is drawn as one Poisson total and its descendants
    /// as a Galton-Watson progeny.
    pub fn sample_size<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize, HawkesError> {
        let first = poisson(self.residual_mean(), rng);
        Ok(self.observed.len() + progeny(first, self.params.n_b, rng)?)
    }
}

pub fn simulate_conditional<R: Rng + ?Sized>(
    params: &HawkesParams,
    observed: &TimedTree,
    t_learn: f64,
    horizon: f64,
    rng: &mut R,
) -> Result<TimedTree, HawkesError> {
    if horizon < t_learn {
        return Err(HawkesError::InvalidWindow {
            t_learn: horizon,
            last: t_learn,
        });
    }
    ConditionalModel::new(params, observed, t_learn)?.sample_tree(horizon, rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizePrediction {
    pub mean: f64,
    pub sizes: Vec<usize>,
}

impl SizePrediction {
    pub fn from_sizes(sizes: Vec<usize>) -> Self {
        let mean = sizes.iter().sum::<usize>() as f64 / sizes.len().max(1) as f64;
        Self { mean, sizes }
    }
}

/// Monte Carlo mean of the final size over `runs` conditional simulations.
pub fn predict_size<R: Rng + ?Sized>(
    params: &HawkesParams,
    observed: &TimedTree,
    t_learn: f64,
    runs: usize,
    rng: &mut R,
) -> Result<SizePrediction, HawkesError> {
    let model = ConditionalModel::new(params, observed, t_learn)?;
    let sizes = (0..runs)
        .map(|_| model.sample_size(rng))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SizePrediction::from_sizes(sizes))
}

fn floored_comment_times(tree: &TimedTree) -> EventSeries {
    // zero offsets floored as in the activity baselines
    EventSeries::new(
        tree.comment_times()
            .iter()
            .map(|&t| floor_delay(t))
            .collect(),
    )
}

/// Negative log-likelihood of the activity after `t_learn`.
///
/// Sums `log lambda` over comments created after `t_learn`, with the
/// intensity built from every earlier comment, and subtracts the
/// compensator over `[t_learn, T_end]` where `T_end` is the last comment.
pub fn nll_future(
    params: &HawkesParams,
    tree: &TimedTree,
    t_learn: f64,
) -> Result<f64, HawkesError> {
    let series = floored_comment_times(tree);
    let times = series.times();
    if series.count_until(t_learn) == times.len() {
        return Err(HawkesError::NoFutureEvents);
    }
    nll_on(params, times, t_learn, times[times.len() - 1])
}

/// Like [`nll_future`] over the fixed interval `(t_learn, t_end]`;
/// `t_end` may be infinite and the interval may hold no comments.
pub fn nll_future_until(
    params: &HawkesParams,
    tree: &TimedTree,
    t_learn: f64,
    t_end: f64,
) -> Result<f64, HawkesError> {
    if !(t_end > t_learn) {
        return Err(HawkesError::InvalidWindow {
            t_learn,
            last: t_end,
        });
    }
    let series = floored_comment_times(tree);
    nll_on(params, series.times(), t_learn, t_end)
}

fn nll_on(
    params: &HawkesParams,
    times: &[f64],
    t_learn: f64,
    t_end: f64,
) -> Result<f64, HawkesError> {
    let start = times.partition_point(|&t| t <= t_learn);
    let stop = times.partition_point(|&t| t <= t_end);
    let p = params;
    let mut ll = 0.0;
    let mut prior = 0;
    for i in start..stop {
        let t = times[i];
        while prior < i && times[prior] < t {
            prior += 1;
        }
        let excitation: f64 = times[..prior].iter().map(|&s| p.kernel.pdf(t - s)).sum();
        let lambda = p.root.intensity(t) + p.n_b * excitation;
        ll += lambda.max(f64::MIN_POSITIVE).ln();
    }
    ll -= future_compensator(p, &times[..stop], t_learn, t_end);
    Ok(-ll)
}

/// `int_{t_learn}^{t_end} lambda(t) dt` given the comment times.
pub fn future_compensator(params: &HawkesParams, times: &[f64], t_learn: f64, t_end: f64) -> f64 {
    let root = params.root.a * (params.root.survival(t_learn) - params.root.survival(t_end));
    let kernel: f64 = times
        .iter()
        .filter(|&&s| s < t_end)
        .map(|&s| {
            params
                .kernel
                .mass_between((t_learn - s).max(0.0), t_end - s)
        })
        .sum();
    root + params.n_b * kernel
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelSource {
    Fitted,
    Pooled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HawkesFit {
    pub params: HawkesParams,
    /// Degree-based branching number before clamping.
    pub n_b_raw: f64,
    pub root_loglik: f64,
    pub kernel_loglik: f64,
    pub converged: bool,
    pub kernel_source: KernelSource,
}

impl HawkesFit {
    pub fn loglik(&self) -> f64 {
        self.root_loglik + self.kernel_loglik
    }
}

/// Comment-kernel likelihood data of a tree observed until `t_obs`.
pub fn kernel_data(observed: &TimedTree, t_obs: f64, n_b: f64) -> KernelData {
    let delays: Vec<f64> = observed
        .response_times()
        .comment
        .iter()
        .map(|r| r.delay)
        .collect();
    KernelData::new(&delays, observed.comment_times(), t_obs, n_b)
}

/// Fits one lognormal kernel to the pooled comment replies of many trees,
/// each observed up to `t_learn`.
pub fn fit_pooled_kernel<'t, I>(
    trees: I,
    t_learn: f64,
) -> Result<kernels::Fitted<LognormKernel>, HawkesError>
where
    I: IntoIterator<Item = &'t TimedTree>,
{
    let mut data = KernelData::default();
    for tree in trees {
        let cut = tree.truncate(t_learn);
        let Ok(raw) = cut.branching_number() else {
            continue;
        };
        let delays: Vec<f64> = cut
            .response_times()
            .comment
            .iter()
            .map(|r| r.delay)
            .collect();
        data.extend(&delays, cut.comment_times(), t_learn, clamp_branching(raw));
    }
    Ok(fit_lognormal_kernel(&data)?)
}

/// Fits the model to the part of `tree` observed up to `t_learn`
/// (`f64::INFINITY` for the full tree). When the observed part has fewer
/// than two replies to comments, `pooled` supplies the kernel.
pub fn fit_hawkes(
    tree: &TimedTree,
    t_learn: f64,
    pooled: Option<&LognormKernel>,
) -> Result<HawkesFit, HawkesError> {
    let cut = tree.truncate(t_learn);
    let responses = cut.response_times();
    if responses.root.is_empty() {
        return Err(HawkesError::InsufficientData("no replies to the post"));
    }
    let root_times: Vec<f64> = responses.root.iter().map(|&t| floor_delay(t)).collect();
    let root_fit = fit_weibull_intensity(&root_times, t_learn)?;
    let n_b_raw = cut.branching_number()?;
    let n_b = clamp_branching(n_b_raw);
    let data = kernel_data(&cut, t_learn, n_b);
    let (kernel, kernel_loglik, kernel_converged, kernel_source) = if data.delays.len() >= 2 {
        let f = fit_lognormal_kernel(&data)?;
        (f.params, f.loglik, f.converged, KernelSource::Fitted)
    } else {
        let k = pooled.ok_or(HawkesError::InsufficientData(
            "fewer than two replies to comments and no pooled kernel",
        ))?;
        (
            *k,
            kernels::lognormal_loglik(k, &data),
            true,
            KernelSource::Pooled,
        )
    };
    Ok(HawkesFit {
        params: HawkesParams::new(root_fit.params, kernel, n_b)?,
        n_b_raw,
        root_loglik: root_fit.loglik,
        kernel_loglik,
        converged: root_fit.converged && kernel_converged,
        kernel_source,
    })
}
