use super::{floored_times, BaselineError};
use crate::kernels::{
    self, clamp_to, fitted_from, Fitted, KernelData, LognormKernel, MU_BOUNDS, SIGMA_BOUNDS,
};
use crate::optim::{self, Bounds, Options};
use crate::temporal::EventSeries;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

pub const TOTAL_BOUNDS: (f64, f64) = (1e-6, 1e9);

/// Inhomogeneous Poisson process with `lambda(t) = total * LogN-pdf(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpParams {
    pub total: f64,
    pub shape: LognormKernel,
}

impl DpParams {
    /// `total = 0` is allowed and gives a silent process.
    pub fn new(total: f64, mu: f64, sigma: f64) -> Result<Self, BaselineError> {
        if !(total >= 0.0 && total.is_finite()) {
            return Err(BaselineError::InvalidParams(format!("total={total}")));
        }
        Ok(Self {
            total,
            shape: LognormKernel::new(mu, sigma)?,
        })
    }

    pub fn intensity(&self, t: f64) -> f64 {
        self.total * self.shape.pdf(t)
    }

    /// Expected number of events after `t`.
    pub fn remaining(&self, t: f64) -> f64 {
        self.total * self.shape.sf(t)
    }
}

fn loglik_grad(p: &DpParams, times: &[f64], t_obs: f64) -> (f64, [f64; 3]) {
    let data = KernelData {
        delays: times.to_vec(),
        exposures: vec![(t_obs, p.total)],
    };
    let (ll, [dmu, dsigma]) = kernels::lognormal_loglik_grad(&p.shape, &data);
    let k = times.len() as f64;
    let frac = if t_obs.is_finite() {
        p.shape.cdf(t_obs)
    } else {
        1.0
    };
    (ll + k * p.total.ln(), [k / p.total - frac, dmu, dsigma])
}

/// Log-likelihood of the events in `[0, t_obs]` and its gradient in
/// `(total, mu, sigma)`.
pub fn dp_loglik_grad(params: &DpParams, series: &EventSeries, t_obs: f64) -> (f64, [f64; 3]) {
    let times: Vec<f64> = floored_times(series)
        .into_iter()
        .filter(|&t| t <= t_obs)
        .collect();
    loglik_grad(params, &times, t_obs)
}

/// Maximum-likelihood fit to the comment times observed in `[0, t_learn]`.
pub fn fit_dp(series: &EventSeries, t_learn: f64) -> Result<Fitted<DpParams>, BaselineError> {
    let times: Vec<f64> = floored_times(series)
        .into_iter()
        .filter(|&t| t <= t_learn)
        .collect();
    if times.len() < 2 {
        return Err(BaselineError::TooFewEvents {
            need: 2,
            got: times.len(),
        });
    }
    let k = times.len() as f64;
    let objective = |x: &[f64], g: &mut [f64]| {
        let p = DpParams {
            total: x[0].exp(),
            shape: LognormKernel {
                mu: x[1],
                sigma: x[2].exp(),
            },
        };
        let (ll, gr) = loglik_grad(&p, &times, t_learn);
        g[0] = -gr[0] * p.total / k;
        g[1] = -gr[1] / k;
        g[2] = -gr[2] * p.shape.sigma / k;
        -ll / k
    };
    let logs: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let m = logs.iter().sum::<f64>() / k;
    let s = (logs.iter().map(|l| (l - m) * (l - m)).sum::<f64>() / k)
        .sqrt()
        .max(0.05);
    let start = |mu: f64, sigma: f64| {
        let mu = clamp_to(mu, MU_BOUNDS);
        let sigma = clamp_to(sigma, SIGMA_BOUNDS);
        let shape = LognormKernel { mu, sigma };
        let frac = if t_learn.is_finite() {
            shape.cdf(t_learn)
        } else {
            1.0
        };
        let total = clamp_to(k / frac.max(1e-12), TOTAL_BOUNDS);
        vec![total.ln(), mu, sigma.ln()]
    };
    let starts = vec![
        start(m, s),
        start(m + s, s),
        start(m + 2.0 * s, 1.5 * s),
        start(m + 0.5 * s, 0.8 * s),
        start(m + 3.0 * s, 2.0 * s),
    ];
    let bounds = Bounds::new(&[
        (TOTAL_BOUNDS.0.ln(), TOTAL_BOUNDS.1.ln()),
        MU_BOUNDS,
        (SIGMA_BOUNDS.0.ln(), SIGMA_BOUNDS.1.ln()),
    ]);
    let ms = optim::minimize_multistart(objective, &starts, &bounds, &Options::default())?;
    let x = &ms.best.x;
    let params = DpParams {
        total: x[0].exp(),
        shape: LognormKernel {
            mu: x[1],
            sigma: x[2].exp(),
        },
    };
    Ok(fitted_from(&ms, k, params))
}

/// Negative log-likelihood of the events in `(t_learn, t_end]`.
pub fn dp_nll_future(
    params: &DpParams,
    series: &EventSeries,
    t_learn: f64,
    t_end: f64,
) -> Result<f64, BaselineError> {
    let times = floored_times(series);
    let future: Vec<f64> = times
        .into_iter()
        .filter(|&t| t > t_learn && t <= t_end)
        .collect();
    if future.is_empty() {
        return Err(BaselineError::NoFutureEvents);
    }
    let events: f64 = future
        .iter()
        .map(|&t| params.intensity(t).max(f64::MIN_POSITIVE).ln())
        .sum();
    let compensator = params.total * params.shape.mass_between(t_learn, t_end);
    Ok(compensator - events)
}

/// Event times after `t_learn` for one realisation, ascending.
pub fn dp_simulate_future<R: Rng + ?Sized>(
    params: &DpParams,
    t_learn: f64,
    rng: &mut R,
) -> Result<Vec<f64>, BaselineError> {
    let count = poisson_count(params.remaining(t_learn), rng)?;
    let mut out = params.shape.sample_n_after(t_learn, count, rng);
    out.sort_by(f64::total_cmp);
    Ok(out)
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<usize, BaselineError> {
    if mean > super::EVENT_CAP as f64 {
        return Err(BaselineError::SimulationBlowup(super::EVENT_CAP));
    }
    poisson_size(mean, rng)
}

/// Poisson draw without the event cap; only counts are produced.
fn poisson_size<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<usize, BaselineError> {
    if !(mean > 0.0) {
        return Ok(0);
    }
    let d = Poisson::new(mean).map_err(|e| BaselineError::InvalidParams(e.to_string()))?;
    Ok(d.sample(rng) as usize)
}

/// Mean final size over `runs` forecasts for a tree with `observed_size`
/// nodes (post included) at `t_learn`, and the per-run sizes.
pub fn dp_predict_size<R: Rng + ?Sized>(
    params: &DpParams,
    observed_size: usize,
    t_learn: f64,
    runs: usize,
    rng: &mut R,
) -> Result<(f64, Vec<usize>), BaselineError> {
    let mean = params.remaining(t_learn);
    let sizes = (0..runs)
        .map(|_| poisson_size(mean, rng).map(|c| observed_size + c))
        .collect::<Result<Vec<_>, _>>()?;
    let avg = sizes.iter().sum::<usize>() as f64 / runs.max(1) as f64;
    Ok((avg, sizes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn full_window_is_closed_form() {
        let series = EventSeries::new(vec![0.2, 0.5, 1.0, 1.5, 3.0, 7.0]);
        let f = fit_dp(&series, f64::INFINITY).unwrap();
        let logs: Vec<f64> = series.times().iter().map(|t| t.ln()).collect();
        let m = logs.iter().sum::<f64>() / 6.0;
        let s = (logs.iter().map(|l| (l - m).powi(2)).sum::<f64>() / 6.0).sqrt();
        assert!((f.params.total - 6.0).abs() < 1e-4);
        assert!((f.params.shape.mu - m).abs() < 1e-4);
        assert!((f.params.shape.sigma - s).abs() < 1e-4);
    }

    #[test]
    fn zero_total_is_silent() {
        let p = DpParams::new(0.0, 0.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert!(dp_simulate_future(&p, 1.0, &mut rng).unwrap().is_empty());
        }
        assert_eq!(dp_predict_size(&p, 7, 1.0, 5, &mut rng).unwrap().0, 7.0);
    }

    #[test]
    fn too_few_events() {
        assert!(matches!(
            fit_dp(&EventSeries::new(vec![1.0, 9.0]), 2.0),
            Err(BaselineError::TooFewEvents { need: 2, got: 1 })
        ));
    }
}
