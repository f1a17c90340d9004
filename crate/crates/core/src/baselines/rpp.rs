use super::{floored_times, BaselineError, EVENT_CAP};
use crate::kernels::{clamp_to, fitted_from, Fitted, LognormKernel, MU_BOUNDS, SIGMA_BOUNDS};
use crate::optim::{self, Bounds, Options};
use crate::special::{norm_cdf, norm_pdf, norm_sf, LN_SQRT_2PI};
use crate::temporal::EventSeries;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use serde::{Deserialize, Serialize};

pub const C_BOUNDS: (f64, f64) = (1e-6, 1e6);
pub const D_BOUNDS: (f64, f64) = (1e-3, 20.0);

/// Reinforced Poisson process `lambda(t, k) = c f(t) r(k)` with lognormal
/// `f` and `r(k) = sum_{i=1..k} exp(-d i)`. The count `k` starts at 1 for
/// the post.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RppParams {
    pub c: f64,
    pub shape: LognormKernel,
    pub d: f64,
}

impl RppParams {
    pub fn new(c: f64, mu: f64, sigma: f64, d: f64) -> Result<Self, BaselineError> {
        if !(c > 0.0 && c.is_finite() && d > 0.0 && d.is_finite()) {
            return Err(BaselineError::InvalidParams(format!("c={c}, d={d}")));
        }
        Ok(Self {
            c,
            shape: LognormKernel::new(mu, sigma)?,
            d,
        })
    }
}

/// `r(k) = sum_{i=1..k} e^{-d i}`.
pub fn reinforcement(k: usize, d: f64) -> f64 {
    -(-d * k as f64).exp_m1() / d.exp_m1()
}

pub fn rpp_intensity(t: f64, k: usize, params: &RppParams) -> f64 {
    params.c * params.shape.pdf(t) * reinforcement(k, params.d)
}

/// Running `r(k)` and `s(k) = sum_{i<=k} i q^i` with `q = e^{-d}`,
/// accumulated term by term so small `d` keeps full precision.
struct Reinforcement {
    q: f64,
    qk: f64,
    k: usize,
    r: f64,
    s: f64,
}

impl Reinforcement {
    fn new(d: f64) -> Self {
        Self {
            q: (-d).exp(),
            qk: 1.0,
            k: 0,
            r: 0.0,
            s: 0.0,
        }
    }

    fn advance_to(&mut self, target: usize) {
        while self.k < target {
            self.k += 1;
            self.qk *= self.q;
            self.r += self.qk;
            self.s += self.k as f64 * self.qk;
        }
    }
}

/// `F`, `1 - F` and the partials of `F` in `(mu, ln sigma)` at one time
/// point, with a single `erfc` evaluation on the accurate tail.
#[derive(Clone, Copy)]
struct CdfPoint {
    f: f64,
    s: f64,
    upper: bool,
    dmu: f64,
    dlnsig: f64,
}

impl CdfPoint {
    fn at(shape: &LognormKernel, t: f64) -> Self {
        if t <= 0.0 {
            return Self {
                f: 0.0,
                s: 1.0,
                upper: false,
                dmu: 0.0,
                dlnsig: 0.0,
            };
        }
        if t.is_infinite() {
            return Self {
                f: 1.0,
                s: 0.0,
                upper: true,
                dmu: 0.0,
                dlnsig: 0.0,
            };
        }
        let z = (t.ln() - shape.mu) / shape.sigma;
        let phi = norm_pdf(z);
        let (f, s) = if z > 0.0 {
            let s = norm_sf(z);
            (1.0 - s, s)
        } else {
            let f = norm_cdf(z);
            (f, 1.0 - f)
        };
        Self {
            f,
            s,
            upper: z > 0.0,
            dmu: -phi / shape.sigma,
            dlnsig: -phi * z,
        }
    }

    /// `F(b) - F(a)` for `a = self`.
    fn mass_to(&self, b: &CdfPoint) -> f64 {
        if self.upper {
            self.s - b.s
        } else {
            b.f - self.f
        }
    }
}

/// The likelihood with `c` factored out:
/// `ll(c) = n ln c + events - c * comp`.
struct Parts {
    n: f64,
    events: f64,
    /// Gradient of `events` in `(mu, ln sigma, ln d)`.
    events_grad: [f64; 3],
    /// `sum_pieces r(k) dF`.
    comp: f64,
    comp_grad: [f64; 3],
}

impl Parts {
    fn loglik(&self, c: f64) -> f64 {
        self.n * c.ln() + self.events - c * self.comp
    }

    /// Gradient in `(ln c, mu, ln sigma, ln d)`.
    fn grad(&self, c: f64) -> [f64; 4] {
        [
            self.n - c * self.comp,
            self.events_grad[0] - c * self.comp_grad[0],
            self.events_grad[1] - c * self.comp_grad[1],
            self.events_grad[2] - c * self.comp_grad[2],
        ]
    }

    /// Maximizer of `ll(c)` within the bounds.
    fn best_c(&self) -> f64 {
        clamp_to(self.n / self.comp.max(1e-300), C_BOUNDS)
    }
}

/// Likelihood parts of the sorted `times` on `[t0, t1]` given `k0` prior
/// events (post included).
fn parts(shape: &LognormKernel, d: f64, times: &[f64], k0: usize, t0: f64, t1: f64) -> Parts {
    let LognormKernel { mu, sigma } = *shape;
    let mut acc = Reinforcement::new(d);
    acc.advance_to(k0);
    let mut out = Parts {
        n: times.len() as f64,
        events: 0.0,
        events_grad: [0.0; 3],
        comp: 0.0,
        comp_grad: [0.0; 3],
    };
    let piece = |from: &CdfPoint, to: &CdfPoint, r: f64, s: f64, out: &mut Parts| {
        let mass = from.mass_to(to);
        if mass <= 0.0 {
            return;
        }
        out.comp += r * mass;
        out.comp_grad[0] += r * (to.dmu - from.dmu);
        out.comp_grad[1] += r * (to.dlnsig - from.dlnsig);
        // dr/d(ln d) = -d s
        out.comp_grad[2] -= d * s * mass;
    };
    let ln_norm = sigma.ln() + LN_SQRT_2PI;
    let mut prev = CdfPoint::at(shape, t0);
    for &t in times {
        let here = CdfPoint::at(shape, t);
        piece(&prev, &here, acc.r, acc.s, &mut out);
        let l = t.ln();
        let z = (l - mu) / sigma;
        out.events += -0.5 * z * z - l - ln_norm + acc.r.ln();
        out.events_grad[0] += z / sigma;
        out.events_grad[1] += z * z - 1.0;
        out.events_grad[2] -= d * acc.s / acc.r;
        acc.advance_to(acc.k + 1);
        prev = here;
    }
    let end = CdfPoint::at(shape, t1);
    piece(&prev, &end, acc.r, acc.s, &mut out);
    out
}

/// Log-likelihood of the events in `[0, t_obs]` and its gradient in
/// `(ln c, mu, ln sigma, ln d)`.
pub fn rpp_loglik_grad(params: &RppParams, series: &EventSeries, t_obs: f64) -> (f64, [f64; 4]) {
    let times: Vec<f64> = floored_times(series)
        .into_iter()
        .filter(|&t| t <= t_obs)
        .collect();
    let p = parts(&params.shape, params.d, &times, 1, 0.0, t_obs);
    (p.loglik(params.c), p.grad(params.c))
}

/// Maximum-likelihood fit to the comment times observed in `[0, t_learn]`.
/// The scale `c` has a closed-form maximizer for the other parameters, so
/// the search runs over `(mu, ln sigma, ln d)` only.
pub fn fit_rpp(series: &EventSeries, t_learn: f64) -> Result<Fitted<RppParams>, BaselineError> {
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
    let shape_of = |x: &[f64]| LognormKernel {
        mu: x[0],
        sigma: x[1].exp(),
    };
    let objective = |x: &[f64], g: &mut [f64]| {
        let p = parts(&shape_of(x), x[2].exp(), &times, 1, 0.0, t_learn);
        let c = p.best_c();
        // c is either interior (zero partial) or pinned, so the partials in
        // the remaining coordinates are the profile gradient
        let gr = p.grad(c);
        for i in 0..3 {
            g[i] = -gr[i + 1] / k;
        }
        -p.loglik(c) / k
    };
    let logs: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let m = logs.iter().sum::<f64>() / k;
    let sd = (logs.iter().map(|l| (l - m) * (l - m)).sum::<f64>() / k)
        .sqrt()
        .max(0.05);
    let start = |mu: f64, sigma: f64, d: f64| {
        vec![
            clamp_to(mu, MU_BOUNDS),
            clamp_to(sigma, SIGMA_BOUNDS).ln(),
            clamp_to(d, D_BOUNDS).ln(),
        ]
    };
    let starts = vec![
        start(m, sd, 0.1),
        start(m + sd, 1.5 * sd, 0.01),
        start(m, sd, 1.0),
        start(m + 2.0 * sd, 2.0 * sd, 0.05),
        start(m + 0.5 * sd, sd, 0.3),
    ];
    let bounds = Bounds::new(&[
        MU_BOUNDS,
        (SIGMA_BOUNDS.0.ln(), SIGMA_BOUNDS.1.ln()),
        (D_BOUNDS.0.ln(), D_BOUNDS.1.ln()),
    ]);
    let ms = optim::minimize_multistart(objective, &starts, &bounds, &Options::default())?;
    let x = &ms.best.x;
    let shape = shape_of(x);
    let d = x[2].exp();
    let c = parts(&shape, d, &times, 1, 0.0, t_learn).best_c();
    Ok(fitted_from(&ms, k, RppParams { c, shape, d }))
}

/// Negative log-likelihood of the events in `(t_learn, t_end]`, the count
/// carried over from the observed window.
pub fn rpp_nll_future(
    params: &RppParams,
    series: &EventSeries,
    t_learn: f64,
    t_end: f64,
) -> Result<f64, BaselineError> {
    let times = floored_times(series);
    let observed = times.iter().filter(|&&t| t <= t_learn).count();
    let future: Vec<f64> = times
        .into_iter()
        .filter(|&t| t > t_learn && t <= t_end)
        .collect();
    if future.is_empty() {
        return Err(BaselineError::NoFutureEvents);
    }
    let p = parts(
        &params.shape,
        params.d,
        &future,
        observed + 1,
        t_learn,
        t_end,
    );
    Ok(-p.loglik(params.c))
}

/// Number of events after `t_learn` in one forecast, given `observed`
/// comments so far.
///
/// Time is measured in units of `F`, in which the process is a pure birth
/// process with rate `c r(k)` on the remaining mass `1 - F(t_learn)`. Once
/// `r(k)` has saturated the remainder is a single Poisson draw.
fn sample_new_events<R: Rng + ?Sized>(
    params: &RppParams,
    observed: usize,
    t_learn: f64,
    rng: &mut R,
) -> Result<usize, BaselineError> {
    let mut left = params.shape.sf(t_learn);
    let r_inf = 1.0 / params.d.exp_m1();
    let mut k = observed + 1;
    let mut new = 0usize;
    loop {
        let r = reinforcement(k, params.d);
        if r_inf - r <= 1e-15 * r_inf {
            let mean = params.c * r_inf * left;
            if mean > 0.0 {
                let p =
                    Poisson::new(mean).map_err(|e| BaselineError::InvalidParams(e.to_string()))?;
                new += p.sample(rng) as usize;
            }
            return Ok(new);
        }
        let e: f64 = rng.sample(Exp1);
        left -= e / (params.c * r);
        if left <= 0.0 {
            return Ok(new);
        }
        new += 1;
        k += 1;
        if new > EVENT_CAP {
            return Err(BaselineError::SimulationBlowup(EVENT_CAP));
        }
    }
}

/// Mean final size over `runs` forecasts for a tree with `observed_size`
/// nodes (post included) at `t_learn`, and the per-run sizes.
pub fn rpp_predict_size<R: Rng + ?Sized>(
    params: &RppParams,
    observed_size: usize,
    t_learn: f64,
    runs: usize,
    rng: &mut R,
) -> Result<(f64, Vec<usize>), BaselineError> {
    let comments = observed_size.saturating_sub(1);
    let sizes = (0..runs)
        .map(|_| sample_new_events(params, comments, t_learn, rng).map(|n| observed_size + n))
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
    fn reinforcement_examples() {
        assert!((reinforcement(2, 2f64.ln()) - 0.75).abs() < 1e-15);
        assert_eq!(reinforcement(0, 1.0), 0.0);
        assert!(reinforcement(50, 40.0) < 1e-17);
        let d = 0.37;
        let direct: f64 = (1..=9).map(|i| (-d * i as f64).exp()).sum();
        assert!((reinforcement(9, d) - direct).abs() < 1e-15);
    }

    #[test]
    fn fit_and_forecast_run() {
        let series = EventSeries::new(vec![0.1, 0.2, 0.25, 0.6, 0.9, 1.4, 2.0, 2.2, 3.5, 5.0, 8.0]);
        let f = fit_rpp(&series, 4.0).unwrap();
        assert!(
            f.loglik
                >= f.start_logliks
                    .iter()
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max)
                    - 1e-9
        );
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (mean, sizes) = rpp_predict_size(&f.params, 10, 4.0, 50, &mut rng).unwrap();
        assert_eq!(sizes.len(), 50);
        assert!(mean >= 10.0);
        assert!(rpp_nll_future(&f.params, &series, 4.0, 8.0)
            .unwrap()
            .is_finite());
    }

    #[test]
    fn silent_after_strong_decay() {
        let p = RppParams::new(1.0, 0.0, 1.0, 20.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (mean, _) = rpp_predict_size(&p, 1, 0.0, 200, &mut rng).unwrap();
        assert!(mean < 1.01);
    }
}
