//! Parametric kernels of the discussion model.
//!
//! The post attracts direct replies at rate
//! `mu(t) = a (alpha/b) (t/b)^(alpha-1) exp(-(t/b)^alpha)` (a Weibull density
//! scaled by the expected number of direct replies `a`), and every comment
//! triggers replies after a lognormal delay. Both kernels are fitted by
//! maximum likelihood with the box-constrained minimizer in [`crate::optim`].

use crate::optim::{self, Bounds, MultiStart, Options};
use crate::special::{norm_cdf, norm_isf, norm_pdf, norm_sf, LN_SQRT_2PI};
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Timestamps in dumps have one-second resolution; zero delays are floored
/// at half of it (in hours) before taking logarithms.
pub const MIN_DELAY_HOURS: f64 = 0.5 / 3600.0;

pub const A_BOUNDS: (f64, f64) = (1e-6, 1e6);
pub const B_BOUNDS: (f64, f64) = (1e-4, 1e4);
pub const ALPHA_BOUNDS: (f64, f64) = (0.05, 20.0);
pub const MU_BOUNDS: (f64, f64) = (-20.0, 20.0);
pub const SIGMA_BOUNDS: (f64, f64) = (1e-3, 20.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("invalid kernel parameters: {0}")]
    InvalidParams(String),
    #[error("too few events to fit: need {need}, got {got}")]
    TooFewEvents { need: usize, got: usize },
    #[error("optimizer failed: {0}")]
    OptimizerFailure(#[from] optim::OptimError),
}

/// Floors a reply delay at [`MIN_DELAY_HOURS`].
pub fn floor_delay(d: f64) -> f64 {
    d.max(MIN_DELAY_HOURS)
}

/// Scaled Weibull intensity of replies to the post.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullIntensity {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
}

impl WeibullIntensity {
    pub fn new(a: f64, b: f64, alpha: f64) -> Result<Self, KernelError> {
        if !(a > 0.0 && b > 0.0 && alpha > 0.0)
            || !(a.is_finite() && b.is_finite() && alpha.is_finite())
        {
            return Err(KernelError::InvalidParams(format!(
                "Weibull needs a, b, alpha > 0 (got {a}, {b}, {alpha})"
            )));
        }
        Ok(Self { a, b, alpha })
    }

    /// `(t/b)^alpha`, the cumulative hazard of the unit Weibull law.
    fn hazard(&self, t: f64) -> f64 {
        (t / self.b).powf(self.alpha)
    }

    pub fn intensity(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let z = t / self.b;
        self.a * (self.alpha / self.b) * z.powf(self.alpha - 1.0) * (-z.powf(self.alpha)).exp()
    }

    pub fn ln_intensity(&self, t: f64) -> f64 {
        let lz = (t / self.b).ln();
        self.a.ln() + self.alpha.ln() - self.b.ln() + (self.alpha - 1.0) * lz
            - (self.alpha * lz).exp()
    }

    /// Expected number of direct replies in `[0, t]`.
    pub fn mass(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        -self.a * (-self.hazard(t)).exp_m1()
    }

    /// Fraction of the post's reply mass still to come after `t`.
    pub fn survival(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        (-self.hazard(t)).exp()
    }

    /// Weibull CDF of a single reply time.
    pub fn cdf(&self, t: f64) -> f64 {
        1.0 - self.survival(t)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let e: f64 = rng.sample(Exp1);
        self.b * e.powf(1.0 / self.alpha)
    }

    /// A reply time conditioned to exceed `lower` (exact inversion).
    pub fn sample_after<R: Rng + ?Sized>(&self, lower: f64, rng: &mut R) -> f64 {
        if lower <= 0.0 {
            return self.sample(rng);
        }
        let e: f64 = rng.sample(Exp1);
        self.b * (self.hazard(lower) + e).powf(1.0 / self.alpha)
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<f64> {
        (0..count).map(|_| self.sample(rng)).collect()
    }
}

/// Lognormal delay density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LognormKernel {
    pub mu: f64,
    pub sigma: f64,
}

impl LognormKernel {
    pub fn new(mu: f64, sigma: f64) -> Result<Self, KernelError> {
        if !(sigma > 0.0) || !mu.is_finite() || !sigma.is_finite() {
            return Err(KernelError::InvalidParams(format!(
                "lognormal needs finite mu and sigma > 0 (got {mu}, {sigma})"
            )));
        }
        Ok(Self { mu, sigma })
    }

    fn z(&self, t: f64) -> f64 {
        (t.ln() - self.mu) / self.sigma
    }

    pub fn pdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        norm_pdf(self.z(t)) / (t * self.sigma)
    }

    pub fn ln_pdf(&self, t: f64) -> f64 {
        let z = self.z(t);
        -0.5 * z * z - LN_SQRT_2PI - self.sigma.ln() - t.ln()
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        norm_cdf(self.z(t))
    }

    pub fn sf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        norm_sf(self.z(t))
    }

    /// `F(t1) - F(t0)`, evaluated on whichever tail keeps precision.
    pub fn mass_between(&self, t0: f64, t1: f64) -> f64 {
        if t1 <= t0 {
            return 0.0;
        }
        if t0 > 0.0 && t0.ln() > self.mu {
            self.sf(t0) - self.sf(t1)
        } else {
            self.cdf(t1) - self.cdf(t0)
        }
    }

    /// The `t` with `P(T > t) = p`.
    pub fn inverse_sf(&self, p: f64) -> f64 {
        (self.mu + self.sigma * norm_isf(p)).exp()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        (self.mu + self.sigma * z).exp()
    }

    /// A delay conditioned to exceed `lower`, by inversion of the survival
    /// function so the far tail stays accurate.
    pub fn sample_after<R: Rng + ?Sized>(&self, lower: f64, rng: &mut R) -> f64 {
        if lower <= 0.0 {
            return self.sample(rng);
        }
        let tail = self.sf(lower);
        if tail <= 0.0 {
            return lower;
        }
        let u: f64 = 1.0 - rng.random::<f64>();
        self.inverse_sf(tail * u).max(lower)
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<f64> {
        (0..count).map(|_| self.sample(rng)).collect()
    }

    pub fn sample_n_after<R: Rng + ?Sized>(
        &self,
        lower: f64,
        count: usize,
        rng: &mut R,
    ) -> Vec<f64> {
        (0..count).map(|_| self.sample_after(lower, rng)).collect()
    }
}

/// Outcome of a multi-start maximum-likelihood fit.
#[derive(Debug, Clone, PartialEq)]
pub struct Fitted<P> {
    pub params: P,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Log-likelihood at each starting point.
    pub start_logliks: Vec<f64>,
}

pub(crate) fn fitted_from<P>(ms: &MultiStart, scale: f64, params: P) -> Fitted<P> {
    Fitted {
        params,
        loglik: -ms.best.value * scale,
        converged: ms.best.converged(),
        iterations: ms.best.iterations,
        start_logliks: ms.start_values.iter().map(|v| -v * scale).collect(),
    }
}

/// Root-reply log-likelihood of the post's intensity on `[0, t_obs]`
/// (`t_obs` may be infinite) and its gradient in `(a, b, alpha)`.
pub fn weibull_loglik_grad(
    params: &WeibullIntensity,
    times: &[f64],
    t_obs: f64,
) -> (f64, [f64; 3]) {
    let WeibullIntensity { a, b, alpha } = *params;
    let k = times.len() as f64;
    let (mass_frac, tail_term) = if t_obs.is_finite() {
        let u = (t_obs / b).powf(alpha);
        // u e^{-u}, with the log factor carried separately
        let s = (-u).exp();
        (-(-u).exp_m1(), (u * s, (t_obs / b).ln()))
    } else {
        (1.0, (0.0, 0.0))
    };
    let (ues, ln_tb) = tail_term;
    let mut sum_ln = 0.0;
    let mut sum_u = 0.0;
    let mut sum_u_ln = 0.0;
    for &t in times {
        let l = (t / b).ln();
        let u = (alpha * l).exp();
        sum_ln += l;
        sum_u += u;
        sum_u_ln += u * l;
    }
    let ll = -a * mass_frac + k * (a.ln() + alpha.ln() - b.ln()) + (alpha - 1.0) * sum_ln - sum_u;
    let da = -mass_frac + k / a;
    let db = a * alpha * ues / b - k * alpha / b + alpha * sum_u / b;
    let dalpha = k / alpha + sum_ln - sum_u_ln - if ues > 0.0 { a * ues * ln_tb } else { 0.0 };
    (ll, [da, db, dalpha])
}

pub fn weibull_loglik(params: &WeibullIntensity, times: &[f64], t_obs: f64) -> f64 {
    weibull_loglik_grad(params, times, t_obs).0
}

pub(crate) fn bounds_ln(b: (f64, f64)) -> (f64, f64) {
    (b.0.ln(), b.1.ln())
}

pub(crate) fn clamp_to(v: f64, b: (f64, f64)) -> f64 {
    v.clamp(b.0, b.1)
}

/// Fits the post's reply intensity to the direct-reply times observed in
/// `[0, t_obs]`. Times are in hours and must be positive.
pub fn fit_weibull_intensity(
    root_times: &[f64],
    t_obs: f64,
) -> Result<Fitted<WeibullIntensity>, KernelError> {
    fit_weibull_impl(root_times, t_obs, ALPHA_BOUNDS)
}

/// Same as [`fit_weibull_intensity`] with the shape pinned to `alpha`.
pub fn fit_weibull_intensity_with_shape(
    root_times: &[f64],
    t_obs: f64,
    alpha: f64,
) -> Result<Fitted<WeibullIntensity>, KernelError> {
    fit_weibull_impl(root_times, t_obs, (alpha, alpha))
}

fn fit_weibull_impl(
    root_times: &[f64],
    t_obs: f64,
    alpha_bounds: (f64, f64),
) -> Result<Fitted<WeibullIntensity>, KernelError> {
    let times: Vec<f64> = root_times.iter().map(|&t| floor_delay(t)).collect();
    if times.is_empty() {
        return Err(KernelError::TooFewEvents { need: 1, got: 0 });
    }
    let k = times.len() as f64;
    // optimize over (ln a, ln b, alpha), per-event negative log-likelihood
    let objective = |x: &[f64], g: &mut [f64]| {
        let p = WeibullIntensity {
            a: x[0].exp(),
            b: x[1].exp(),
            alpha: x[2],
        };
        let (ll, gr) = weibull_loglik_grad(&p, &times, t_obs);
        g[0] = -gr[0] * p.a / k;
        g[1] = -gr[1] * p.b / k;
        g[2] = -gr[2] / k;
        -ll / k
    };
    let bounds = Bounds::new(&[bounds_ln(A_BOUNDS), bounds_ln(B_BOUNDS), alpha_bounds]);
    let mean = times.iter().sum::<f64>() / k;
    let b0 = clamp_to(mean, B_BOUNDS);
    let start = |b: f64, alpha: f64| {
        let b = clamp_to(b, B_BOUNDS);
        let alpha = clamp_to(alpha, alpha_bounds);
        let p = WeibullIntensity { a: 1.0, b, alpha };
        let frac = if t_obs.is_finite() {
            p.mass(t_obs)
        } else {
            1.0
        };
        let a = clamp_to(k / frac.max(1e-300), A_BOUNDS);
        vec![a.ln(), b.ln(), alpha]
    };
    let starts = vec![
        start(b0, 1.0),
        start(b0, 0.6),
        start(b0, 1.6),
        start(0.5 * b0, 1.0),
        start(2.0 * b0, 1.0),
    ];
    let ms = optim::minimize_multistart(objective, &starts, &bounds, &Options::default())?;
    let x = &ms.best.x;
    let params = WeibullIntensity {
        a: x[0].exp(),
        b: x[1].exp(),
        alpha: x[2],
    };
    Ok(fitted_from(&ms, k, params))
}

/// Data for the comment-kernel likelihood: observed reply delays and the
/// exposure of every potential parent comment.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KernelData {
    /// Delays of replies to comments (already floored).
    pub delays: Vec<f64>,
    /// `(remaining observation time, branching weight)` per comment that
    /// could have received replies. Remaining time may be infinite.
    pub exposures: Vec<(f64, f64)>,
}

impl KernelData {
    /// Builds the data of one tree observed up to `t_obs`: `delays` are
    /// reply delays to comments, `comment_times` the creation time of every
    /// comment, each exposed until `t_obs` with weight `n_b`.
    pub fn new(delays: &[f64], comment_times: &[f64], t_obs: f64, n_b: f64) -> Self {
        let mut d = Self::default();
        d.extend(delays, comment_times, t_obs, n_b);
        d
    }

    pub fn extend(&mut self, delays: &[f64], comment_times: &[f64], t_obs: f64, n_b: f64) {
        self.delays.extend(delays.iter().map(|&x| floor_delay(x)));
        self.exposures
            .extend(comment_times.iter().map(|&t| ((t_obs - t).max(0.0), n_b)));
    }
}

/// Comment-kernel log-likelihood
/// `sum log phi(delay) - sum_j w_j F(remaining_j)` and its gradient in
/// `(mu, sigma)`. The constant `log n_b` event terms are omitted.
pub fn lognormal_loglik_grad(kernel: &LognormKernel, data: &KernelData) -> (f64, [f64; 2]) {
    let LognormKernel { mu, sigma } = *kernel;
    let k = data.delays.len() as f64;
    let mut ll = 0.0;
    let mut dmu = 0.0;
    let mut dsigma = 0.0;
    for &d in &data.delays {
        let l = d.ln();
        let z = (l - mu) / sigma;
        ll += -0.5 * z * z - l;
        dmu += z / sigma;
        dsigma += z * z / sigma;
    }
    ll -= k * (sigma.ln() + LN_SQRT_2PI);
    dsigma -= k / sigma;
    for &(rem, w) in &data.exposures {
        if w == 0.0 || rem <= 0.0 {
            continue;
        }
        if rem.is_infinite() {
            ll -= w;
            continue;
        }
        let z = (rem.ln() - mu) / sigma;
        let phi = norm_pdf(z);
        ll -= w * norm_cdf(z);
        dmu += w * phi / sigma;
        dsigma += w * phi * z / sigma;
    }
    (ll, [dmu, dsigma])
}

pub fn lognormal_loglik(kernel: &LognormKernel, data: &KernelData) -> f64 {
    lognormal_loglik_grad(kernel, data).0
}

/// Fits the lognormal comment kernel with the branching weights held fixed.
pub fn fit_lognormal_kernel(data: &KernelData) -> Result<Fitted<LognormKernel>, KernelError> {
    let k = data.delays.len();
    if k < 2 {
        return Err(KernelError::TooFewEvents { need: 2, got: k });
    }
    let kf = k as f64;
    let logs: Vec<f64> = data.delays.iter().map(|d| d.ln()).collect();
    let m = logs.iter().sum::<f64>() / kf;
    let s = (logs.iter().map(|l| (l - m) * (l - m)).sum::<f64>() / kf)
        .sqrt()
        .max(0.05);
    let objective = |x: &[f64], g: &mut [f64]| {
        let kern = LognormKernel {
            mu: x[0],
            sigma: x[1].exp(),
        };
        let (ll, gr) = lognormal_loglik_grad(&kern, data);
        g[0] = -gr[0] / kf;
        g[1] = -gr[1] * kern.sigma / kf;
        -ll / kf
    };
    let bounds = Bounds::new(&[MU_BOUNDS, bounds_ln(SIGMA_BOUNDS)]);
    let start =
        |mu: f64, sigma: f64| vec![clamp_to(mu, MU_BOUNDS), clamp_to(sigma, SIGMA_BOUNDS).ln()];
    let starts = vec![
        start(m, s),
        start(m + 0.5 * s, s),
        start(m + s, 1.5 * s),
        start(m - 0.5 * s, s),
        start(m, 0.7 * s),
    ];
    let ms = optim::minimize_multistart(objective, &starts, &bounds, &Options::default())?;
    let params = LognormKernel {
        mu: ms.best.x[0],
        sigma: ms.best.x[1].exp(),
    };
    Ok(fitted_from(&ms, kf, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::E;
    use threadcast_testkit as tk;

    #[test]
    fn weibull_examples() {
        let w = WeibullIntensity::new(3.0, 2.0, 1.0).unwrap();
        for &t in &[0.1, 1.0, 4.0] {
            assert!((w.intensity(t) - 1.5 * (-t / 2.0f64).exp()).abs() < 1e-15);
            assert!((w.mass(t) - 3.0 * (1.0 - (-t / 2.0f64).exp())).abs() < 1e-14);
        }
        assert_eq!(w.mass(0.0), 0.0);
        assert!((w.mass(1e6) - 3.0).abs() < 1e-15);
        let w = WeibullIntensity::new(1.0, 2.0, 2.0).unwrap();
        assert!((w.intensity(2.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((w.ln_intensity(2.0) + 1.0).abs() < 1e-15);
        assert!(WeibullIntensity::new(0.0, 1.0, 1.0).is_err());
        assert!(WeibullIntensity::new(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn lognormal_examples() {
        let k = LognormKernel::new(0.7, 1.3).unwrap();
        assert!((k.cdf(0.7f64.exp()) - 0.5).abs() < 1e-15);
        let k = LognormKernel::new(0.0, 1.0).unwrap();
        assert!((k.pdf(1.0) - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!((k.ln_pdf(1.0) - k.pdf(1.0).ln()).abs() < 1e-14);
        assert_eq!(k.cdf(0.0), 0.0);
        assert!(LognormKernel::new(0.0, 0.0).is_err());
    }

    #[test]
    fn cdfs_match_quadrature() {
        let k = LognormKernel::new(-0.3, 0.9).unwrap();
        let q = tk::integrate(|t| k.pdf(t), 0.0, 50.0, 1e-13);
        assert!((q - k.cdf(50.0)).abs() < 1e-8);
        let w = WeibullIntensity::new(2.5, 1.7, 0.6).unwrap();
        let q = tk::integrate(|t| w.intensity(t), 0.0, 9.0, 1e-12);
        assert!((q - w.mass(9.0)).abs() < 1e-8);
    }

    #[test]
    fn samplers_match_their_laws() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(WeibullIntensity::new(1.0, 2.0, 1.0)
            .unwrap()
            .sample_n(0, &mut rng)
            .is_empty());
        let w = WeibullIntensity::new(1.0, 2.0, 1.0).unwrap();
        let xs = w.sample_n(100_000, &mut rng);
        let (m, se) = (tk::mean(&xs), tk::std_error(&xs));
        assert!((m - 2.0).abs() < 3.0 * se, "mean {m}");
        let w = WeibullIntensity::new(1.0, 1.5, 0.7).unwrap();
        assert!(tk::ks_statistic(&w.sample_n(100_000, &mut rng), |t| w.cdf(t)) < 0.01);

        let k = LognormKernel::new(-1.0, 1.2).unwrap();
        assert!(tk::ks_statistic(&k.sample_n(100_000, &mut rng), |t| k.cdf(t)) < 0.01);
        let lower = 2.0;
        let tail = k.sample_n_after(lower, 100_000, &mut rng);
        assert!(tail.iter().all(|&t| t > lower));
        let cond = |t: f64| (k.cdf(t) - k.cdf(lower)) / k.sf(lower);
        assert!(tk::ks_statistic(&tail, cond) < 0.01);

        let lower = 3.0;
        let tail: Vec<f64> = (0..100_000)
            .map(|_| w.sample_after(lower, &mut rng))
            .collect();
        let cond = |t: f64| (w.cdf(t) - w.cdf(lower)) / w.survival(lower);
        assert!(tk::ks_statistic(&tail, cond) < 0.01);
    }

    #[test]
    fn lognormal_closed_form_when_fully_observed() {
        let comments = [0.0, 1.0, 2.0];
        let data = KernelData::new(&[1.0 / E, 1.0, E], &comments, f64::INFINITY, 0.4);
        let fit = fit_lognormal_kernel(&data).unwrap();
        assert!(fit.params.mu.abs() < 1e-6, "{:?}", fit.params);
        assert!((fit.params.sigma.powi(2) - 2.0 / 3.0).abs() < 1e-6);
        assert!(fit.converged);
    }

    #[test]
    fn lognormal_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let truth = LognormKernel::new(-1.0, 1.2).unwrap();
        let delays = truth.sample_n(10_000, &mut rng);
        let data = KernelData::new(&delays, &[], f64::INFINITY, 0.0);
        let fit = fit_lognormal_kernel(&data).unwrap();
        assert!((fit.params.mu + 1.0).abs() < 0.05);
        assert!((fit.params.sigma - 1.2).abs() < 0.05);
    }

    #[test]
    fn too_few_events() {
        assert_eq!(
            fit_weibull_intensity(&[], 4.0),
            Err(KernelError::TooFewEvents { need: 1, got: 0 })
        );
        let data = KernelData::new(&[0.5], &[1.0], 4.0, 0.5);
        assert!(matches!(
            fit_lognormal_kernel(&data),
            Err(KernelError::TooFewEvents { .. })
        ));
    }

    #[test]
    fn single_event_with_unit_shape_matches_grid_search() {
        let t_obs = 3.0;
        let times = [t_obs];
        let fit = fit_weibull_intensity_with_shape(&times, t_obs, 1.0).unwrap();
        let p = fit.params;
        assert_eq!(p.alpha, 1.0);
        // stationarity in a: a (1 - e^{-T/b}) = k
        assert!((p.mass(t_obs) - 1.0).abs() < 1e-4, "{p:?}");
        let profile = |b: f64| {
            let frac = 1.0 - (-t_obs / b).exp();
            weibull_loglik(
                &WeibullIntensity {
                    a: 1.0 / frac,
                    b,
                    alpha: 1.0,
                },
                &times,
                t_obs,
            )
        };
        let (mut best, mut arg) = (f64::NEG_INFINITY, 0.0);
        let mut b = B_BOUNDS.0;
        while b <= B_BOUNDS.1 {
            if profile(b) > best {
                best = profile(b);
                arg = b;
            }
            b *= 1.0001;
        }
        best = best.max(profile(B_BOUNDS.1));
        assert!(
            (fit.loglik - best).abs() < 1e-4,
            "fit {} grid {} at b={arg}",
            fit.loglik,
            best
        );
    }

    #[test]
    fn fitted_loglik_dominates_starts() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = WeibullIntensity::new(30.0, 2.0, 0.9).unwrap();
        let times: Vec<f64> = w
            .sample_n(30, &mut rng)
            .into_iter()
            .filter(|&t| t <= 4.0)
            .collect();
        let fit = fit_weibull_intensity(&times, 4.0).unwrap();
        assert!(fit.start_logliks.iter().all(|&s| fit.loglik >= s));
        let direct = weibull_loglik(&fit.params, &times, 4.0);
        assert!((direct - fit.loglik).abs() < 1e-9 * direct.abs().max(1.0));
    }
}
