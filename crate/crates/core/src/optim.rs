//! Box-constrained limited-memory quasi-Newton minimization.
//!
//! A projected L-BFGS scheme in the spirit of L-BFGS-B: variables sitting on
//! a bound with the gradient pushing outward are frozen for the iteration,
//! the two-loop recursion runs over the remaining free variables, and a
//! projected backtracking line search with a sufficient-decrease test keeps
//! every accepted iterate feasible and strictly improving.

use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error("objective or gradient is not finite at the starting point")]
    NonFiniteStart,
    #[error("no starting point produced a finite objective")]
    NoFiniteStart,
    #[error("dimension mismatch: start has {start}, bounds have {bounds}")]
    Dimension { start: usize, bounds: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(pairs: &[(f64, f64)]) -> Self {
        Self {
            lower: pairs.iter().map(|p| p.0).collect(),
            upper: pairs.iter().map(|p| p.1).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn project(&self, x: &mut [f64]) {
        for ((v, &lo), &hi) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(lo, hi);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .all(|((&v, &lo), &hi)| v >= lo && v <= hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Options {
    /// Number of correction pairs kept.
    pub memory: usize,
    /// Stop when the projected gradient's infinity norm drops below this.
    pub pgtol: f64,
    /// Stop when an accepted step reduces the objective by less than
    /// `ftol * max(|f|, 1)`.
    pub ftol: f64,
    pub max_iter: usize,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            memory: 10,
            pgtol: 1e-6,
            ftol: 1e-12,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    ProjectedGradient,
    FunctionChange,
    LineSearch,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
}

impl Minimum {
    pub fn converged(&self) -> bool {
        matches!(
            self.termination,
            Termination::ProjectedGradient | Termination::FunctionChange
        )
    }
}

/// Infinity norm of `P(x - g) - x`.
pub fn projected_gradient_norm(x: &[f64], g: &[f64], bounds: &Bounds) -> f64 {
    x.iter()
        .zip(g)
        .enumerate()
        .map(|(i, (&xi, &gi))| ((xi - gi).clamp(bounds.lower[i], bounds.upper[i]) - xi).abs())
        .fold(0.0, f64::max)
}

fn dot_masked(a: &[f64], b: &[f64], free: &[bool]) -> f64 {
    a.iter()
        .zip(b)
        .zip(free)
        .filter(|(_, &f)| f)
        .map(|((x, y), _)| x * y)
        .sum()
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
}

fn direction(g: &[f64], free: &[bool], history: &VecDeque<Pair>) -> Vec<f64> {
    let mut q: Vec<f64> = g
        .iter()
        .zip(free)
        .map(|(&v, &f)| if f { v } else { 0.0 })
        .collect();
    let mut alphas = Vec::with_capacity(history.len());
    let mut rhos = Vec::with_capacity(history.len());
    for p in history.iter().rev() {
        let sy = dot_masked(&p.s, &p.y, free);
        let rho = if sy > 0.0 { 1.0 / sy } else { 0.0 };
        let a = rho * dot_masked(&p.s, &q, free);
        for i in 0..q.len() {
            if free[i] {
                q[i] -= a * p.y[i];
            }
        }
        alphas.push(a);
        rhos.push(rho);
    }
    if let Some(last) = history.back() {
        let sy = dot_masked(&last.s, &last.y, free);
        let yy = dot_masked(&last.y, &last.y, free);
        if sy > 0.0 && yy > 0.0 {
            let gamma = sy / yy;
            q.iter_mut().for_each(|v| *v *= gamma);
        }
    }
    for (k, p) in history.iter().enumerate() {
        let idx = history.len() - 1 - k;
        let b = rhos[idx] * dot_masked(&p.y, &q, free);
        for i in 0..q.len() {
            if free[i] {
                q[i] += p.s[i] * (alphas[idx] - b);
            }
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Minimizes `objective` over the box. The closure writes the gradient into
/// its second argument and returns the objective value.
pub fn minimize<F>(
    mut objective: F,
    x0: &[f64],
    bounds: &Bounds,
    opts: &Options,
) -> Result<Minimum, OptimError>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    if bounds.dim() != n {
        return Err(OptimError::Dimension {
            start: n,
            bounds: bounds.dim(),
        });
    }
    let mut x = x0.to_vec();
    bounds.project(&mut x);
    let mut g = vec![0.0; n];
    let mut f = objective(&x, &mut g);
    let mut evaluations = 1;
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(OptimError::NonFiniteStart);
    }
    let mut history: VecDeque<Pair> = VecDeque::with_capacity(opts.memory);
    let mut xt = vec![0.0; n];
    let mut gt = vec![0.0; n];
    let finish = |x: Vec<f64>, f, g, it, ev, term| Minimum {
        x,
        value: f,
        gradient: g,
        iterations: it,
        evaluations: ev,
        termination: term,
    };

    for iter in 0..opts.max_iter {
        if projected_gradient_norm(&x, &g, bounds) < opts.pgtol {
            return Ok(finish(
                x,
                f,
                g,
                iter,
                evaluations,
                Termination::ProjectedGradient,
            ));
        }
        let free: Vec<bool> = (0..n)
            .map(|i| {
                !((x[i] <= bounds.lower[i] && g[i] > 0.0)
                    || (x[i] >= bounds.upper[i] && g[i] < 0.0))
            })
            .collect();
        let mut d = direction(&g, &free, &history);
        if dot_masked(&g, &d, &free) >= 0.0 {
            history.clear();
            d = g
                .iter()
                .zip(&free)
                .map(|(&v, &fr)| if fr { -v } else { 0.0 })
                .collect();
        }
        let dmax = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut t = if history.is_empty() {
            (1.0 / dmax).min(1.0)
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..60 {
            for i in 0..n {
                xt[i] = (x[i] + t * d[i]).clamp(bounds.lower[i], bounds.upper[i]);
            }
            let slope: f64 = (0..n).map(|i| g[i] * (xt[i] - x[i])).sum();
            if xt == x {
                break;
            }
            let ft = objective(&xt, &mut gt);
            evaluations += 1;
            if ft.is_finite()
                && gt.iter().all(|v| v.is_finite())
                && ft <= f + 1e-4 * slope.min(0.0)
                && ft <= f
            {
                accepted = Some(ft);
                break;
            }
            t *= 0.5;
        }
        let Some(ft) = accepted else {
            if history.is_empty() {
                return Ok(finish(x, f, g, iter, evaluations, Termination::LineSearch));
            }
            history.clear();
            continue;
        };

        let s: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let yy: f64 = y.iter().map(|v| v * v).sum();
        if sy > 1e-10 * yy {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back(Pair { s, y });
        }
        let f_old = f;
        x.copy_from_slice(&xt);
        g.copy_from_slice(&gt);
        f = ft;
        if f_old - f <= opts.ftol * f_old.abs().max(f.abs()).max(1.0) {
            return Ok(finish(
                x,
                f,
                g,
                iter + 1,
                evaluations,
                Termination::FunctionChange,
            ));
        }
    }
    let term = if projected_gradient_norm(&x, &g, bounds) < opts.pgtol {
        Termination::ProjectedGradient
    } else {
        Termination::MaxIterations
    };
    Ok(finish(x, f, g, opts.max_iter, evaluations, term))
}

/// Result of running the minimizer from several starting points.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiStart {
    pub best: Minimum,
    /// Objective at each (projected) start; NaN where it was not finite.
    pub start_values: Vec<f64>,
}

/// Runs [`minimize`] from every start and keeps the lowest final value.
pub fn minimize_multistart<F>(
    mut objective: F,
    starts: &[Vec<f64>],
    bounds: &Bounds,
    opts: &Options,
) -> Result<MultiStart, OptimError>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let mut best: Option<Minimum> = None;
    let mut start_values = Vec::with_capacity(starts.len());
    let mut scratch = vec![0.0; bounds.dim()];
    for x0 in starts {
        let mut x = x0.clone();
        bounds.project(&mut x);
        let v = objective(&x, &mut scratch);
        start_values.push(if v.is_finite() { v } else { f64::NAN });
        if let Ok(m) = minimize(&mut objective, &x, bounds, opts) {
            if best.as_ref().map_or(true, |b| m.value < b.value) {
                best = Some(m);
            }
        }
    }
    best.map(|best| MultiStart { best, start_values })
        .ok_or(OptimError::NoFiniteStart)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64], g: &mut [f64]) -> f64 {
        let (a, b) = (x[0], x[1]);
        g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
        g[1] = 200.0 * (b - a * a);
        (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
    }

    #[test]
    fn unconstrained_rosenbrock() {
        let bounds = Bounds::new(&[(-5.0, 5.0), (-5.0, 5.0)]);
        let m = minimize(rosenbrock, &[-1.2, 1.0], &bounds, &Options::default()).unwrap();
        assert!(m.converged(), "{:?}", m.termination);
        assert!(
            (m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5,
            "{:?}",
            m.x
        );
    }

    #[test]
    fn active_bound_is_respected() {
        // minimum of the unconstrained problem is at (1, 1); the box caps x at 0.5
        let bounds = Bounds::new(&[(-5.0, 0.5), (-5.0, 5.0)]);
        let m = minimize(rosenbrock, &[-1.2, 1.0], &bounds, &Options::default()).unwrap();
        assert!(m.converged());
        assert_eq!(m.x[0], 0.5);
        assert!((m.x[1] - 0.25).abs() < 1e-5, "{:?}", m.x);
        assert!(projected_gradient_norm(&m.x, &m.gradient, &bounds) < 1e-5);
    }

    #[test]
    fn quadratic_with_both_bounds_active() {
        let obj = |x: &[f64], g: &mut [f64]| {
            g[0] = 2.0 * (x[0] - 3.0);
            g[1] = 2.0 * (x[1] + 3.0);
            g[2] = 2.0 * x[2];
            (x[0] - 3.0).powi(2) + (x[1] + 3.0).powi(2) + x[2] * x[2]
        };
        let bounds = Bounds::new(&[(0.0, 1.0), (-1.0, 0.0), (-1.0, 1.0)]);
        let m = minimize(obj, &[0.5, -0.5, 0.7], &bounds, &Options::default()).unwrap();
        assert_eq!(&m.x[..2], &[1.0, -1.0]);
        assert!(m.x[2].abs() < 1e-7);
    }

    #[test]
    fn multistart_never_worse_than_starts() {
        let bounds = Bounds::new(&[(-3.0, 3.0), (-3.0, 3.0)]);
        let starts = vec![vec![-2.0, 2.0], vec![2.5, -1.0], vec![0.0, 0.0]];
        let ms = minimize_multistart(rosenbrock, &starts, &bounds, &Options::default()).unwrap();
        assert!(ms.start_values.iter().all(|&v| ms.best.value <= v));
    }

    #[test]
    fn non_finite_start_is_reported() {
        let bounds = Bounds::new(&[(-1.0, 1.0)]);
        let r = minimize(
            |_: &[f64], _: &mut [f64]| f64::NAN,
            &[0.0],
            &bounds,
            &Options::default(),
        );
        assert_eq!(r, Err(OptimError::NonFiniteStart));
        let r = minimize_multistart(
            |_: &[f64], _: &mut [f64]| f64::NAN,
            &[vec![0.0]],
            &bounds,
            &Options::default(),
        );
        assert_eq!(r, Err(OptimError::NoFiniteStart));
    }
}
