use crate::hawkes::{simulate_tree, HawkesError, HawkesParams};
use crate::ingest::Forest;
use crate::rng::{stream, Purpose};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Ranges for drawing per-tree parameters of a heterogeneous synthetic
/// forest. `a` is log-uniform, everything else uniform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticPrior {
    pub a: (f64, f64),
    pub b: (f64, f64),
    pub alpha: (f64, f64),
    pub mu: (f64, f64),
    pub sigma: (f64, f64),
    pub n_b: (f64, f64),
}

impl Default for SyntheticPrior {
    fn default() -> Self {
        Self {
            a: (1.0, 400.0),
            b: (3.0, 8.0),
            alpha: (0.8, 1.6),
            mu: (-1.5, 0.0),
            sigma: (0.8, 1.3),
            n_b: (0.3, 0.8),
        }
    }
}

impl SyntheticPrior {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<HawkesParams, HawkesError> {
        let mut u = |(lo, hi): (f64, f64)| lo + (hi - lo) * rng.random::<f64>();
        let a = u((self.a.0.ln(), self.a.1.ln())).exp();
        let b = u(self.b);
        let alpha = u(self.alpha);
        let mu = u(self.mu);
        let sigma = u(self.sigma);
        let n_b = u(self.n_b);
        HawkesParams::from_values(a, b, alpha, mu, sigma, n_b)
    }
}

/// `count` fully grown trees, tree `i` from its own parameter draw.
pub fn synthetic_forest(
    prior: &SyntheticPrior,
    count: usize,
    seed: u64,
) -> Result<(Forest, Vec<HawkesParams>), HawkesError> {
    let drawn: Vec<_> = (0..count)
        .into_par_iter()
        .map(|i| {
            let params = prior.sample(&mut stream(seed, i as u64, 0, Purpose::Prior))?;
            let tree = simulate_tree(
                &params,
                f64::INFINITY,
                &mut stream(seed, i as u64, 0, Purpose::Simulate),
            )?;
            Ok((tree, params))
        })
        .collect::<Result<_, HawkesError>>()?;
    let (trees, params): (Vec<_>, Vec<_>) = drawn.into_iter().unzip();
    Ok((
        Forest::from_trees(trees, format!("synthetic:seed={seed}:count={count}")),
        params,
    ))
}
