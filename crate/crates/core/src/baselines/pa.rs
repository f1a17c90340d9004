use super::BaselineError;
use crate::kernels::{fitted_from, Fitted};
use crate::optim::{self, Bounds, Options};
use crate::tree::{TimedTree, TreeBuilder, NO_PARENT};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const BETA_BOUNDS: (f64, f64) = (1e-3, 1e3);
pub const GAMMA_BOUNDS: (f64, f64) = (-2.0, 5.0);

/// Attachment weight `(beta d)^gamma_c` for the post and `d^gamma` for a
/// comment, `d` being the node's degree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaParams {
    pub beta: f64,
    pub gamma_c: f64,
    pub gamma: f64,
}

impl PaParams {
    pub fn new(beta: f64, gamma_c: f64, gamma: f64) -> Result<Self, BaselineError> {
        if !(beta > 0.0 && beta.is_finite() && gamma_c.is_finite() && gamma.is_finite()) {
            return Err(BaselineError::InvalidParams(format!(
                "beta={beta}, gamma_c={gamma_c}, gamma={gamma}"
            )));
        }
        Ok(Self {
            beta,
            gamma_c,
            gamma,
        })
    }
}

/// Parent list of `tree` relabelled by arrival order: entry `m` is the
/// arrival rank of node `m`'s parent.
pub fn arrival_parents(tree: &TimedTree) -> Vec<usize> {
    let order = tree.arrival_order();
    let mut rank = vec![0usize; tree.len()];
    for (r, &v) in order.iter().enumerate() {
        rank[v] = r;
    }
    order
        .iter()
        .map(|&v| tree.parent(v).map_or(NO_PARENT, |p| rank[p]))
        .collect()
}

/// Growth state of a tree under the attachment rule.
#[derive(Debug, Clone)]
pub struct PaGrowth {
    params: PaParams,
    degree: Vec<usize>,
}

impl PaGrowth {
    pub fn new(params: PaParams) -> Self {
        Self {
            params,
            degree: vec![0],
        }
    }

    pub fn len(&self) -> usize {
        self.degree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degree.is_empty()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.degree[v]
    }

    pub fn weight(&self, v: usize) -> f64 {
        let d = self.degree[v] as f64;
        if v == 0 {
            (self.params.beta * d).powf(self.params.gamma_c)
        } else {
            d.powf(self.params.gamma)
        }
    }

    /// Probability of the next node attaching to each existing node. With
    /// only the post present the attachment is certain.
    pub fn probabilities(&self) -> Vec<f64> {
        if self.len() == 1 {
            return vec![1.0];
        }
        let w: Vec<f64> = (0..self.len()).map(|v| self.weight(v)).collect();
        let z: f64 = w.iter().sum();
        w.into_iter().map(|x| x / z).collect()
    }

    /// Adds a node replying to `parent` and returns its index.
    pub fn attach(&mut self, parent: usize) -> usize {
        self.degree[parent] += 1;
        self.degree.push(1);
        self.degree.len() - 1
    }
}

/// Log-likelihood of an arrival-ordered parent list (`parents[0]` is the
/// post) and its gradient in `(ln beta, gamma_c, gamma)`.
pub fn pa_loglik_grad(
    parents: &[usize],
    params: &PaParams,
) -> Result<(f64, [f64; 3]), BaselineError> {
    let n = parents.len();
    for (m, &p) in parents.iter().enumerate().skip(1) {
        if p >= m {
            return Err(BaselineError::InvalidOrder(m));
        }
    }
    let PaParams {
        beta,
        gamma_c,
        gamma,
    } = *params;
    // d^gamma and ln d for every degree a comment can reach
    let pw: Vec<f64> = (0..=n).map(|d| (d as f64).powf(gamma)).collect();
    let lnd: Vec<f64> = (0..=n).map(|d| (d as f64).ln()).collect();
    let mut degree = vec![0usize; n];
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut ll = 0.0;
    let mut g = [0.0; 3];
    for m in 1..n {
        let k = parents[m];
        if m > 1 {
            let lrb = beta.ln() + lnd[degree[0]];
            let w0 = (gamma_c * lrb).exp();
            let z = w0 + s0;
            let (lw, dlb, dgc, dg) = if k == 0 {
                (gamma_c * lrb, gamma_c, lrb, 0.0)
            } else {
                (gamma * lnd[degree[k]], 0.0, 0.0, lnd[degree[k]])
            };
            ll += lw - z.ln();
            g[0] += dlb - w0 * gamma_c / z;
            g[1] += dgc - w0 * lrb / z;
            g[2] += dg - s1 / z;
        }
        if k != 0 {
            let d = degree[k];
            s0 += pw[d + 1] - pw[d];
            s1 += pw[d + 1] * lnd[d + 1] - pw[d] * lnd[d];
        }
        degree[k] += 1;
        degree[m] = 1;
        s0 += 1.0;
    }
    Ok((ll, g))
}

pub fn pa_loglik_parents(parents: &[usize], params: &PaParams) -> Result<f64, BaselineError> {
    Ok(pa_loglik_grad(parents, params)?.0)
}

/// Log-likelihood of the tree's arrival sequence.
pub fn pa_loglik(tree: &TimedTree, params: &PaParams) -> f64 {
    // arrival order of a valid tree always puts parents first
    pa_loglik_parents(&arrival_parents(tree), params).unwrap_or(f64::NEG_INFINITY)
}

/// Maximum-likelihood attachment parameters of one tree.
pub fn fit_pa(tree: &TimedTree) -> Result<Fitted<PaParams>, BaselineError> {
    let n = tree.len();
    if n < 3 {
        return Err(BaselineError::TooSmall { need: 3, got: n });
    }
    let parents = arrival_parents(tree);
    let steps = (n - 2) as f64;
    let objective = |x: &[f64], g: &mut [f64]| {
        let p = PaParams {
            beta: x[0].exp(),
            gamma_c: x[1],
            gamma: x[2],
        };
        let (ll, gr) = pa_loglik_grad(&parents, &p).expect("arrival order is valid");
        for i in 0..3 {
            g[i] = -gr[i] / steps;
        }
        -ll / steps
    };
    let bounds = Bounds::new(&[
        (BETA_BOUNDS.0.ln(), BETA_BOUNDS.1.ln()),
        GAMMA_BOUNDS,
        GAMMA_BOUNDS,
    ]);
    let starts = vec![
        vec![0.0, 1.0, 1.0],
        vec![0.0, 0.0, 0.0],
        vec![2f64.ln(), 1.5, 0.5],
        vec![-(2f64.ln()), 0.5, 1.5],
        vec![0.0, 2.0, 0.2],
    ];
    let ms = optim::minimize_multistart(objective, &starts, &bounds, &Options::default())?;
    let x = &ms.best.x;
    let params = PaParams {
        beta: x[0].exp(),
        gamma_c: x[1],
        gamma: x[2],
    };
    Ok(fitted_from(&ms, steps, params))
}

/// Grows an `n`-node tree by sequential attachment. All times are zero.
///
/// Comments with equal degree have equal weight, so sampling picks a degree
/// class first and then a uniform member of it.
pub fn simulate_pa<R: Rng + ?Sized>(params: &PaParams, n: usize, rng: &mut R) -> TimedTree {
    let n = n.max(1);
    let mut builder = TreeBuilder::new();
    let mut root_degree = 0usize;
    // members[d]: comments with degree d; slot[v]: position of v in its class
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
    let mut slot = vec![0usize; n];
    let mut degree = vec![0usize; n];
    let mut active: Vec<usize> = Vec::new();
    let mut active_pos = vec![usize::MAX; n + 1];
    let mut pw: Vec<f64> = (0..=n).map(|d| (d as f64).powf(params.gamma)).collect();
    pw[0] = 0.0;

    fn insert(
        v: usize,
        d: usize,
        members: &mut [Vec<usize>],
        slot: &mut [usize],
        active: &mut Vec<usize>,
        active_pos: &mut [usize],
    ) {
        if members[d].is_empty() {
            active_pos[d] = active.len();
            active.push(d);
        }
        slot[v] = members[d].len();
        members[d].push(v);
    }

    fn remove(
        v: usize,
        d: usize,
        members: &mut [Vec<usize>],
        slot: &mut [usize],
        active: &mut Vec<usize>,
        active_pos: &mut [usize],
    ) {
        let i = slot[v];
        members[d].swap_remove(i);
        if i < members[d].len() {
            slot[members[d][i]] = i;
        }
        if members[d].is_empty() {
            let j = active_pos[d];
            active.swap_remove(j);
            if j < active.len() {
                active_pos[active[j]] = j;
            }
            active_pos[d] = usize::MAX;
        }
    }

    for m in 1..n {
        let parent = if m == 1 {
            0
        } else {
            let w0 = (params.beta * root_degree as f64).powf(params.gamma_c);
            let comments: f64 = active
                .iter()
                .map(|&d| members[d].len() as f64 * pw[d])
                .sum();
            let mut u = rng.random::<f64>() * (w0 + comments);
            if u < w0 || active.is_empty() {
                0
            } else {
                u -= w0;
                let mut chosen = *active.last().expect("non-empty");
                for &d in &active {
                    let mass = members[d].len() as f64 * pw[d];
                    if u < mass {
                        chosen = d;
                        break;
                    }
                    u -= mass;
                }
                let class = &members[chosen];
                class[rng.random_range(0..class.len())]
            }
        };
        if parent == 0 {
            root_degree += 1;
        } else {
            let d = degree[parent];
            remove(
                parent,
                d,
                &mut members,
                &mut slot,
                &mut active,
                &mut active_pos,
            );
            degree[parent] = d + 1;
            insert(
                parent,
                d + 1,
                &mut members,
                &mut slot,
                &mut active,
                &mut active_pos,
            );
        }
        let v = builder.push(parent, 0.0);
        degree[v] = 1;
        insert(v, 1, &mut members, &mut slot, &mut active, &mut active_pos);
    }
    builder.build().expect("attachment keeps parents first")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_exponents_give_uniform_steps() {
        let p = PaParams::new(1.0, 0.0, 0.0).unwrap();
        let parents = vec![NO_PARENT, 0, 0, 1, 2, 1];
        let ll = pa_loglik_parents(&parents, &p).unwrap();
        let expected: f64 = -(2..6).map(|m| (m as f64).ln()).sum::<f64>();
        assert!((ll - expected).abs() < 1e-12);
    }

    #[test]
    fn path_of_three() {
        let p = PaParams::new(1.0, 1.0, 1.0).unwrap();
        let ll = pa_loglik_parents(&[NO_PARENT, 0, 1], &p).unwrap();
        assert!((ll - 0.5f64.ln()).abs() < 1e-15);
        assert_eq!(
            pa_loglik_parents(&[NO_PARENT, 0, 2], &p),
            Err(BaselineError::InvalidOrder(2))
        );
    }

    #[test]
    fn small_and_star_fits() {
        assert!(matches!(
            fit_pa(&TimedTree::root_only()),
            Err(BaselineError::TooSmall { .. })
        ));
        let star = TimedTree::new(
            vec![NO_PARENT; 1].into_iter().chain(vec![0; 30]).collect(),
            vec![0.0; 31],
        )
        .unwrap();
        let f = fit_pa(&star).unwrap();
        assert!(
            f.params.gamma_c > 4.0 || f.params.beta > 100.0,
            "{:?}",
            f.params
        );
    }

    #[test]
    fn simulated_sizes_and_roots() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(
            simulate_pa(&PaParams::new(1.0, 1.0, 1.0).unwrap(), 1, &mut rng).len(),
            1
        );
        let t = simulate_pa(&PaParams::new(1.0, 1.0, 1.0).unwrap(), 500, &mut rng);
        assert_eq!(t.len(), 500);
        let star = simulate_pa(&PaParams::new(1.0, 5.0, -2.0).unwrap(), 300, &mut rng);
        assert!(star.depth() <= 2);
    }
}
