//! Rooted, timestamped discussion trees and their structural observables.
//!
//! A [`TimedTree`] stores nodes in an order where every parent precedes
//! its children (`parent[i] < i`), node 0 is the root (the post) at time 0,
//! and times are hours since the post. Children lists are kept sorted by
//! `(time, index)`, which is also the arrival order used by growth models.

use thiserror::Error;

/// Parent sentinel stored for the root.
pub const NO_PARENT: usize = usize::MAX;

/// Largest branching number used by simulation and likelihoods; the raw
/// estimate can reach 1 on path-like trees, which would be critical.
pub const MAX_BRANCHING: f64 = 1.0 - 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("a tree needs at least one node")]
    Empty,
    #[error("root must have time 0 and no parent")]
    BadRoot,
    #[error("node {0}: parent index must precede the node")]
    ParentOrder(usize),
    #[error("node {0}: time must be finite and non-negative")]
    BadTime(usize),
    #[error("node {node}: time {time} precedes its parent's time {parent_time}")]
    NonMonotone {
        node: usize,
        time: f64,
        parent_time: f64,
    },
    #[error("length mismatch between parents ({parents}) and times ({times})")]
    Length { parents: usize, times: usize },
    #[error("tree has {0} node(s); at least two are needed")]
    Degenerate(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimedTree {
    parent: Vec<usize>,
    time: Vec<f64>,
    ids: Vec<u64>,
    child_start: Vec<usize>,
    child_list: Vec<usize>,
}

/// Node counts per distance from the root, `N_1, N_2, ...`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DepthProfile(Vec<usize>);

impl DepthProfile {
    pub fn new(counts: Vec<usize>) -> Self {
        Self(counts)
    }

    pub fn counts(&self) -> &[usize] {
        &self.0
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    /// `N_k` for `k >= 1`; layers beyond the depth count as empty.
    pub fn layer(&self, k: usize) -> usize {
        if k == 0 {
            return 0;
        }
        self.0.get(k - 1).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommentResponse {
    pub delay: f64,
    pub parent_time: f64,
}

/// Reply delays split by the kind of node replied to.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResponseTimes {
    pub root: Vec<f64>,
    pub comment: Vec<CommentResponse>,
}

impl TimedTree {
    /// Builds a tree from parallel parent/time arrays. `parents[0]` must be
    /// [`NO_PARENT`]; every other entry must point at an earlier index.
    pub fn new(parents: Vec<usize>, times: Vec<f64>) -> Result<Self, TreeError> {
        let ids = (0..parents.len() as u64).collect();
        Self::with_ids(parents, times, ids)
    }

    pub fn with_ids(
        parents: Vec<usize>,
        times: Vec<f64>,
        ids: Vec<u64>,
    ) -> Result<Self, TreeError> {
        if parents.len() != times.len() || ids.len() != parents.len() {
            return Err(TreeError::Length {
                parents: parents.len(),
                times: times.len(),
            });
        }
        if parents.is_empty() {
            return Err(TreeError::Empty);
        }
        if parents[0] != NO_PARENT || times[0] != 0.0 {
            return Err(TreeError::BadRoot);
        }
        for i in 1..parents.len() {
            let p = parents[i];
            if p >= i {
                return Err(TreeError::ParentOrder(i));
            }
            let t = times[i];
            if !t.is_finite() || t < 0.0 {
                return Err(TreeError::BadTime(i));
            }
            if t < times[p] {
                return Err(TreeError::NonMonotone {
                    node: i,
                    time: t,
                    parent_time: times[p],
                });
            }
        }
        Ok(Self::assemble(parents, times, ids))
    }

    /// A single post with no comments.
    pub fn root_only() -> Self {
        Self::assemble(vec![NO_PARENT], vec![0.0], vec![0])
    }

    fn assemble(parent: Vec<usize>, time: Vec<f64>, ids: Vec<u64>) -> Self {
        let n = parent.len();
        let mut count = vec![0usize; n + 1];
        for &p in &parent[1..] {
            count[p + 1] += 1;
        }
        for i in 0..n {
            count[i + 1] += count[i];
        }
        let child_start = count.clone();
        let mut fill = count;
        let mut child_list = vec![0usize; n.saturating_sub(1)];
        for (i, &p) in parent.iter().enumerate().skip(1) {
            child_list[fill[p]] = i;
            fill[p] += 1;
        }
        for v in 0..n {
            let slot = &mut child_list[child_start[v]..child_start[v + 1]];
            slot.sort_by(|&x, &y| time[x].total_cmp(&time[y]).then(x.cmp(&y)));
        }
        Self {
            parent,
            time,
            ids,
            child_start,
            child_list,
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        match self.parent[v] {
            NO_PARENT => None,
            p => Some(p),
        }
    }

    pub fn parents(&self) -> &[usize] {
        &self.parent
    }

    pub fn time(&self, v: usize) -> f64 {
        self.time[v]
    }

    pub fn times(&self) -> &[f64] {
        &self.time
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.child_list[self.child_start[v]..self.child_start[v + 1]]
    }

    pub fn out_degree(&self, v: usize) -> usize {
        self.child_start[v + 1] - self.child_start[v]
    }

    pub fn root_degree(&self) -> usize {
        self.out_degree(0)
    }

    /// Latest creation time in the tree (0 for a bare post).
    pub fn max_time(&self) -> f64 {
        self.time.iter().copied().fold(0.0, f64::max)
    }

    /// Creation time of every comment, in index order.
    pub fn comment_times(&self) -> &[f64] {
        &self.time[1..]
    }

    /// Reply counts of every comment (the root is excluded).
    pub fn forward_degrees(&self) -> Vec<usize> {
        (1..self.len()).map(|v| self.out_degree(v)).collect()
    }

    /// Mean forward degree over comments, `1 - d_root / (n - 1)`.
    pub fn branching_number(&self) -> Result<f64, TreeError> {
        let n = self.len();
        if n < 2 {
            return Err(TreeError::Degenerate(n));
        }
        let comment_replies = n - 1 - self.root_degree();
        Ok(comment_replies as f64 / (n - 1) as f64)
    }

    /// Distance of every node from the root, in edges.
    pub fn depths(&self) -> Vec<usize> {
        let mut depth = vec![0usize; self.len()];
        for v in 1..self.len() {
            depth[v] = depth[self.parent[v]] + 1;
        }
        depth
    }

    pub fn depth_profile(&self) -> DepthProfile {
        let mut counts = Vec::new();
        for d in self.depths().into_iter().skip(1) {
            if counts.len() < d {
                counts.resize(d, 0);
            }
            counts[d - 1] += 1;
        }
        DepthProfile(counts)
    }

    pub fn depth(&self) -> usize {
        self.depths().into_iter().max().unwrap_or(0)
    }

    pub fn response_times(&self) -> ResponseTimes {
        let mut out = ResponseTimes::default();
        for v in 1..self.len() {
            let p = self.parent[v];
            let delay = self.time[v] - self.time[p];
            if p == 0 {
                out.root.push(delay);
            } else {
                out.comment.push(CommentResponse {
                    delay,
                    parent_time: self.time[p],
                });
            }
        }
        out
    }

    /// The subtree of nodes created at or before `t_learn` hours.
    pub fn truncate(&self, t_learn: f64) -> TimedTree {
        self.truncate_mapped(t_learn).0
    }

    /// Like [`truncate`](Self::truncate), also returning the original index
    /// of every kept node.
    pub fn truncate_mapped(&self, t_learn: f64) -> (TimedTree, Vec<usize>) {
        let n = self.len();
        let mut new_index = vec![NO_PARENT; n];
        let mut kept = Vec::new();
        let mut parents = Vec::new();
        let mut times = Vec::new();
        let mut ids = Vec::new();
        for v in 0..n {
            // parent time <= child time, so a kept node always has a kept parent
            if v == 0 || self.time[v] <= t_learn {
                new_index[v] = kept.len();
                kept.push(v);
                parents.push(if v == 0 {
                    NO_PARENT
                } else {
                    new_index[self.parent[v]]
                });
                times.push(self.time[v]);
                ids.push(self.ids[v]);
            }
        }
        (Self::assemble(parents, times, ids), kept)
    }

    /// Node indices sorted by creation time, ties by index. Parents always
    /// precede their children in this order.
    pub fn arrival_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&x, &y| self.time[x].total_cmp(&self.time[y]).then(x.cmp(&y)));
        order
    }
}

/// Clamps a raw branching number into the subcritical range used for
/// simulation and likelihood evaluation.
pub fn clamp_branching(n_b: f64) -> f64 {
    n_b.clamp(0.0, MAX_BRANCHING)
}

/// Incremental construction for generators that emit parents before
/// children.
#[derive(Debug, Default, Clone)]
pub struct TreeBuilder {
    parents: Vec<usize>,
    times: Vec<f64>,
}

impl TreeBuilder {
    pub fn new() -> Self {
        Self {
            parents: vec![NO_PARENT],
            times: vec![0.0],
        }
    }

    pub fn from_tree(tree: &TimedTree) -> Self {
        Self {
            parents: tree.parent.clone(),
            times: tree.time.clone(),
        }
    }

    pub fn push(&mut self, parent: usize, time: f64) -> usize {
        debug_assert!(parent < self.parents.len());
        self.parents.push(parent);
        self.times.push(time);
        self.parents.len() - 1
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    pub fn time(&self, v: usize) -> f64 {
        self.times[v]
    }

    pub fn build(self) -> Result<TimedTree, TreeError> {
        TimedTree::new(self.parents, self.times)
    }
}
