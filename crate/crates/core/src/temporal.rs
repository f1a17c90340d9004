//! Time-series statistics over a tree's comment times.

use crate::tree::TimedTree;
use thiserror::Error;

/// Upper edge of the "early" class, hours after the post.
pub const EARLY_HOURS: f64 = 6.0;
/// Upper edge of the "mid" class.
pub const MID_HOURS: f64 = 24.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TemporalError {
    #[error("local variation needs at least two distinct inter-event intervals, got {0}")]
    TooFewEvents(usize),
    #[error("empty sample")]
    EmptySample,
}

/// Ascending comment creation times in hours, with the post implicitly at
/// time 0. Duplicate times are kept here.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventSeries(Vec<f64>);

impl EventSeries {
    /// Sorts the given times.
    pub fn new(mut times: Vec<f64>) -> Self {
        times.sort_by(f64::total_cmp);
        Self(times)
    }

    pub fn from_tree(tree: &TimedTree) -> Self {
        Self::new(tree.comment_times().to_vec())
    }

    pub fn times(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of events at or before `t`.
    pub fn count_until(&self, t: f64) -> usize {
        self.0.partition_point(|&x| x <= t)
    }
}

/// Local variation coefficient of the event series.
///
/// Intervals are measured from the post (`tau_0 = 0`). Events sharing a
/// timestamp, or sharing the post's timestamp, are merged before the
/// intervals are formed so that no term becomes 0/0.
pub fn local_variation(series: &EventSeries) -> Result<f64, TemporalError> {
    let mut gaps = Vec::with_capacity(series.len());
    let mut prev = 0.0;
    for &t in series.times() {
        if t > prev {
            gaps.push(t - prev);
            prev = t;
        }
    }
    if gaps.len() < 2 {
        return Err(TemporalError::TooFewEvents(gaps.len()));
    }
    let sum: f64 = gaps
        .windows(2)
        .map(|w| {
            let r = (w[1] - w[0]) / (w[1] + w[0]);
            r * r
        })
        .sum();
    Ok(3.0 * sum / (gaps.len() - 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ActivityClasses {
    pub early: usize,
    pub mid: usize,
    pub late: usize,
}

impl ActivityClasses {
    pub fn total(&self) -> usize {
        self.early + self.mid + self.late
    }
}

/// Splits comments into `[0, 6]`, `(6, 24]` and `(24, inf)` hours.
pub fn classify_comments(tree: &TimedTree) -> ActivityClasses {
    let mut c = ActivityClasses::default();
    for &t in tree.comment_times() {
        if t <= EARLY_HOURS {
            c.early += 1;
        } else if t <= MID_HOURS {
            c.mid += 1;
        } else {
            c.late += 1;
        }
    }
    c
}

/// Empirical complementary CDF `(v, P(X > v))` at each distinct sample value.
pub fn ccdf(samples: &[f64]) -> Result<Vec<(f64, f64)>, TemporalError> {
    if samples.is_empty() {
        return Err(TemporalError::EmptySample);
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut out = Vec::new();
    let mut i = 0;
    while i < xs.len() {
        let v = xs[i];
        while i < xs.len() && xs[i] == v {
            i += 1;
        }
        out.push((v, (xs.len() - i) as f64 / n));
    }
    Ok(out)
}
