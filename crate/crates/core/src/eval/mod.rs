//! Experiment harness: cohorts, learning-window sweeps, error metrics and
//! log-binned medians.

mod experiment;
mod metrics;
mod report;
mod synthetic;

pub use experiment::{
    pooled_kernel, run_dynamics_experiment, run_structure_experiment, select_cohort, tree_key,
    Experiment,
};
pub use metrics::{layer_profile_errors, relative_size_error, remaining_fraction};
pub use report::{bin_edges, bin_medians, bin_of, BinRow};
pub use synthetic::{synthetic_forest, SyntheticPrior};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("empty depth profile")]
    EmptyProfile,
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub seed: u64,
    /// Monte Carlo replicates per tree.
    pub runs: usize,
    /// Trees sampled per cohort.
    pub sample_cap: usize,
    /// Learning windows in hours.
    pub windows: Vec<f64>,
    /// Logarithmic size bins per cohort.
    pub bins: usize,
    /// Inclusive size range of the small cohort.
    pub small: [usize; 2],
    /// Inclusive size range of the large cohort.
    pub large: [usize; 2],
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            runs: 50,
            sample_cap: 8000,
            windows: vec![4.0, 6.0, 8.0, 12.0],
            bins: 10,
            small: [50, 199],
            large: [200, 2000],
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: &str| Err(EvalError::Config(m.to_string()));
        if self.runs == 0 {
            return bad("runs must be at least 1");
        }
        if self.windows.is_empty() || self.windows.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return bad("windows must be a non-empty list of positive hours");
        }
        if self.bins == 0 {
            return bad("bins must be at least 1");
        }
        for (name, [lo, hi]) in [("small", self.small), ("large", self.large)] {
            if lo < 1 || lo > hi {
                return Err(EvalError::Config(format!(
                    "{name} cohort bounds must satisfy 1 <= lo <= hi"
                )));
            }
        }
        Ok(())
    }

    pub fn bounds(&self, cohort: Cohort) -> [usize; 2] {
        match cohort {
            Cohort::Small => self.small,
            Cohort::Large => self.large,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cohort {
    Small,
    Large,
}

impl Cohort {
    pub const ALL: [Cohort; 2] = [Cohort::Small, Cohort::Large];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Hawkes,
    Pa,
    Dp,
    Rpp,
    /// Properties of the data itself.
    Observed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    NllFuture,
    EpsDMin,
    EpsDMax,
    EpsS,
    RemainingFraction,
}

/// One per-tree measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub tree: String,
    pub cohort: Cohort,
    /// Final size of the tree.
    pub size: usize,
    pub model: Model,
    /// Learning window in hours; absent for structure rows.
    pub window: Option<f64>,
    pub metric: Metric,
    pub value: f64,
    /// `;`-separated annotations such as `pooled_kernel`.
    pub flags: String,
}

/// A (tree, model, window) combination that produced no measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipRow {
    pub tree: String,
    pub cohort: Cohort,
    pub size: usize,
    pub model: Model,
    pub window: Option<f64>,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    pub skips: Vec<SkipRow>,
}

impl Report {
    pub fn extend(&mut self, other: Report) {
        self.rows.extend(other.rows);
        self.skips.extend(other.skips);
    }
}
