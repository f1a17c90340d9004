//! Comparison models: preferential-attachment growth for structure, and
//! the Dynamic Poisson and Reinforced Poisson processes for activity.

mod dp;
mod pa;
mod rpp;

pub use dp::{
    dp_loglik_grad, dp_nll_future, dp_predict_size, dp_simulate_future, fit_dp, DpParams,
};
pub use pa::{
    arrival_parents, fit_pa, pa_loglik, pa_loglik_grad, pa_loglik_parents, simulate_pa, PaGrowth,
    PaParams, BETA_BOUNDS, GAMMA_BOUNDS,
};
pub use rpp::{
    fit_rpp, reinforcement, rpp_intensity, rpp_loglik_grad, rpp_nll_future, rpp_predict_size,
    RppParams, D_BOUNDS,
};

use crate::kernels::{floor_delay, KernelError};
use crate::optim::OptimError;
use crate::temporal::EventSeries;
use thiserror::Error;

/// Upper bound on events generated in one baseline forecast.
pub const EVENT_CAP: usize = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("tree too small: need {need} nodes, got {got}")]
    TooSmall { need: usize, got: usize },
    #[error("node {0} arrives before its parent")]
    InvalidOrder(usize),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("too few events: need {need}, got {got}")]
    TooFewEvents { need: usize, got: usize },
    #[error("no events after the learning window")]
    NoFutureEvents,
    #[error("forecast exceeded {0} events")]
    SimulationBlowup(usize),
    #[error("optimizer failed: {0}")]
    OptimizerFailure(#[from] OptimError),
}

impl From<KernelError> for BaselineError {
    fn from(e: KernelError) -> Self {
        match e {
            KernelError::InvalidParams(s) => Self::InvalidParams(s),
            KernelError::TooFewEvents { need, got } => Self::TooFewEvents { need, got },
            KernelError::OptimizerFailure(o) => Self::OptimizerFailure(o),
        }
    }
}

/// Comment times with zero offsets floored, as used by the activity models.
pub(crate) fn floored_times(series: &EventSeries) -> Vec<f64> {
    series.times().iter().map(|&t| floor_delay(t)).collect()
}
