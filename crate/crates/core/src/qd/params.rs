use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::archive::DEFAULT_F_MIN;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QdError {
    #[error("evaluation budget {budget} is below the minimum {minimum} for this method")]
    BudgetTooSmall { budget: u64, minimum: u64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QdParams {
    /// Initial population size.
    pub mu: usize,
    /// Offspring per iteration.
    pub lambda: usize,
    /// Neighbours for the novelty score.
    pub k: usize,
    pub ind_pb: f64,
    pub sigma: f64,
    pub budget: u64,
    pub emitters: usize,
    pub emitter_batch: usize,
    /// Archive learning rate for threshold updates.
    pub alpha: f64,
    pub f_min: f64,
    /// Initial CMA-ES step size in genome units.
    pub sigma0: f64,
    /// Generations without any accepted offer before an emitter restarts.
    pub restart_patience: usize,
}

impl Default for QdParams {
    fn default() -> Self {
        Self {
            mu: 500,
            lambda: 500,
            k: 15,
            ind_pb: 0.3,
            sigma: 0.1,
            budget: 5_000,
            emitters: 15,
            emitter_batch: 36,
            alpha: 0.2,
            f_min: DEFAULT_F_MIN,
            sigma0: 0.3,
            restart_patience: 50,
        }
    }
}

impl QdParams {
    pub fn validate(&self) -> Result<(), QdError> {
        let bad = |m: &str| Err(QdError::InvalidParams(m.into()));
        if self.mu == 0 || self.lambda == 0 {
            return bad("mu and lambda must be at least 1");
        }
        if self.emitters == 0 || self.emitter_batch < 2 {
            return bad("need at least one emitter with batch of at least 2");
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.ind_pb) || !(self.sigma >= 0.0) {
            return bad("ind_pb must lie in [0, 1] and sigma must be non-negative");
        }
        if !(self.sigma0 > 0.0) || !self.f_min.is_finite() {
            return bad("sigma0 must be positive and f_min finite");
        }
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        Ok(())
    }
}
