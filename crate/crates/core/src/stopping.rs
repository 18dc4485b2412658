//! A-priori stopping rule: `N_delta = min(c0 * delta^-kappa,
//! rho/(2 xi delta) - 1)` with `kappa in (0, 1)`. As `delta -> 0` the index
//! grows without bound while `N_delta * delta -> 0`, and
//! `(N_delta + 1) * delta <= rho / (2 xi)` holds for every delta for which
//! the cap clause is satisfiable at all.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoppingError {
    #[error("delta must be positive, got {0}")]
    BadDelta(f64),
    #[error("{param} must lie in {range}, got {value}")]
    BadParameter {
        param: &'static str,
        range: &'static str,
        value: f64,
    },
}

/// Constants derived from the angle-condition beta, used by the noisy
/// recursion and uniform bounds.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct StopConstants {
    pub beta: f64,
    /// `1 + 4 beta^+`
    pub theta: f64,
    /// `max(1, 2 sqrt(beta^+))`
    pub xi: f64,
}

pub fn stop_constants(beta: f64) -> StopConstants {
    let beta_plus = beta.max(0.0);
    StopConstants {
        beta,
        theta: 1.0 + 4.0 * beta_plus,
        xi: 1.0_f64.max(2.0 * beta_plus.sqrt()),
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct StoppingPolicy {
    pub c0: f64,
    pub kappa: f64,
    pub rho: f64,
    pub xi: f64,
}

impl StoppingPolicy {
    pub fn new(c0: f64, kappa: f64, rho: f64, xi: f64) -> Result<Self, StoppingError> {
        if !(c0.is_finite() && c0 > 0.0) {
            return Err(StoppingError::BadParameter {
                param: "c0",
                range: "(0, inf)",
                value: c0,
            });
        }
        if !(kappa.is_finite() && 0.0 < kappa && kappa < 1.0) {
            return Err(StoppingError::BadParameter {
                param: "kappa",
                range: "(0, 1)",
                value: kappa,
            });
        }
        if !(rho.is_finite() && rho > 0.0) {
            return Err(StoppingError::BadParameter {
                param: "rho",
                range: "(0, inf)",
                value: rho,
            });
        }
        if !(xi.is_finite() && xi > 0.0) {
            return Err(StoppingError::BadParameter {
                param: "xi",
                range: "(0, inf)",
                value: xi,
            });
        }
        Ok(StoppingPolicy { c0, kappa, rho, xi })
    }

    /// The stopping index for one noise level. Panics on `delta <= 0`
    /// (checked variant: [`StoppingPolicy::try_stopping_index`]).
    pub fn stopping_index(&self, delta: f64) -> usize {
        self.try_stopping_index(delta)
            .expect("delta must be positive")
    }

    pub fn try_stopping_index(&self, delta: f64) -> Result<usize, StoppingError> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(StoppingError::BadDelta(delta));
        }
        let growth = (self.c0 * delta.powf(-self.kappa)).floor();
        let cap = (self.rho / (2.0 * self.xi * delta)).floor() - 1.0;
        let n = growth.min(cap).max(0.0);
        Ok(n.min(usize::MAX as f64) as usize)
    }
}
