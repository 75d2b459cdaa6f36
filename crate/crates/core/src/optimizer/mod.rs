//! Bound-constrained minimization and the two outer design schemes.

mod bncg;
mod schemes;

pub use bncg::{bncg_minimize, AcceptInfo, BncgResult, Objective, Termination};
pub use schemes::{run_monolithic, run_staggered, staggered_stimulus, IterateSnapshot, SchemeOutcome};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::ObjectiveBreakdown;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Joint descent in densities and stimuli.
    Monolithic,
    /// Descent in densities with the stimulus minimized inside every evaluation.
    Staggered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub grad_rtol: f64,
    pub grad_atol: f64,
    pub obj_rtol: f64,
    pub max_outer_iters: usize,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    pub backtrack: f64,
    pub max_line_search: usize,
    /// Steepest-descent restart every this many iterations; 0 restarts only
    /// when the conjugate direction is not a descent direction.
    pub restart_period: usize,
    /// Largest component of the first trial step.
    pub initial_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            grad_rtol: 1e-6,
            grad_atol: 1e-6,
            obj_rtol: 1e-6,
            max_outer_iters: 200,
            armijo: 1e-4,
            backtrack: 0.5,
            max_line_search: 40,
            restart_period: 0,
            initial_step: 0.1,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("grad_rtol", self.grad_rtol),
            ("grad_atol", self.grad_atol),
            ("obj_rtol", self.obj_rtol),
            ("initial_step", self.initial_step),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("armijo", self.armijo), ("backtrack", self.backtrack)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidParameter(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if self.max_line_search == 0 {
            return Err(Error::InvalidParameter("max_line_search must be at least 1".into()));
        }
        Ok(())
    }
}

/// One accepted outer iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateRecord {
    pub iteration: usize,
    pub breakdown: ObjectiveBreakdown,
    pub grad_norm_design: f64,
    pub grad_norm_stimulus: f64,
    pub step: f64,
    pub vol_frac2: f64,
    pub vol_frac3: f64,
}
