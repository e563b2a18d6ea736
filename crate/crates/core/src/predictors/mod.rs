//! Single-step, direct multi-step and multi-step-loss predictors.

mod fit;
mod gd;
mod loss;
mod predictor;

pub use fit::{
    fit_multi_step, fit_multi_step_ridge, fit_single_step, fit_single_step_ridge,
    fit_single_step_rollout, RegressionData,
};
pub use gd::{fit_structured_gd, fit_structured_gd_on, GdFit, GdOptions, MultiStepObjective};
pub use loss::{analytic_loss, empirical_loss, EVAL_BURN_IN};
pub use predictor::{compose_matrix, compose_rollout, OneStep, Predictor, Structure};
