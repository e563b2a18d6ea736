//! Linear predictors for partially observed LTI systems.
//!
//! The crate compares three ways of forecasting `H` steps ahead from data
//! generated by `x_{t+1} = A x_t + B u_t + B_w w_t`, `y_t = C x_t + D_v v_t`:
//! a one-step least-squares model rolled out recursively, a direct multi-step
//! least-squares map, and a one-step model trained on the multi-step loss.
//! Alongside the estimators it evaluates the closed-form asymptotic error and
//! bias expressions, synthesises MPC gains from fitted predictors, and runs
//! the seeded Monte Carlo sweeps behind each experiment.

pub mod control;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod predictors;
pub mod system;
pub mod theory;

pub use error::{Error, Result};
pub use numerics::Matrix;
pub use predictors::{Predictor, Structure};
pub use system::{CovarianceBundle, LtiModel, Regime, RolloutOperators, Trajectory};
