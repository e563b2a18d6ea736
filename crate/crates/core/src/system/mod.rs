//! Ground-truth LTI model, simulation, innovations form, stationary
//! covariances and block rollout operators.

mod covariance;
mod model;
mod operators;
pub mod rng;
mod simulate;

pub use covariance::{covariances, CovarianceBundle};
pub use model::{LtiModel, ModelSpec, Regime};
pub use operators::{rollout_operators, RolloutOperators};
pub use simulate::{
    closed_loop_simulate, innovations_simulate, sample_autocov, simulate, simulate_with,
    InputSource, Trajectory,
};
