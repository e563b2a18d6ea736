use super::{LtiModel, Regime};
use crate::error::{Error, Result};
use crate::numerics::{psd_sqrt, solve_dare, solve_lyapunov, Matrix};

/// Stationary and steady-state filter quantities of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceBundle {
    pub regime: Regime,
    pub horizon: usize,
    /// Stationary state covariance `Σ_x`.
    pub sigma_x: Matrix,
    /// Covariance of the regressor `z_t = [y_t; u_{t:t+H-1}]`.
    pub sigma_z: Matrix,
    /// Stationary output covariance `Σ_y`.
    pub sigma_y: Matrix,
    /// Filter Riccati solution `S` (zero when the state is observed exactly).
    pub riccati_s: Matrix,
    kalman_k: Option<Matrix>,
    /// Innovation scale `D_e = (C S Cᵀ + D_v D_vᵀ)^{1/2}`.
    pub d_e: Matrix,
    /// Stationary covariance of the filtered state `Σ_x̂`.
    pub sigma_xhat: Matrix,
}

impl CovarianceBundle {
    /// Steady-state Kalman gain; undefined for an exactly observed state.
    pub fn kalman_k(&self) -> Result<&Matrix> {
        self.kalman_k.as_ref().ok_or(Error::MissingKalman)
    }
}

pub fn covariances(model: &LtiModel, horizon: usize) -> Result<CovarianceBundle> {
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    let (a, b, c) = (model.a(), model.b(), model.c());
    let du = model.input_dim();
    let input_cov = b.matmul_t(b);
    let sigma_x = solve_lyapunov(a, &(&input_cov + &model.process_cov()))?;
    let sigma_y = (c.congruence(&sigma_x) + model.sensor_cov()).symmetrize();
    let sigma_z = Matrix::blockdiag(&[&sigma_y, &Matrix::identity(horizon * du)]);
    let dx = model.state_dim();
    let dy = model.output_dim();

    match model.regime() {
        Regime::Well => Ok(CovarianceBundle {
            regime: Regime::Well,
            horizon,
            sigma_xhat: sigma_x.clone(),
            sigma_x,
            sigma_z,
            sigma_y,
            riccati_s: Matrix::zeros(dx, dx),
            kalman_k: None,
            d_e: Matrix::zeros(dy, dy),
        }),
        Regime::Mis => {
            let r = model.sensor_cov();
            let (s, k) = solve_dare(a, c, &model.process_cov(), &r)?;
            let d_e = psd_sqrt(&(c.congruence(&s) + &r).symmetrize())?;
            let kde = k.matmul(&d_e);
            let sigma_xhat = solve_lyapunov(a, &(&input_cov + &kde.matmul_t(&kde)))?;
            Ok(CovarianceBundle {
                regime: Regime::Mis,
                horizon,
                sigma_x,
                sigma_z,
                sigma_y,
                riccati_s: s,
                kalman_k: Some(k),
                d_e,
                sigma_xhat,
            })
        }
    }
}
