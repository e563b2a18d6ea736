use super::{compose_rollout, Predictor, Structure};
use crate::error::{Error, Result};
use crate::numerics::{lstsq_ridge, Matrix};
use crate::system::Trajectory;

/// Stacked regression problem for an `H`-step target.
///
/// Row `t` of `targets` is `[y_{t+1}; …; y_{t+H}]ᵀ` and row `t` of
/// `regressors` is `[y_t; u_t; …; u_{t+H-1}]ᵀ`, for `t = 0 … N−H−1`
/// (overlapping windows).
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    pub targets: Matrix,
    pub regressors: Matrix,
    pub horizon: usize,
    pub output_dim: usize,
    pub input_dim: usize,
}

impl RegressionData {
    pub fn build(data: &Trajectory, horizon: usize) -> Result<Self> {
        let n = data.len();
        let (dy, du) = (data.output_dim(), data.input_dim());
        if horizon == 0 || n <= horizon {
            return Err(Error::TooShort { needed: horizon + 1, got: n });
        }
        let rows = n - horizon;
        let mut targets = Matrix::zeros(rows, horizon * dy);
        let mut regressors = Matrix::zeros(rows, dy + horizon * du);
        for t in 0..rows {
            let trow = targets.row_mut(t);
            for k in 0..horizon {
                trow[k * dy..(k + 1) * dy].copy_from_slice(data.y.row(t + 1 + k));
            }
            let zrow = regressors.row_mut(t);
            zrow[..dy].copy_from_slice(data.y.row(t));
            for k in 0..horizon {
                zrow[dy + k * du..dy + (k + 1) * du].copy_from_slice(data.u.row(t + k));
            }
        }
        Ok(RegressionData { targets, regressors, horizon, output_dim: dy, input_dim: du })
    }

    pub fn count(&self) -> usize {
        self.targets.rows()
    }
}

/// One-step least squares: returns `(G_y, G_u)`.
pub fn fit_single_step(data: &Trajectory) -> Result<(Matrix, Matrix)> {
    fit_single_step_ridge(data, 0.0)
}

pub fn fit_single_step_ridge(data: &Trajectory, ridge: f64) -> Result<(Matrix, Matrix)> {
    let (dy, du) = (data.output_dim(), data.input_dim());
    let needed = dy + du + 1;
    if data.len() < needed {
        return Err(Error::TooShort { needed, got: data.len() });
    }
    let reg = RegressionData::build(data, 1)?;
    let g = lstsq_ridge(&reg.targets, &reg.regressors, ridge)?;
    Ok((g.block(0, 0, dy, dy), g.block(0, dy, dy, du)))
}

/// The single-step fit rolled out to horizon `H`.
pub fn fit_single_step_rollout(data: &Trajectory, horizon: usize, ridge: f64) -> Result<Predictor> {
    let (gy, gu) = fit_single_step_ridge(data, ridge)?;
    Ok(compose_rollout(&gy, &gu, horizon))
}

/// Direct multi-step least squares over all `H` row blocks at once.
pub fn fit_multi_step(data: &Trajectory, horizon: usize) -> Result<Predictor> {
    fit_multi_step_ridge(data, horizon, 0.0)
}

pub fn fit_multi_step_ridge(data: &Trajectory, horizon: usize, ridge: f64) -> Result<Predictor> {
    let (dy, du) = (data.output_dim(), data.input_dim());
    let needed = horizon + dy + horizon * du;
    if data.len() < needed {
        return Err(Error::TooShort { needed, got: data.len() });
    }
    let reg = RegressionData::build(data, horizon)?;
    let g = lstsq_ridge(&reg.targets, &reg.regressors, ridge)?;
    Ok(Predictor {
        structure: Structure::DirectMultiStep,
        horizon,
        output_dim: dy,
        input_dim: du,
        g,
        base: None,
    })
}
