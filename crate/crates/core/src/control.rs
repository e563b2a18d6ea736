//! Receding-horizon feedback from a fitted predictor, and its closed-loop cost.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{min_eigenvalue, solve, solve_lyapunov, spectral_radius, symmetric_pinv, Matrix};
use crate::predictors::{Predictor, Structure};
use crate::system::LtiModel;

/// Below this, `C_t C_tᵀ` of the terminal rows counts as rank deficient.
const TERMINAL_RANK_TOL: f64 = 1e-10;

/// How to treat a terminal constraint that cannot be met exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalMode {
    #[default]
    Strict,
    /// Pseudo-inverse of the KKT matrix; the constraint holds in least squares.
    MinNorm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcGain {
    /// `u_t = F y_t`.
    pub f: Matrix,
    pub horizon: usize,
    pub predictor_structure: Structure,
    /// Full optimal sequence is `u* = −W y_t`.
    pub w: Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedLoopMetrics {
    /// Stationary time-averaged `‖y_t‖² + ‖u_t‖²`; infinite when unstable.
    pub lqr_cost: f64,
    pub rho_cl: f64,
    pub stable: bool,
}

/// MPC with stage cost `‖ŷ‖² + ‖u‖²` and `ŷ_{t+H} = 0`.
///
/// Minimises `Σ_{k=1}^{H−1} ‖ŷ_{t+k}‖² + Σ_{k=0}^{H−1} ‖u_{t+k}‖²` with
/// `ŷ = Ĝ_y y_t + Ĝ_u u` over the first `H` predicted blocks of `p`. Input
/// coefficients past the MPC horizon are dropped.
pub fn synthesize_mpc(p: &Predictor, horizon: usize, mode: TerminalMode) -> Result<MpcGain> {
    let (dy, du) = (p.output_dim, p.input_dim);
    if horizon == 0 || horizon > p.horizon {
        return Err(Error::Config(format!(
            "MPC horizon {horizon} must be in 1..={} (the predictor horizon)",
            p.horizon
        )));
    }
    if du == 0 {
        return Err(Error::InvalidModel("MPC needs at least one input".into()));
    }
    let h = horizon;
    let nu = h * du;
    let gy = p.output_part();
    let gu_full = p.input_part();
    let gy_k = |k: usize| gy.block(k * dy, 0, dy, dy);
    let gu_k = |k: usize| gu_full.block(k * dy, 0, dy, nu);

    let mut q = Matrix::identity(nu);
    let mut lin = Matrix::zeros(nu, dy);
    for k in 0..h - 1 {
        let guk = gu_k(k);
        q += &guk.t_matmul(&guk);
        lin += &guk.t_matmul(&gy_k(k));
    }
    let ct = gu_k(h - 1);
    let ct_rank = min_eigenvalue(&ct.matmul_t(&ct))?;
    let scale = ct.frobenius_sq().max(1.0);

    let mut kkt = Matrix::zeros(nu + dy, nu + dy);
    kkt.set_block(0, 0, &q);
    kkt.set_block(0, nu, &ct.transpose());
    kkt.set_block(nu, 0, &ct);
    let rhs = Matrix::vstack(&[&(-&lin), &(-&gy_k(h - 1))]);

    let sol = match mode {
        TerminalMode::Strict => {
            if ct_rank <= TERMINAL_RANK_TOL * scale {
                return Err(Error::DegenerateTerminal);
            }
            solve(&kkt, &rhs).map_err(|e| match e {
                Error::Singular => Error::SingularKkt,
                other => other,
            })?
        }
        TerminalMode::MinNorm => symmetric_pinv(&kkt, 1e-12)?.matmul(&rhs),
    };
    let u_star = sol.block(0, 0, nu, dy);
    if !u_star.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(MpcGain { f: u_star.block(0, 0, du, dy), horizon: h, predictor_structure: p.structure, w: -&u_star })
}

/// Stationary cost and stability of `u_t = F y_t` applied to `model`.
pub fn closed_loop_metrics(model: &LtiModel, gain: &MpcGain) -> Result<ClosedLoopMetrics> {
    let f = &gain.f;
    if f.shape() != (model.input_dim(), model.output_dim()) {
        return Err(Error::ShapeMismatch(format!(
            "gain is {}x{}, model needs {}x{}",
            f.rows(),
            f.cols(),
            model.input_dim(),
            model.output_dim()
        )));
    }
    let bf = model.b().matmul(f);
    let a_cl = model.a() + &bf.matmul(model.c());
    let rho_cl = spectral_radius(&a_cl)?;
    if rho_cl >= 1.0 - 1e-9 {
        return Ok(ClosedLoopMetrics { lqr_cost: f64::INFINITY, rho_cl, stable: false });
    }
    let src = bf.congruence(&model.sensor_cov()) + model.process_cov();
    let sigma = solve_lyapunov(&a_cl, &src)?;
    let sigma_y = model.c().congruence(&sigma) + model.sensor_cov();
    let lqr_cost = sigma_y.trace() + f.congruence(&sigma_y).trace();
    Ok(ClosedLoopMetrics { lqr_cost, rho_cl, stable: true })
}
