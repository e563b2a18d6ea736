use super::Predictor;
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::system::{simulate, CovarianceBundle, LtiModel, Regime, RolloutOperators};

/// Steps discarded before averaging an evaluation rollout.
pub const EVAL_BURN_IN: usize = 1_000;

/// Time-averaged `H`-step squared error on a fresh rollout of `model`.
pub fn empirical_loss(p: &Predictor, model: &LtiModel, eval_len: usize, seed: u64) -> Result<f64> {
    check_dims(p, model)?;
    let h = p.horizon;
    let needed = EVAL_BURN_IN + h + 1;
    if eval_len < needed {
        return Err(Error::TooShort { needed, got: eval_len });
    }
    let tr = simulate(model, eval_len, seed);
    let (dy, du) = (p.output_dim, p.input_dim);
    let mut z = vec![0.0; dy + h * du];
    let mut total = 0.0;
    let mut count = 0usize;
    for t in EVAL_BURN_IN..eval_len - h {
        z[..dy].copy_from_slice(tr.y.row(t));
        for k in 0..h {
            z[dy + k * du..dy + (k + 1) * du].copy_from_slice(tr.u.row(t + k));
        }
        let pred = p.g.mul_vec(&z);
        for k in 0..h {
            let actual = tr.y.row(t + 1 + k);
            for i in 0..dy {
                let e = actual[i] - pred[k * dy + i];
                total += e * e;
            }
        }
        count += 1;
    }
    Ok(total / count as f64)
}

/// Exact stationary `H`-step loss of a fixed predictor.
///
/// Exactly observed state: `tr(Δ Σ_z Δᵀ) + ‖Γ_w‖²` with `Δ = G − G*`.
/// Partially observed: with `D = G*_y − G_y`,
/// `tr((Φ + D C) Σ_x̂ (Φ + D C)ᵀ) + tr(D D_e D_eᵀ Dᵀ) + ‖G*_u − G_u‖² + ‖Γ_e‖²`.
pub fn analytic_loss(
    p: &Predictor,
    model: &LtiModel,
    bundle: &CovarianceBundle,
    ops: &RolloutOperators,
) -> Result<f64> {
    check_dims(p, model)?;
    if ops.regime != model.regime() || bundle.regime != model.regime() {
        return Err(Error::RegimeMismatch { expected: model.regime().as_str_long() });
    }
    if ops.horizon != p.horizon {
        return Err(Error::ShapeMismatch(format!(
            "operators built for H={}, predictor has H={}",
            ops.horizon, p.horizon
        )));
    }
    let du = p.input_dim;
    match model.regime() {
        Regime::Well => {
            let sigma_z = Matrix::blockdiag(&[&bundle.sigma_x, &Matrix::identity(p.horizon * du)]);
            let delta = &p.g - &ops.g_star;
            Ok(delta.matmul(&sigma_z).dot(&delta) + ops.gamma_w()?.frobenius_sq())
        }
        Regime::Mis => {
            let phi = ops.phi()?;
            let d = &ops.g_star - &p.output_part();
            let e = phi + &d.matmul(model.c());
            let state = e.matmul(&bundle.sigma_xhat).dot(&e);
            let innov = d.matmul(&bundle.d_e).frobenius_sq();
            let inputs = (&ops.input_response - &p.input_part()).frobenius_sq();
            Ok(state + innov + inputs + ops.gamma_e()?.frobenius_sq())
        }
    }
}

fn check_dims(p: &Predictor, model: &LtiModel) -> Result<()> {
    if p.output_dim != model.output_dim() || p.input_dim != model.input_dim() {
        return Err(Error::ShapeMismatch(format!(
            "predictor is for d_y={}, d_u={}; model has d_y={}, d_u={}",
            p.output_dim,
            p.input_dim,
            model.output_dim(),
            model.input_dim()
        )));
    }
    Ok(())
}

impl Regime {
    pub(crate) fn as_str_long(self) -> &'static str {
        match self {
            Regime::Well => "well-specified",
            Regime::Mis => "misspecified",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictors::Structure;
    use crate::system::{covariances, rollout_operators};

    fn well_model() -> LtiModel {
        LtiModel::new(
            LtiModel::experiment_a(0.5),
            Some(Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap()),
            Matrix::identity(2),
            Matrix::identity(2),
            Matrix::zeros(2, 2),
        )
        .unwrap()
    }

    fn exact(ops: &RolloutOperators, m: &LtiModel) -> Predictor {
        Predictor {
            structure: Structure::DirectMultiStep,
            horizon: ops.horizon,
            output_dim: m.output_dim(),
            input_dim: m.input_dim(),
            g: ops.full_predictor(),
            base: None,
        }
    }

    #[test]
    fn exact_predictor_has_only_noise_loss() {
        let m = well_model();
        let b = covariances(&m, 3).unwrap();
        let ops = rollout_operators(&m, &b, 3).unwrap();
        let p = exact(&ops, &m);
        let l = analytic_loss(&p, &m, &b, &ops).unwrap();
        assert!((l - ops.gamma_w.as_ref().unwrap().frobenius_sq()).abs() < 1e-12);
    }

    #[test]
    fn misspecified_exact_operator_loss() {
        let m = LtiModel::example1();
        let b = covariances(&m, 4).unwrap();
        let ops = rollout_operators(&m, &b, 4).unwrap();
        let p = exact(&ops, &m);
        let phi = ops.phi.as_ref().unwrap();
        let want = phi.matmul(&b.sigma_xhat).dot(phi) + ops.gamma_e.as_ref().unwrap().frobenius_sq();
        assert!((analytic_loss(&p, &m, &b, &ops).unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn empirical_is_deterministic_and_close() {
        let m = well_model();
        let b = covariances(&m, 2).unwrap();
        let ops = rollout_operators(&m, &b, 2).unwrap();
        let mut p = exact(&ops, &m);
        p.g[(0, 0)] += 0.2;
        p.g[(3, 2)] -= 0.3;
        let a = empirical_loss(&p, &m, 200_000, 17).unwrap();
        assert_eq!(a, empirical_loss(&p, &m, 200_000, 17).unwrap());
        let exact_loss = analytic_loss(&p, &m, &b, &ops).unwrap();
        assert!((a - exact_loss).abs() < 0.02 * exact_loss, "{a} vs {exact_loss}");
    }

    #[test]
    fn horizon_mismatch_is_rejected() {
        let m = well_model();
        let b = covariances(&m, 2).unwrap();
        let ops = rollout_operators(&m, &b, 2).unwrap();
        let ops3 = rollout_operators(&m, &b, 3).unwrap();
        let p = exact(&ops, &m);
        assert!(analytic_loss(&p, &m, &b, &ops3).is_err());
    }
}
