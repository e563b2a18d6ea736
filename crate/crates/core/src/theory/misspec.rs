use crate::error::{Error, Result};
use crate::numerics::{downshift, inverse, kron, ones, spectral_radius, Matrix};
use crate::predictors::compose_matrix;
use crate::system::{CovarianceBundle, LtiModel, Regime, RolloutOperators};

/// Probability limit of the one-step least-squares output map,
/// `C A Σ_x Cᵀ Σ_y⁻¹`.
pub fn single_step_limit(model: &LtiModel, bundle: &CovarianceBundle) -> Result<Matrix> {
    let c = model.c();
    let cross = c.matmul(model.a()).matmul(&bundle.sigma_x).matmul_t(c);
    Ok(cross.matmul(&inverse(&bundle.sigma_y)?))
}

/// `ρ(C A Σ_x Cᵀ Σ_y⁻¹)`, never above one.
pub fn lemma1_check(model: &LtiModel, bundle: &CovarianceBundle) -> Result<f64> {
    let rho = spectral_radius(&single_step_limit(model, bundle)?)?;
    debug_assert!(rho <= 1.0 + 1e-9, "single-step limit has spectral radius {rho}");
    Ok(rho)
}

/// Irreducible loss of the direct multi-step predictor:
/// `tr(Φ (Σ_x̂ − Σ_x̂ Cᵀ Σ_y⁻¹ C Σ_x̂) Φᵀ) + ‖Γ_e‖²`.
pub fn prop3_multistep_bias(model: &LtiModel, bundle: &CovarianceBundle, ops: &RolloutOperators) -> Result<f64> {
    model.require(Regime::Mis)?;
    let c = model.c();
    let sx = &bundle.sigma_xhat;
    let proj = sx.matmul_t(c).matmul(&inverse(&bundle.sigma_y)?).matmul(c).matmul(sx);
    let phi = ops.phi()?;
    let inner = sx - &proj;
    Ok(phi.matmul(&inner).dot(phi) + ops.gamma_e()?.frobenius_sq())
}

/// Offset between the optimal `H`-step output map and the rolled-out
/// single-step limit, `M = G* − [g; g²; …; g^H]` with `g = C A Σ_x Cᵀ Σ_y⁻¹`.
pub fn singlestep_offset(model: &LtiModel, bundle: &CovarianceBundle, ops: &RolloutOperators) -> Result<Matrix> {
    let g = single_step_limit(model, bundle)?;
    let dy = model.output_dim();
    let rolled = compose_matrix(&g, &Matrix::zeros(dy, 0), ops.horizon);
    Ok(&ops.g_star - &rolled)
}

/// Irreducible loss of the rolled-out single-step predictor:
/// `tr((Φ + M C) Σ_x̂ (Φ + M C)ᵀ) + tr(M D_e D_eᵀ Mᵀ) + ‖Γ_e‖²`.
///
/// With inputs, the one-step input map converges to `C B` and its rollout
/// `g^{k−j} C B` misses the true Markov parameters; that mismatch is added.
/// It vanishes for systems without inputs.
pub fn prop4_singlestep_bias(model: &LtiModel, bundle: &CovarianceBundle, ops: &RolloutOperators) -> Result<f64> {
    model.require(Regime::Mis)?;
    let m = singlestep_offset(model, bundle, ops)?;
    let e = ops.phi()? + &m.matmul(model.c());
    let mut bias = e.matmul(&bundle.sigma_xhat).dot(&e)
        + m.matmul(&bundle.d_e).frobenius_sq()
        + ops.gamma_e()?.frobenius_sq();
    if model.input_dim() > 0 {
        let g = single_step_limit(model, bundle)?;
        let cb = model.c().matmul(model.b());
        let rolled = compose_matrix(&g, &cb, ops.horizon);
        let dy = model.output_dim();
        let rolled_u = rolled.block(0, dy, rolled.rows(), rolled.cols() - dy);
        bias += (&ops.input_response - &rolled_u).frobenius_sq();
    }
    Ok(bias)
}

fn require_no_inputs(model: &LtiModel) -> Result<()> {
    if model.input_dim() > 0 {
        return Err(Error::InvalidModel(
            "reducible-error rates for partial observation are derived for systems without inputs".into(),
        ));
    }
    Ok(())
}

/// `N · E[ε_N]` limit for the direct multi-step predictor:
/// `tr(Φ Σ_x̂ Φᵀ) tr(D_eᵀ Σ_y⁻¹ D_e) + tr(Γ_e (M₁ ⊗ I) Γ_eᵀ)
///  + 2 tr(Φ M₂ (I_H ⊗ (A Σ_x̂ Cᵀ + K D_e D_eᵀ) Σ_y⁻¹ D_e) Γ_eᵀ)`.
pub fn prop3_reducible_rate(model: &LtiModel, bundle: &CovarianceBundle, ops: &RolloutOperators) -> Result<f64> {
    model.require(Regime::Mis)?;
    require_no_inputs(model)?;
    let h = ops.horizon;
    let (a, c) = (model.a(), model.c());
    let (dx, dy) = (model.state_dim(), model.output_dim());
    let k = bundle.kalman_k()?;
    let sy_inv = inverse(&bundle.sigma_y)?;
    let de = &bundle.d_e;
    let dd = de.matmul_t(de);
    let phi = ops.phi()?;
    let ge = ops.gamma_e()?;
    let sx = &bundle.sigma_xhat;

    let t1 = phi.matmul(sx).dot(phi) * de.t_matmul(&sy_inv.matmul(de)).trace();

    let pw = a.powers(h + 1);
    // tr(Σ_y^{(i)}) for i = 1..H-1; diagonal is tr(I) = d_y
    let mut lag_traces = vec![dy as f64; h];
    for (i, lt) in lag_traces.iter_mut().enumerate().skip(1) {
        let cov = c.matmul(&pw[i]).matmul(sx).matmul_t(c) + c.matmul(&pw[i - 1]).matmul(k).matmul(&dd);
        *lt = cov.matmul(&sy_inv).trace();
    }
    let m1 = Matrix::from_fn(h, h, |i, j| lag_traces[i.abs_diff(j)]);
    let t2 = ge.matmul(&kron(&m1, &Matrix::identity(dy))).dot(ge);

    let r = a.matmul(sx).matmul_t(c) + k.matmul(&dd);
    let blk = r.matmul(&sy_inv).matmul(de);
    let m2 = Matrix::hstack(&pw[..h].iter().collect::<Vec<_>>());
    let mid = kron(&Matrix::identity(h), &blk);
    debug_assert_eq!(mid.rows(), h * dx);
    let t3 = 2.0 * phi.matmul(&m2).matmul(&mid).dot(ge);
    Ok(t1 + t2 + t3)
}

/// The four summands of the closed form for `Ω(X, Y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaTerms {
    pub state: f64,
    pub cross: f64,
    pub cross_transposed: f64,
    pub noise: f64,
}

impl OmegaTerms {
    pub fn total(&self) -> f64 {
        self.state + self.cross + self.cross_transposed + self.noise
    }
}

/// Closed form for the second moment of the one-step estimation error
/// `Ẽ`, weighted by `X ⊗ Y`. With `P = C(A − KC)`, `J` the all-ones matrix
/// and `Q = P A Σ_x̂ Cᵀ + C K D_e D_eᵀ`:
///
/// `tr(Σ_y⁻¹ DDᵀ Σ_y⁻¹ X) tr(P Σ_x̂ Pᵀ Y)
///  + tr(Σ_y⁻¹ DDᵀ J Σ_y⁻¹ X) tr(Q J Y)
///  + tr(Xᵀ Σ_y⁻¹ DDᵀ J Σ_y⁻¹) tr(Yᵀ Q J)
///  + tr(Σ_y⁻¹ X) tr(DDᵀ Y)`, where `D = D_e`.
///
/// `K D_e D_eᵀ` is mapped through `C` so the sum is `d_y × d_y`.
pub fn omega_terms(x: &Matrix, y: &Matrix, model: &LtiModel, bundle: &CovarianceBundle) -> Result<OmegaTerms> {
    model.require(Regime::Mis)?;
    let dy = model.output_dim();
    if x.shape() != (dy, dy) || y.shape() != (dy, dy) {
        return Err(Error::ShapeMismatch("Omega arguments must be d_y x d_y".into()));
    }
    let (a, c) = (model.a(), model.c());
    let k = bundle.kalman_k()?;
    let sy_inv = inverse(&bundle.sigma_y)?;
    let dd = bundle.d_e.matmul_t(&bundle.d_e);
    let j = ones(dy, dy);
    let p = c.matmul(&(a - &k.matmul(c)));
    let sx = &bundle.sigma_xhat;
    let q = p.matmul(a).matmul(sx).matmul_t(c) + c.matmul(k).matmul(&dd);
    let left = sy_inv.matmul(&dd).matmul(&j).matmul(&sy_inv);
    Ok(OmegaTerms {
        state: sy_inv.matmul(&dd).matmul(&sy_inv).matmul(x).trace() * p.matmul(sx).matmul_t(&p).matmul(y).trace(),
        cross: left.matmul(x).trace() * q.matmul(&j).matmul(y).trace(),
        cross_transposed: x.t_matmul(&left).trace() * y.t_matmul(&q).matmul(&j).trace(),
        noise: sy_inv.matmul(x).trace() * dd.matmul(y).trace(),
    })
}

pub fn omega(x: &Matrix, y: &Matrix, model: &LtiModel, bundle: &CovarianceBundle) -> Result<f64> {
    Ok(omega_terms(x, y, model, bundle)?.total())
}

/// `N · E[ε_N]` limit for the rolled-out single-step predictor (Θ):
///
/// `Σ_{i,j} Ω((F Σ_y Fᵀ)_{ij}, (ΓᵀΓ)_{ij})
///        + Ω(Γ_{ij} J, (Γᵀ (L_H ⊗ I)ᵀ (M Σ_y + Φ Σ_x Cᵀ) Fᵀ)_{ij} J)`,
///
/// where `Γ` is the block lower-triangular Toeplitz matrix of powers of
/// `g = C A Σ_x Cᵀ Σ_y⁻¹`, `F` its first block column and `M` the
/// single-step offset.
pub fn prop4_reducible_rate(model: &LtiModel, bundle: &CovarianceBundle, ops: &RolloutOperators) -> Result<f64> {
    model.require(Regime::Mis)?;
    require_no_inputs(model)?;
    let h = ops.horizon;
    let dy = model.output_dim();
    let g = single_step_limit(model, bundle)?;
    let gp = g.powers(h);
    let mut gamma = Matrix::zeros(h * dy, h * dy);
    for i in 0..h {
        for j in 0..=i {
            gamma.set_block(i * dy, j * dy, &gp[i - j]);
        }
    }
    let f = gamma.block(0, 0, h * dy, dy);
    let m = singlestep_offset(model, bundle, ops)?;
    let phi = ops.phi()?;
    let j = ones(dy, dy);

    let fsf = f.matmul(&bundle.sigma_y).matmul_t(&f);
    let gtg = gamma.t_matmul(&gamma);
    let shift = kron(&downshift(h), &Matrix::identity(dy));
    let drift = m.matmul(&bundle.sigma_y) + phi.matmul(&bundle.sigma_x).matmul_t(model.c());
    let second = gamma.t_matmul(&shift.t_matmul(&drift)).matmul_t(&f);

    let blk = |mat: &Matrix, i: usize, k: usize| mat.block(i * dy, k * dy, dy, dy);
    let mut theta = 0.0;
    for i in 0..h {
        for k in 0..h {
            theta += omega(&blk(&fsf, i, k), &blk(&gtg, i, k), model, bundle)?;
            theta += omega(
                &blk(&gamma, i, k).matmul(&j),
                &blk(&second, i, k).matmul(&j),
                model,
                bundle,
            )?;
        }
    }
    Ok(theta)
}
