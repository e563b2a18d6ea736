use super::{require_horizon, GapMatrices};
use crate::error::Result;
use crate::numerics::{inverse, kron, psd_sqrt, solve, Matrix};
use crate::system::{CovarianceBundle, LtiModel, Regime, RolloutOperators};

/// `M_MS^{ij} = tr(A^{|i−j|})`.
pub fn multistep_matrix(a: &Matrix, horizon: usize) -> Matrix {
    let tr: Vec<f64> = a.powers(horizon).iter().map(Matrix::trace).collect();
    Matrix::from_fn(horizon, horizon, |i, j| tr[i.abs_diff(j)])
}

/// `M_SS^{ij} = tr((I − Σ_x⁻¹ Σ_{ℓ=0}^{min(i,j)−2} A^ℓ B_w B_wᵀ A^ℓᵀ)(A^{|j−i|})ᵀ)`,
/// with the empty sum (`min(i,j) = 1`) taken as zero.
pub fn singlestep_matrix(model: &LtiModel, bundle: &CovarianceBundle, horizon: usize) -> Result<Matrix> {
    let pw = model.a().powers(horizon);
    let partial = partial_noise_sums(model, bundle, horizon)?;
    let dx = model.state_dim();
    let eye = Matrix::identity(dx);
    Ok(Matrix::from_fn(horizon, horizon, |i, j| {
        let m = i.min(j); // min(i,j) − 1 in one-based terms
        (&eye - &partial[m]).matmul_t(&pw[i.abs_diff(j)]).trace()
    }))
}

/// `P_m = Σ_x⁻¹ Σ_{ℓ=0}^{m−1} A^ℓ B_w B_wᵀ A^ℓᵀ` for `m = 0 … H−1`.
fn partial_noise_sums(model: &LtiModel, bundle: &CovarianceBundle, horizon: usize) -> Result<Vec<Matrix>> {
    let dx = model.state_dim();
    let q = model.process_cov();
    let pw = model.a().powers(horizon);
    let mut acc = Matrix::zeros(dx, dx);
    let mut out = Vec::with_capacity(horizon);
    for p in pw.iter().take(horizon) {
        out.push(solve(&bundle.sigma_x, &acc)?);
        acc += &p.congruence(&q);
    }
    Ok(out)
}

/// `tr(Γ_w ((M_MS + H d_u I) ⊗ I_{d_x}) Γ_wᵀ)`.
pub fn prop1_multistep_rate(model: &LtiModel, ops: &RolloutOperators) -> Result<f64> {
    model.require(Regime::Well)?;
    let h = ops.horizon;
    let m = &multistep_matrix(model.a(), h) + &Matrix::identity(h).scale((h * model.input_dim()) as f64);
    Ok(weighted_noise_trace(ops.gamma_w()?, &m, model.state_dim()))
}

/// `tr(Γ_w ((M_SS + d_u I) ⊗ I_{d_x}) Γ_wᵀ)`.
pub fn prop2_singlestep_rate(model: &LtiModel, bundle: &CovarianceBundle, ops: &RolloutOperators) -> Result<f64> {
    model.require(Regime::Well)?;
    let h = ops.horizon;
    let m = &singlestep_matrix(model, bundle, h)? + &Matrix::identity(h).scale(model.input_dim() as f64);
    Ok(weighted_noise_trace(ops.gamma_w()?, &m, model.state_dim()))
}

fn weighted_noise_trace(gamma_w: &Matrix, m: &Matrix, dx: usize) -> f64 {
    let w = kron(m, &Matrix::identity(dx));
    gamma_w.matmul(&w).dot(gamma_w)
}

/// The two weighting matrices and their difference.
pub fn gap_matrices(model: &LtiModel, bundle: &CovarianceBundle, horizon: usize) -> Result<GapMatrices> {
    model.require(Regime::Well)?;
    require_horizon(horizon)?;
    let m_ms = multistep_matrix(model.a(), horizon);
    let m_ss = singlestep_matrix(model, bundle, horizon)?;
    // direct entry formula tr(Σ_x⁻¹ Σ_ℓ A^ℓ B_w B_wᵀ A^ℓᵀ (A^{|j−i|})ᵀ)
    let partial = partial_noise_sums(model, bundle, horizon)?;
    let pw = model.a().powers(horizon);
    let gap = Matrix::from_fn(horizon, horizon, |i, j| partial[i.min(j)].matmul_t(&pw[i.abs_diff(j)]).trace());
    Ok(GapMatrices { m_ms, m_ss, gap, input_penalty: ((horizon - 1) * model.input_dim()) as f64 })
}

/// The gap as a sum of Gram matrices `Σ_s V_s V_sᵀ`, where `V_s` stacks
/// `s` zero rows above `v_0ᵀ, v_1ᵀ, …` with `v_ℓ = vec(Σ_x^{-1/2} A^ℓ B_w)`.
/// Positive semidefinite by construction.
pub fn gap_gram_matrix(model: &LtiModel, bundle: &CovarianceBundle, horizon: usize) -> Result<Matrix> {
    model.require(Regime::Well)?;
    let root_inv = inverse(&psd_sqrt(&bundle.sigma_x)?)?;
    let v: Vec<Matrix> =
        model.a().powers(horizon).iter().map(|p| root_inv.matmul(p).matmul(model.b_w())).collect();
    let mut g = Matrix::zeros(horizon, horizon);
    for s in 1..horizon {
        for i in s..horizon {
            for j in s..horizon {
                g[(i, j)] += v[i - s].dot(&v[j - s]);
            }
        }
    }
    Ok(g)
}
