#![allow(dead_code)]

use phl_core::numerics::spectral_radius;
use phl_core::system::rng::{GaussianStream, NoiseStream};
use phl_core::{LtiModel, Matrix};

pub fn gaussian(seed: u64) -> GaussianStream {
    GaussianStream::new(seed, NoiseStream::Innovation)
}

pub fn random_matrix(g: &mut GaussianStream, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| g.next())
}

/// Gaussian matrix rescaled to spectral radius `rho`.
pub fn stable_matrix(g: &mut GaussianStream, n: usize, rho: f64) -> Matrix {
    loop {
        let m = random_matrix(g, n, n);
        let r = spectral_radius(&m).unwrap();
        if r > 1e-3 {
            return m.scale(rho / r);
        }
    }
}

/// Partially observed system with `d_x ∈ 1..=4`, `d_y ≤ d_x`, no inputs.
pub fn random_mis_system(seed: u64) -> LtiModel {
    let mut g = gaussian(seed);
    let dx = 1 + (seed % 4) as usize;
    let dy = 1 + ((seed / 4) % dx as u64) as usize;
    let rho = 0.1 + 0.85 * (g.next().abs().min(3.0) / 3.0);
    let a = stable_matrix(&mut g, dx, rho);
    let bw = &Matrix::identity(dx).scale(0.5) + &random_matrix(&mut g, dx, dx).scale(0.5);
    let c = random_matrix(&mut g, dy, dx);
    let dv = &Matrix::identity(dy) + &random_matrix(&mut g, dy, dy).scale(0.3);
    LtiModel::new(a, None, bw, c, dv).unwrap()
}

/// Fully observed system with `d_x ∈ 1..=3` and `d_u` inputs.
pub fn random_well_system(seed: u64, du: usize) -> LtiModel {
    let mut g = gaussian(seed);
    let dx = 1 + (seed % 3) as usize;
    let rho = 0.05 + 0.9 * (g.next().abs().min(3.0) / 3.0);
    let a = stable_matrix(&mut g, dx, rho);
    let b = (du > 0).then(|| random_matrix(&mut g, dx, du));
    let bw = &Matrix::identity(dx) + &random_matrix(&mut g, dx, dx).scale(0.3);
    LtiModel::new(a, b, bw, Matrix::identity(dx), Matrix::zeros(dx, dx)).unwrap()
}

/// Minimiser of `tr((Φ + M C) Σ_x̂ (Φ + M C)ᵀ) + tr(M D_e D_eᵀ Mᵀ)` from the
/// normal equations, and the minimum plus `‖Γ_e‖²`.
pub fn bias_minimum(model: &LtiModel, h: usize) -> (Matrix, f64) {
    use phl_core::numerics::inverse;
    use phl_core::system::{covariances, rollout_operators};
    let b = covariances(model, h).unwrap();
    let ops = rollout_operators(model, &b, h).unwrap();
    let (phi, c, sx) = (ops.phi().unwrap(), model.c(), &b.sigma_xhat);
    let dd = b.d_e.matmul_t(&b.d_e);
    let gram = &c.matmul(sx).matmul_t(c) + &dd;
    let m = -&phi.matmul(sx).matmul_t(c).matmul(&inverse(&gram).unwrap());
    let e = phi + &m.matmul(c);
    let val = e.matmul(sx).dot(&e) + m.matmul(&dd).dot(&m) + ops.gamma_e().unwrap().frobenius_sq();
    (m, val)
}
