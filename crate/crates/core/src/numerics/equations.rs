use super::{eigen::spectral_radius, decomp::Lu, Matrix};
use crate::error::{Error, Result};

const MAX_ITERS: usize = 10_000;
const TOL: f64 = 1e-12;
const RESIDUAL_TOL: f64 = 1e-10;

/// Stationary solution of `Σ = A Σ Aᵀ + Q` by the doubling iteration
/// `Σ ← Σ + A_k Σ A_kᵀ`, `A_k ← A_k²`.
pub fn solve_lyapunov(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    if !a.is_square() || q.shape() != a.shape() {
        return Err(Error::ShapeMismatch("Lyapunov operands".into()));
    }
    let rho = spectral_radius(a)?;
    if rho >= 1.0 - 1e-9 {
        return Err(Error::UnstableA(rho));
    }
    let mut sigma = doubling(a, &q.symmetrize())?;
    // One pass of iterative refinement covers strongly non-normal A, where
    // the doubled powers lose a few digits.
    for _ in 0..3 {
        let res = lyapunov_residual(a, q, &sigma);
        if res <= RESIDUAL_TOL * sigma.frobenius().max(1.0) {
            return Ok(sigma);
        }
        let r = a.congruence(&sigma) + q - &sigma;
        sigma = (sigma + doubling(a, &r.symmetrize())?).symmetrize();
    }
    let res = lyapunov_residual(a, q, &sigma);
    if res <= RESIDUAL_TOL * sigma.frobenius().max(1.0) {
        Ok(sigma)
    } else {
        Err(Error::NotConverged { what: "Lyapunov doubling", iters: MAX_ITERS })
    }
}

fn doubling(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    let mut sigma = q.clone();
    let mut ak = a.clone();
    for _ in 0..MAX_ITERS {
        let inc = ak.congruence(&sigma);
        sigma += &inc;
        sigma = sigma.symmetrize();
        if inc.frobenius() <= TOL * sigma.frobenius().max(1.0) {
            return Ok(sigma);
        }
        ak = ak.matmul(&ak);
        if !ak.is_finite() {
            break;
        }
    }
    Err(Error::NotConverged { what: "Lyapunov doubling", iters: MAX_ITERS })
}

pub fn lyapunov_residual(a: &Matrix, q: &Matrix, sigma: &Matrix) -> f64 {
    (sigma - &a.congruence(sigma) - q).frobenius()
}

/// Stabilising solution of the filter Riccati equation
/// `S = A S Aᵀ − A S Cᵀ (C S Cᵀ + R)⁻¹ C S Aᵀ + Q`, with the Kalman gain
/// `K = A S Cᵀ (C S Cᵀ + R)⁻¹`.
///
/// Solved by the structured doubling algorithm on the dual control problem,
/// followed by a few plain Riccati sweeps if the residual is not yet tight.
pub fn solve_dare(a: &Matrix, c: &Matrix, q: &Matrix, r: &Matrix) -> Result<(Matrix, Matrix)> {
    let n = a.rows();
    if !a.is_square() || c.cols() != n || q.shape() != (n, n) || r.shape() != (c.rows(), c.rows())
    {
        return Err(Error::ShapeMismatch("Riccati operands".into()));
    }
    let r_inv = Lu::new(r).map_err(|_| Error::SingularInnovations)?.inverse();
    let mut ak = a.transpose();
    let mut gk = c.t_matmul(&r_inv.matmul(c)).symmetrize();
    let mut hk = q.symmetrize();
    let eye = Matrix::identity(n);
    let mut done = false;
    for _ in 0..100 {
        let w = &eye + &gk.matmul(&hk);
        let w_lu = Lu::new(&w).map_err(|_| Error::NotConverged { what: "Riccati doubling", iters: 0 })?;
        let winv_a = w_lu.solve(&ak);
        let winv_g = w_lu.solve(&gk);
        let h_next = (&hk + &ak.t_matmul(&hk.matmul(&winv_a))).symmetrize();
        let g_next = (&gk + &ak.matmul(&winv_g).matmul_t(&ak)).symmetrize();
        let a_next = ak.matmul(&winv_a);
        let delta = (&h_next - &hk).frobenius();
        hk = h_next;
        gk = g_next;
        ak = a_next;
        if !hk.is_finite() {
            break;
        }
        if delta <= TOL * hk.frobenius().max(1.0) {
            done = true;
            break;
        }
    }
    if !done || !hk.is_finite() {
        return Err(Error::NotConverged { what: "Riccati doubling", iters: 100 });
    }
    let mut s = hk;
    for _ in 0..MAX_ITERS {
        if riccati_residual(a, c, q, r, &s)? <= RESIDUAL_TOL * s.frobenius().max(1.0) {
            let k = kalman_gain(a, c, r, &s)?;
            return Ok((s, k));
        }
        s = riccati_step(a, c, q, r, &s)?;
    }
    Err(Error::NotConverged { what: "Riccati refinement", iters: MAX_ITERS })
}

pub fn kalman_gain(a: &Matrix, c: &Matrix, r: &Matrix, s: &Matrix) -> Result<Matrix> {
    let innov = c.congruence(s) + r;
    let lu = Lu::new(&innov).map_err(|_| Error::SingularInnovations)?;
    // K = A S Cᵀ innov⁻¹, innov symmetric
    Ok(lu.solve(&c.matmul(s).matmul_t(a)).transpose())
}

fn riccati_step(a: &Matrix, c: &Matrix, q: &Matrix, r: &Matrix, s: &Matrix) -> Result<Matrix> {
    let k = kalman_gain(a, c, r, s)?;
    let asc_t = a.matmul(s).matmul_t(c);
    Ok((a.congruence(s) - k.matmul_t(&asc_t) + q).symmetrize())
}

pub fn riccati_residual(a: &Matrix, c: &Matrix, q: &Matrix, r: &Matrix, s: &Matrix) -> Result<f64> {
    Ok((riccati_step(a, c, q, r, s)? - s).frobenius())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lyapunov_trivial_and_scalar() {
        let s = solve_lyapunov(&Matrix::zeros(2, 2), &Matrix::identity(2)).unwrap();
        assert_eq!(s, Matrix::identity(2));
        let s = solve_lyapunov(&Matrix::scalar(0.9), &Matrix::scalar(1.0)).unwrap();
        assert!((s[(0, 0)] - 1.0 / (1.0 - 0.81)).abs() < 1e-10);
    }

    #[test]
    fn lyapunov_matches_truncated_series() {
        let a = Matrix::from_rows(&[vec![0.9, 1.0], vec![0.0, 0.9]]).unwrap();
        let q = Matrix::identity(2);
        let mut series = Matrix::zeros(2, 2);
        let mut ak = Matrix::identity(2);
        for _ in 0..10_000 {
            series += &ak.congruence(&q);
            ak = ak.matmul(&a);
        }
        let s = solve_lyapunov(&a, &q).unwrap();
        assert!((&s - &series).max_abs() <= 1e-9 * series.max_abs());
    }

    #[test]
    fn lyapunov_rejects_unstable() {
        assert!(matches!(
            solve_lyapunov(&Matrix::scalar(1.0), &Matrix::scalar(1.0)),
            Err(Error::UnstableA(_))
        ));
    }

    #[test]
    fn dare_zero_dynamics() {
        let q = Matrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let c = Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let (s, k) = solve_dare(&Matrix::zeros(2, 2), &c, &q, &Matrix::scalar(1.0)).unwrap();
        assert!((&s - &q).max_abs() < 1e-12);
        assert!(k.max_abs() < 1e-12);
    }

    #[test]
    fn dare_scalar_closed_form() {
        // s = a²s − a²s²/(s+r) + q  ⇔  s² + (r − a²r − q) s − q r = 0
        let (a, q, r) = (0.9_f64, 1.0, 1.0);
        let b = r - a * a * r - q;
        let s_ref = 0.5 * (-b + (b * b + 4.0 * q * r).sqrt());
        let k_ref = a * s_ref / (s_ref + r);
        let (s, k) = solve_dare(
            &Matrix::scalar(a),
            &Matrix::scalar(1.0),
            &Matrix::scalar(q),
            &Matrix::scalar(r),
        )
        .unwrap();
        assert!((s[(0, 0)] - s_ref).abs() < 1e-12);
        assert!((k[(0, 0)] - k_ref).abs() < 1e-12);
    }

    #[test]
    fn dare_matches_long_recursion() {
        let a = Matrix::from_rows(&[vec![0.9, 1.0], vec![0.0, 0.9]]).unwrap();
        let c = Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let q = Matrix::identity(2);
        let r = Matrix::scalar(1.0);
        let mut s_ref = q.clone();
        for _ in 0..10_000 {
            s_ref = riccati_step(&a, &c, &q, &r, &s_ref).unwrap();
        }
        let (s, k) = solve_dare(&a, &c, &q, &r).unwrap();
        assert!((&s - &s_ref).max_abs() < 1e-9);
        let acl = &a - &k.matmul(&c);
        assert!(spectral_radius(&acl).unwrap() < 1.0);
    }
}
