use super::{CovarianceBundle, LtiModel, Regime};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Block operators mapping the regressor and future noises onto the stacked
/// outputs `y_{t+1:t+H}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutOperators {
    pub regime: Regime,
    pub horizon: usize,
    /// Well-specified: `H d_x × (d_x + H d_u)`, row block `k` is
    /// `[A^k, A^{k-1}B, …, B, 0, …]`.
    /// Misspecified: `H d_y × d_y`, block `k` is `C A^{k-1} K`.
    pub g_star: Matrix,
    /// Process-noise rollout, block `(k, j) = A^{k-j} B_w` for `j ≤ k`.
    pub gamma_w: Option<Matrix>,
    /// Filter-state rollout, block `k = C A^{k-1} (A − K C)`.
    pub phi: Option<Matrix>,
    /// Innovation rollout, `D_e` on the diagonal and `C A^{k-j-1} K D_e` below.
    pub gamma_e: Option<Matrix>,
    /// Input Markov parameters `C A^{k-j} B`, `H d_y × H d_u`.
    pub input_response: Matrix,
}

impl RolloutOperators {
    /// Full optimal predictor `[G*_y | G*_u]` over the regressor `[y_t; u_{t:t+H-1}]`.
    pub fn full_predictor(&self) -> Matrix {
        match self.regime {
            Regime::Well => self.g_star.clone(),
            Regime::Mis => Matrix::hstack(&[&self.g_star, &self.input_response]),
        }
    }

    pub fn gamma_w(&self) -> Result<&Matrix> {
        self.gamma_w.as_ref().ok_or(Error::RegimeMismatch { expected: "well-specified" })
    }

    pub fn phi(&self) -> Result<&Matrix> {
        self.phi.as_ref().ok_or(Error::MissingKalman)
    }

    pub fn gamma_e(&self) -> Result<&Matrix> {
        self.gamma_e.as_ref().ok_or(Error::MissingKalman)
    }
}

pub fn rollout_operators(
    model: &LtiModel,
    bundle: &CovarianceBundle,
    horizon: usize,
) -> Result<RolloutOperators> {
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    let (a, b, c) = (model.a(), model.b(), model.c());
    let (dx, du, dy) = (model.state_dim(), model.input_dim(), model.output_dim());
    let h = horizon;
    let pw = a.powers(h + 1);

    // C A^p B, p = 0..H-1
    let markov: Vec<Matrix> = (0..h).map(|p| c.matmul(&pw[p]).matmul(b)).collect();
    let mut input_response = Matrix::zeros(h * dy, h * du);
    for k in 0..h {
        for j in 0..=k {
            input_response.set_block(k * dy, j * du, &markov[k - j]);
        }
    }

    match model.regime() {
        Regime::Well => {
            let mut g = Matrix::zeros(h * dx, dx + h * du);
            let mut gw = Matrix::zeros(h * dx, h * dx);
            let bw_pows: Vec<Matrix> = (0..h).map(|p| pw[p].matmul(model.b_w())).collect();
            for k in 0..h {
                g.set_block(k * dx, 0, &pw[k + 1]);
                for j in 0..=k {
                    gw.set_block(k * dx, j * dx, &bw_pows[k - j]);
                }
            }
            g.set_block(0, dx, &input_response);
            Ok(RolloutOperators {
                regime: Regime::Well,
                horizon: h,
                g_star: g,
                gamma_w: Some(gw),
                phi: None,
                gamma_e: None,
                input_response,
            })
        }
        Regime::Mis => {
            let k = bundle.kalman_k()?;
            let de = &bundle.d_e;
            let a_kc = a - &k.matmul(c);
            let mut phi = Matrix::zeros(h * dy, dx);
            let mut g = Matrix::zeros(h * dy, dy);
            let mut ge = Matrix::zeros(h * dy, h * dy);
            // C A^p K for p = 0..H-1
            let cak: Vec<Matrix> = (0..h).map(|p| c.matmul(&pw[p]).matmul(k)).collect();
            for row in 0..h {
                let cap = c.matmul(&pw[row]);
                phi.set_block(row * dy, 0, &cap.matmul(&a_kc));
                g.set_block(row * dy, 0, &cak[row]);
                ge.set_block(row * dy, row * dy, de);
                for j in 0..row {
                    ge.set_block(row * dy, j * dy, &cak[row - j - 1].matmul(de));
                }
            }
            Ok(RolloutOperators {
                regime: Regime::Mis,
                horizon: h,
                g_star: g,
                gamma_w: None,
                phi: Some(phi),
                gamma_e: Some(ge),
                input_response,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::covariances;

    #[test]
    fn single_block_well_specified() {
        let m = LtiModel::new(
            LtiModel::experiment_a(0.5),
            Some(Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap()),
            Matrix::identity(2).scale(0.7),
            Matrix::identity(2),
            Matrix::zeros(2, 2),
        )
        .unwrap();
        let b = covariances(&m, 1).unwrap();
        let ops = rollout_operators(&m, &b, 1).unwrap();
        assert_eq!(ops.g_star, Matrix::hstack(&[m.a(), m.b()]));
        assert_eq!(ops.gamma_w.unwrap(), *m.b_w());
    }

    #[test]
    fn scalar_powers() {
        let a = 0.9;
        let m = LtiModel::new(
            Matrix::scalar(a),
            None,
            Matrix::scalar(1.0),
            Matrix::scalar(1.0),
            Matrix::scalar(0.0),
        )
        .unwrap();
        let b = covariances(&m, 3).unwrap();
        let ops = rollout_operators(&m, &b, 3).unwrap();
        let g: Vec<f64> = ops.g_star.as_slice().to_vec();
        let want = [a, a * a, a * a * a];
        for (x, y) in g.iter().zip(want) {
            assert!((x - y).abs() < 1e-15);
        }
        let gw = ops.gamma_w.unwrap();
        assert_eq!(gw[(0, 1)], 0.0);
        assert!((gw[(2, 0)] - a * a).abs() < 1e-15);
        assert_eq!(gw[(1, 1)], 1.0);
    }

    #[test]
    fn memoryless_misspecified_phi_vanishes_after_first_block() {
        let m = LtiModel::new(
            Matrix::zeros(2, 2),
            None,
            Matrix::identity(2),
            Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap(),
            Matrix::scalar(1.0),
        )
        .unwrap();
        let b = covariances(&m, 4).unwrap();
        let ops = rollout_operators(&m, &b, 4).unwrap();
        let phi = ops.phi.unwrap();
        assert!(phi.block(1, 0, 3, 2).is_zero());
        let ge = ops.gamma_e.unwrap();
        for k in 0..4 {
            assert_eq!(ge[(k, k)], b.d_e[(0, 0)]);
        }
    }
}
