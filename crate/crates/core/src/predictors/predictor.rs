use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// How a predictor was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    /// One-step least squares, rolled out recursively.
    SingleStepRollout,
    /// Unconstrained least squares on the stacked `H`-step targets.
    DirectMultiStep,
    /// One-step parameterisation trained on the `H`-step loss by gradient descent.
    StructuredGd,
}

impl Structure {
    pub fn as_str(self) -> &'static str {
        match self {
            Structure::SingleStepRollout => "single_step",
            Structure::DirectMultiStep => "multi_step",
            Structure::StructuredGd => "structured_gd",
        }
    }
}

/// One-step parameters `(G_y, G_u)` of a structured predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneStep {
    pub g_y: Matrix,
    pub g_u: Matrix,
}

/// A fitted `H`-step linear map `ŷ_{t+1:t+H} = G [y_t; u_{t:t+H-1}]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    pub structure: Structure,
    pub horizon: usize,
    pub output_dim: usize,
    pub input_dim: usize,
    pub g: Matrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<OneStep>,
}

impl Predictor {
    pub fn direct(g: Matrix, horizon: usize, output_dim: usize, input_dim: usize) -> Result<Self> {
        if g.shape() != (horizon * output_dim, output_dim + horizon * input_dim) {
            return Err(Error::ShapeMismatch(format!(
                "G is {}x{}, expected {}x{}",
                g.rows(),
                g.cols(),
                horizon * output_dim,
                output_dim + horizon * input_dim
            )));
        }
        if !g.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(Predictor { structure: Structure::DirectMultiStep, horizon, output_dim, input_dim, g, base: None })
    }

    /// Columns acting on `y_t`.
    pub fn output_part(&self) -> Matrix {
        self.g.block(0, 0, self.g.rows(), self.output_dim)
    }

    /// Columns acting on `u_{t:t+H-1}`.
    pub fn input_part(&self) -> Matrix {
        self.g.block(0, self.output_dim, self.g.rows(), self.horizon * self.input_dim)
    }

    /// `G [y_t; u_{t:t+H-1}]`, the stacked forecast.
    pub fn predict(&self, y_t: &[f64], u_future: &[f64]) -> Result<Vec<f64>> {
        if y_t.len() != self.output_dim || u_future.len() != self.horizon * self.input_dim {
            return Err(Error::ShapeMismatch(format!(
                "expected y of length {} and u of length {}",
                self.output_dim,
                self.horizon * self.input_dim
            )));
        }
        let z: Vec<f64> = y_t.iter().chain(u_future).copied().collect();
        Ok(self.g.mul_vec(&z))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Predictor = serde_json::from_str(text)?;
        let expected = (p.horizon * p.output_dim, p.output_dim + p.horizon * p.input_dim);
        if p.g.shape() != expected {
            return Err(Error::ShapeMismatch("stored G does not match its dimensions".into()));
        }
        Ok(p)
    }
}

/// The composed rollout embedding: block `(k, 0) = G_y^k` and
/// block `(k, j) = G_y^{k-j} G_u` for `1 ≤ j ≤ k`.
pub fn compose_matrix(g_y: &Matrix, g_u: &Matrix, horizon: usize) -> Matrix {
    let dy = g_y.rows();
    let du = g_u.cols();
    let pw = g_y.powers(horizon + 1);
    let pu: Vec<Matrix> = (0..horizon).map(|p| pw[p].matmul(g_u)).collect();
    let mut g = Matrix::zeros(horizon * dy, dy + horizon * du);
    for k in 0..horizon {
        g.set_block(k * dy, 0, &pw[k + 1]);
        for j in 0..=k {
            g.set_block(k * dy, dy + j * du, &pu[k - j]);
        }
    }
    g
}

pub fn compose_rollout(g_y: &Matrix, g_u: &Matrix, horizon: usize) -> Predictor {
    assert!(horizon >= 1, "horizon must be positive");
    assert!(g_y.is_square() && g_u.rows() == g_y.rows(), "one-step parameter shapes");
    Predictor {
        structure: Structure::SingleStepRollout,
        horizon,
        output_dim: g_y.rows(),
        input_dim: g_u.cols(),
        g: compose_matrix(g_y, g_u, horizon),
        base: Some(OneStep { g_y: g_y.clone(), g_u: g_u.clone() }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizon_one_is_the_one_step_map() {
        let gy = Matrix::from_rows(&[vec![0.3, 1.0], vec![0.0, 0.5]]).unwrap();
        let gu = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(compose_rollout(&gy, &gu, 1).g, Matrix::hstack(&[&gy, &gu]));
    }

    #[test]
    fn zero_dynamics_keep_only_direct_input_blocks() {
        let gy = Matrix::zeros(1, 1);
        let gu = Matrix::scalar(2.0);
        let g = compose_rollout(&gy, &gu, 3).g;
        assert_eq!(
            g.to_rows(),
            vec![
                vec![0.0, 2.0, 0.0, 0.0],
                vec![0.0, 0.0, 2.0, 0.0],
                vec![0.0, 0.0, 0.0, 2.0]
            ]
        );
    }

    #[test]
    fn scalar_powers_in_state_column() {
        let g = compose_rollout(&Matrix::scalar(0.5), &Matrix::scalar(1.0), 3).g;
        assert_eq!(g.block(0, 0, 3, 1).as_slice(), &[0.5, 0.25, 0.125]);
    }

    #[test]
    fn predict_shapes_and_linearity() {
        let p = compose_rollout(&Matrix::scalar(0.5), &Matrix::scalar(1.0), 2);
        assert_eq!(p.predict(&[0.0], &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(p.predict(&[0.0], &[0.0]), Err(Error::ShapeMismatch(_))));
        // y2 = g(g y + u0) + u1
        let got = p.predict(&[2.0], &[1.0, -1.0]).unwrap();
        assert_eq!(got, vec![2.0, 0.0]);
    }

    #[test]
    fn json_round_trip() {
        let p = compose_rollout(&Matrix::scalar(0.5), &Matrix::scalar(1.0), 3);
        let q = Predictor::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(p, q);
    }
}
