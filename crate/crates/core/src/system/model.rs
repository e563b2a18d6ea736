use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{cholesky, spectral_radius, Matrix};

/// Whether the Markovian hypothesis class contains the true conditional mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `C = I` and `D_v = 0`: the state is observed exactly.
    Well,
    /// Partial or noisy observation with `D_v D_vᵀ ≻ 0`.
    Mis,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Well => "well",
            Regime::Mis => "mis",
        }
    }
}

/// `x_{t+1} = A x_t + B u_t + B_w w_t`, `y_t = C x_t + D_v v_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiModel {
    a: Matrix,
    b: Matrix,
    b_w: Matrix,
    c: Matrix,
    d_v: Matrix,
    regime: Regime,
}

/// JSON shape of a model: row-major nested arrays, `B` optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<Vec<f64>>>,
    #[serde(rename = "B_w")]
    pub b_w: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "D_v")]
    pub d_v: Vec<Vec<f64>>,
}

impl LtiModel {
    /// Validates shapes, stability and the observation-noise condition.
    /// `b = None` means the system has no inputs.
    pub fn new(a: Matrix, b: Option<Matrix>, b_w: Matrix, c: Matrix, d_v: Matrix) -> Result<Self> {
        let dx = a.rows();
        if !a.is_square() || dx == 0 {
            return Err(Error::InvalidModel("A must be square and non-empty".into()));
        }
        let b = b.unwrap_or_else(|| Matrix::zeros(dx, 0));
        if b.rows() != dx {
            return Err(Error::InvalidModel(format!("B has {} rows, expected {dx}", b.rows())));
        }
        if b_w.shape() != (dx, dx) {
            return Err(Error::InvalidModel(format!("B_w must be {dx}x{dx}")));
        }
        if c.cols() != dx || c.rows() == 0 {
            return Err(Error::InvalidModel(format!("C must have {dx} columns")));
        }
        let dy = c.rows();
        if d_v.shape() != (dy, dy) {
            return Err(Error::InvalidModel(format!("D_v must be {dy}x{dy}")));
        }
        for m in [&a, &b, &b_w, &c, &d_v] {
            if !m.is_finite() {
                return Err(Error::NonFinite);
            }
        }
        let rho = spectral_radius(&a)?;
        if rho >= 1.0 {
            return Err(Error::UnstableA(rho));
        }
        let regime = if c.is_identity() && d_v.is_zero() {
            Regime::Well
        } else if cholesky(&d_v.matmul_t(&d_v)).is_ok() {
            Regime::Mis
        } else {
            return Err(Error::InvalidModel(
                "a partially observed model needs D_v D_vᵀ positive definite".into(),
            ));
        };
        Ok(LtiModel { a, b, b_w, c, d_v, regime })
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let b = match &spec.b {
            Some(rows) if !rows.is_empty() => Some(Matrix::from_rows(rows)?),
            _ => None,
        };
        Self::new(
            Matrix::from_rows(&spec.a)?,
            b,
            Matrix::from_rows(&spec.b_w)?,
            Matrix::from_rows(&spec.c)?,
            Matrix::from_rows(&spec.d_v)?,
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ModelSpec = serde_json::from_str(text)?;
        Self::from_spec(&spec)
    }

    pub fn to_spec(&self) -> ModelSpec {
        ModelSpec {
            a: self.a.to_rows(),
            b: (self.input_dim() > 0).then(|| self.b.to_rows()),
            b_w: self.b_w.to_rows(),
            c: self.c.to_rows(),
            d_v: self.d_v.to_rows(),
        }
    }

    /// The partially observed system with `A = [[0.9, 1], [0, 0.9]]`,
    /// unit process noise, `C = [1, 0]` and unit sensor noise.
    pub fn example1() -> Self {
        Self::new(
            Matrix::from_rows(&[vec![0.9, 1.0], vec![0.0, 0.9]]).unwrap(),
            None,
            Matrix::identity(2),
            Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap(),
            Matrix::identity(1),
        )
        .expect("example system is valid")
    }

    /// The experiment family `A = [[a, 1], [0, 0.75]]`.
    pub fn experiment_a(a: f64) -> Matrix {
        Matrix::from_rows(&[vec![a, 1.0], vec![0.0, 0.75]]).expect("finite")
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }
    pub fn b(&self) -> &Matrix {
        &self.b
    }
    pub fn b_w(&self) -> &Matrix {
        &self.b_w
    }
    pub fn c(&self) -> &Matrix {
        &self.c
    }
    pub fn d_v(&self) -> &Matrix {
        &self.d_v
    }
    pub fn regime(&self) -> Regime {
        self.regime
    }
    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }
    pub fn input_dim(&self) -> usize {
        self.b.cols()
    }
    pub fn output_dim(&self) -> usize {
        self.c.rows()
    }

    /// Process noise covariance `B_w B_wᵀ`.
    pub fn process_cov(&self) -> Matrix {
        self.b_w.matmul_t(&self.b_w)
    }

    /// Sensor noise covariance `D_v D_vᵀ`.
    pub fn sensor_cov(&self) -> Matrix {
        self.d_v.matmul_t(&self.d_v)
    }

    pub fn require(&self, regime: Regime) -> Result<()> {
        if self.regime == regime {
            Ok(())
        } else {
            Err(Error::RegimeMismatch {
                expected: match regime {
                    Regime::Well => "well-specified",
                    Regime::Mis => "misspecified",
                },
            })
        }
    }
}
