use super::Matrix;
use crate::error::{Error, Result};

/// Condition-number ceiling for the normal equations.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::ShapeMismatch("cholesky of a non-square matrix".into()));
    }
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return Err(Error::Singular);
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Solve `L Lᵀ X = B` given the lower factor.
pub fn cholesky_solve(l: &Matrix, b: &Matrix) -> Matrix {
    let n = l.rows();
    assert_eq!(b.rows(), n);
    let mut x = b.clone();
    for c in 0..b.cols() {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in i + 1..n {
                s -= l[(k, i)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

/// LU factorisation with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
}

impl Lu {
    pub fn new(a: &Matrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::ShapeMismatch("LU of a non-square matrix".into()));
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| lu[(i, k)].abs().total_cmp(&lu[(j, k)].abs()))
                .unwrap_or(k);
            if lu[(p, k)].abs() <= 1e-14 * scale {
                return Err(Error::Singular);
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let t = lu[(p, j)];
                    lu[(p, j)] = lu[(k, j)];
                    lu[(k, j)] = t;
                }
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        lu[(i, j)] -= f * lu[(k, j)];
                    }
                }
            }
        }
        Ok(Lu { lu, perm })
    }

    pub fn solve(&self, b: &Matrix) -> Matrix {
        let n = self.lu.rows();
        assert_eq!(b.rows(), n, "LU solve row mismatch");
        let mut x = Matrix::from_fn(n, b.cols(), |i, j| b[(self.perm[i], j)]);
        for c in 0..b.cols() {
            for i in 0..n {
                let mut s = x[(i, c)];
                for k in 0..i {
                    s -= self.lu[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = s;
            }
            for i in (0..n).rev() {
                let mut s = x[(i, c)];
                for k in i + 1..n {
                    s -= self.lu[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = s / self.lu[(i, i)];
            }
        }
        x
    }

    pub fn inverse(&self) -> Matrix {
        self.solve(&Matrix::identity(self.lu.rows()))
    }
}

pub fn inverse(a: &Matrix) -> Result<Matrix> {
    Ok(Lu::new(a)?.inverse())
}

/// `A X = B`.
pub fn solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    Ok(Lu::new(a)?.solve(b))
}

/// `X A = B`, i.e. `B A⁻¹`.
pub fn solve_right(b: &Matrix, a: &Matrix) -> Result<Matrix> {
    Ok(Lu::new(&a.transpose())?.solve(&b.transpose()).transpose())
}

/// Least squares for stacked rows: returns `G` minimising `Σ_t ‖y_t − G z_t‖²`,
/// where row `t` of `y` is `y_tᵀ` and row `t` of `z` is `z_tᵀ`.
pub fn lstsq(y: &Matrix, z: &Matrix) -> Result<Matrix> {
    lstsq_ridge(y, z, 0.0)
}

/// [`lstsq`] with an explicit ridge `λ I` added to the Gram matrix.
pub fn lstsq_ridge(y: &Matrix, z: &Matrix, ridge: f64) -> Result<Matrix> {
    if y.rows() != z.rows() {
        return Err(Error::ShapeMismatch(format!(
            "{} target rows vs {} regressor rows",
            y.rows(),
            z.rows()
        )));
    }
    let mut gram = z.t_matmul(z);
    for i in 0..gram.rows() {
        gram[(i, i)] += ridge;
    }
    let cross = z.t_matmul(y);
    solve_normal_equations(&gram, &cross)
}

/// Solve `Gram Gᵀ = Cross` by Cholesky and return `G`.
pub fn solve_normal_equations(gram: &Matrix, cross: &Matrix) -> Result<Matrix> {
    let l = cholesky(gram).map_err(|_| Error::SingularGram(f64::INFINITY))?;
    let n = l.rows();
    if n > 0 {
        let (lo, hi) = (0..n)
            .map(|i| l[(i, i)])
            .fold((f64::INFINITY, 0.0_f64), |(lo, hi), d| (lo.min(d), hi.max(d)));
        let cond = (hi / lo).powi(2);
        if !(cond <= MAX_GRAM_CONDITION) {
            return Err(Error::SingularGram(cond));
        }
    }
    Ok(cholesky_solve(&l, cross).transpose())
}
