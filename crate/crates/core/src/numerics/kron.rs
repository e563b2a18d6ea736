use super::Matrix;

pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (br, bc) = b.shape();
    Matrix::from_fn(a.rows() * br, a.cols() * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Column-major vectorisation as an `mn × 1` column.
pub fn vec(a: &Matrix) -> Matrix {
    let (r, c) = a.shape();
    Matrix::from_fn(r * c, 1, |k, _| a[(k % r, k / r)])
}

/// Lower shift matrix: ones on the first subdiagonal.
pub fn downshift(h: usize) -> Matrix {
    Matrix::from_fn(h, h, |i, j| if i == j + 1 { 1.0 } else { 0.0 })
}

/// Commutation matrix `K_d` with `K_d vec(M) = vec(Mᵀ)` for `d × d` matrices.
pub fn commutation(d: usize) -> Matrix {
    let mut k = Matrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            k[(j * d + i, i * d + j)] = 1.0;
        }
    }
    k
}

/// All-ones matrix.
pub fn ones(r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| 1.0)
}
