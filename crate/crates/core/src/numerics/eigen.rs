use super::Matrix;
use crate::error::{Error, Result};

const HQR_MAX_ITERS: usize = 60;

/// Eigenvalues `(re, im)` of a general real square matrix.
///
/// Balancing, Gaussian-elimination reduction to upper Hessenberg form, then
/// Francis double-shift QR with deflation; converged 2×2 blocks are solved in
/// closed form.
pub fn eigenvalues(a: &Matrix) -> Result<Vec<(f64, f64)>> {
    if !a.is_square() {
        return Err(Error::ShapeMismatch("eigenvalues of a non-square matrix".into()));
    }
    let n = a.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    // 1-based working copy keeps the index arithmetic readable.
    let mut h = vec![vec![0.0; n + 1]; n + 1];
    for i in 0..n {
        for j in 0..n {
            h[i + 1][j + 1] = a[(i, j)];
        }
    }
    balance(&mut h, n);
    hessenberg(&mut h, n);
    for i in 1..=n {
        for j in 1..i.saturating_sub(1) {
            h[i][j] = 0.0;
        }
    }
    hqr(&mut h, n)
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(a: &Matrix) -> Result<f64> {
    Ok(eigenvalues(a)?.into_iter().map(|(re, im)| re.hypot(im)).fold(0.0, f64::max))
}

fn balance(a: &mut [Vec<f64>], n: usize) {
    const RADIX: f64 = 2.0;
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 1..=n {
            let (mut r, mut c) = (0.0, 0.0);
            for j in 1..=n {
                if j != i {
                    c += a[j][i].abs();
                    r += a[i][j].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / RADIX;
                let mut f = 1.0;
                let s = c + r;
                while c < g {
                    f *= RADIX;
                    c *= sqrdx;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 1..=n {
                        a[i][j] *= g;
                    }
                    for j in 1..=n {
                        a[j][i] *= f;
                    }
                }
            }
        }
    }
}

fn hessenberg(a: &mut [Vec<f64>], n: usize) {
    for m in 2..n {
        let mut x = 0.0_f64;
        let mut i = m;
        for j in m..=n {
            if a[j][m - 1].abs() > x.abs() {
                x = a[j][m - 1];
                i = j;
            }
        }
        if i != m {
            for j in (m - 1)..=n {
                let t = a[i][j];
                a[i][j] = a[m][j];
                a[m][j] = t;
            }
            for row in a.iter_mut().take(n + 1).skip(1) {
                row.swap(i, m);
            }
        }
        if x != 0.0 {
            for i in (m + 1)..=n {
                let mut y = a[i][m - 1];
                if y != 0.0 {
                    y /= x;
                    a[i][m - 1] = y;
                    for j in m..=n {
                        a[i][j] -= y * a[m][j];
                    }
                    for j in 1..=n {
                        a[j][m] += y * a[j][i];
                    }
                }
            }
        }
    }
}

#[allow(clippy::many_single_char_names)]
fn hqr(a: &mut [Vec<f64>], n: usize) -> Result<Vec<(f64, f64)>> {
    let mut wr = vec![0.0; n + 1];
    let mut wi = vec![0.0; n + 1];
    let mut anorm = 0.0;
    for i in 1..=n {
        for j in i.saturating_sub(1).max(1)..=n {
            anorm += a[i][j].abs();
        }
    }
    let mut nn = n;
    let mut t = 0.0;
    let (mut p, mut q, mut r): (f64, f64, f64);
    let (mut x, mut y, mut z, mut w);
    while nn >= 1 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l >= 2 {
                let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[l][l - 1].abs() + s == s {
                    a[l][l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            x = a[nn][nn];
            if l == nn {
                wr[nn] = x + t;
                wi[nn] = 0.0;
                nn -= 1;
                break;
            }
            y = a[nn - 1][nn - 1];
            w = a[nn][nn - 1] * a[nn - 1][nn];
            if l == nn - 1 {
                p = 0.5 * (y - x);
                q = p * p + w;
                z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    z = p + z.copysign(p);
                    wr[nn - 1] = x + z;
                    wr[nn] = x + z;
                    if z != 0.0 {
                        wr[nn] = x - w / z;
                    }
                    wi[nn - 1] = 0.0;
                    wi[nn] = 0.0;
                } else {
                    wr[nn - 1] = x + p;
                    wr[nn] = x + p;
                    wi[nn - 1] = -z;
                    wi[nn] = z;
                }
                nn = nn.saturating_sub(2);
                break;
            }
            if its == HQR_MAX_ITERS {
                return Err(Error::NotConverged { what: "Hessenberg QR", iters: its });
            }
            if its > 0 && its % 10 == 0 {
                // exceptional shift
                t += x;
                for i in 1..=nn {
                    a[i][i] -= x;
                }
                let s = a[nn][nn - 1].abs() + a[nn - 1][nn - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            let mut m = nn - 2;
            loop {
                z = a[m][m];
                r = x - z;
                let s0 = y - z;
                p = (r * s0 - w) / a[m + 1][m] + a[m][m + 1];
                q = a[m + 1][m + 1] - z - r - s0;
                r = a[m + 2][m + 1];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                if u + v == v {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nn {
                a[i][i - 2] = 0.0;
                if i != m + 2 {
                    a[i][i - 3] = 0.0;
                }
            }
            let mut k = m;
            while k < nn {
                if k != m {
                    p = a[k][k - 1];
                    q = a[k + 1][k - 1];
                    r = 0.0;
                    if k != nn - 1 {
                        r = a[k + 2][k - 1];
                    }
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[k][k - 1] = -a[k][k - 1];
                        }
                    } else {
                        a[k][k - 1] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nn {
                        p = a[k][j] + q * a[k + 1][j];
                        if k != nn - 1 {
                            p += r * a[k + 2][j];
                            a[k + 2][j] -= p * z;
                        }
                        a[k + 1][j] -= p * y;
                        a[k][j] -= p * x;
                    }
                    let mmin = if nn < k + 3 { nn } else { k + 3 };
                    for i in l..=mmin {
                        p = x * a[i][k] + y * a[i][k + 1];
                        if k != nn - 1 {
                            p += z * a[i][k + 2];
                            a[i][k + 2] -= p * r;
                        }
                        a[i][k + 1] -= p * q;
                        a[i][k] -= p;
                    }
                }
                k += 1;
            }
            if l >= nn - 1 {
                break;
            }
        }
    }
    Ok((1..=n).map(|i| (wr[i], wi[i])).collect())
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, V)` with `A = V diag(λ) Vᵀ`; columns of `V` are the
/// eigenvectors, eigenvalues in ascending order.
pub fn symmetric_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    if !a.is_square() {
        return Err(Error::ShapeMismatch("eigen of a non-square matrix".into()));
    }
    let n = a.rows();
    let mut m = a.symmetrize();
    let mut v = Matrix::identity(n);
    let scale = m.frobenius().max(f64::MIN_POSITIVE);
    const SWEEPS: usize = 100;
    let mut converged = false;
    for _ in 0..SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..i {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged && n > 1 {
        return Err(Error::NotConverged { what: "Jacobi eigensolver", iters: SWEEPS });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let vals = order.iter().map(|&i| m[(i, i)]).collect();
    let vecs = Matrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok((vals, vecs))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &Matrix) -> Result<f64> {
    Ok(symmetric_eigen(a)?.0.first().copied().unwrap_or(0.0))
}

/// Symmetric PSD square root with clamping of tiny negative eigenvalues.
pub fn psd_sqrt(p: &Matrix) -> Result<Matrix> {
    if !p.is_square() {
        return Err(Error::ShapeMismatch("psd_sqrt of a non-square matrix".into()));
    }
    let tol = 1e-12 * p.frobenius().max(1.0);
    if p.asymmetry() > tol {
        return Err(Error::NotSymmetric);
    }
    let (vals, v) = symmetric_eigen(p)?;
    let mut roots = Vec::with_capacity(vals.len());
    for l in vals {
        if l < -tol {
            return Err(Error::NegativeEigenvalue(l));
        }
        roots.push(l.max(0.0).sqrt());
    }
    Ok(v.matmul(&Matrix::diag(&roots)).matmul_t(&v).symmetrize())
}

/// Moore–Penrose inverse of a symmetric matrix, discarding eigenvalues below
/// `rel_tol · max|λ|`.
pub fn symmetric_pinv(a: &Matrix, rel_tol: f64) -> Result<Matrix> {
    let (vals, v) = symmetric_eigen(a)?;
    let top = vals.iter().fold(0.0_f64, |m, l| m.max(l.abs()));
    let inv: Vec<f64> =
        vals.iter().map(|&l| if l.abs() > rel_tol * top { 1.0 / l } else { 0.0 }).collect();
    Ok(v.matmul(&Matrix::diag(&inv)).matmul_t(&v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_radius_examples() {
        assert_eq!(spectral_radius(&Matrix::identity(2)).unwrap(), 1.0);
        let a = Matrix::from_rows(&[vec![0.9, 1.0], vec![0.0, 0.9]]).unwrap();
        assert_eq!(spectral_radius(&a).unwrap(), 0.9);
        let rot = Matrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        assert!((spectral_radius(&rot).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigenvalues_of_companion_matrix() {
        // roots 1, 2, 3 of x^3 - 6x^2 + 11x - 6
        let a = Matrix::from_rows(&[
            vec![6.0, -11.0, 6.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
        ])
        .unwrap();
        let mut ev: Vec<f64> = eigenvalues(&a).unwrap().into_iter().map(|e| e.0).collect();
        ev.sort_by(f64::total_cmp);
        for (got, want) in ev.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-10, "{ev:?}");
        }
    }

    #[test]
    fn larger_matrix_radius() {
        // block diagonal: rotation scaled by 0.7 and a Jordan block at -0.95
        let mut a = Matrix::zeros(6, 6);
        a.set_block(0, 0, &Matrix::from_rows(&[vec![0.0, 0.7], vec![-0.7, 0.0]]).unwrap());
        a.set_block(
            2,
            2,
            &Matrix::from_rows(&[vec![-0.95, 1.0], vec![0.0, -0.95]]).unwrap(),
        );
        a[(4, 4)] = 0.3;
        a[(5, 5)] = -0.1;
        a[(4, 5)] = 2.0;
        // similarity transform with a dense matrix keeps the spectrum
        let t = Matrix::from_fn(6, 6, |i, j| if i == j { 2.0 } else { 0.1 * (i + 2 * j) as f64 });
        let b = t.matmul(&a).matmul(&super::super::inverse(&t).unwrap());
        assert!((spectral_radius(&b).unwrap() - 0.95).abs() < 1e-7);
    }

    #[test]
    fn psd_sqrt_examples() {
        assert_eq!(psd_sqrt(&Matrix::identity(3)).unwrap(), Matrix::identity(3));
        assert!((psd_sqrt(&Matrix::scalar(4.0)).unwrap()[(0, 0)] - 2.0).abs() < 1e-15);
        let p = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let r = psd_sqrt(&p).unwrap();
        // eigenvalues 1 and 3 with eigenvectors (1,-1)/√2 and (1,1)/√2
        let (s1, s3) = (1.0, 3.0_f64.sqrt());
        let want = Matrix::from_rows(&[
            vec![0.5 * (s1 + s3), 0.5 * (s3 - s1)],
            vec![0.5 * (s3 - s1), 0.5 * (s1 + s3)],
        ])
        .unwrap();
        assert!((&r - &want).max_abs() < 1e-14);
    }

    #[test]
    fn psd_sqrt_errors() {
        let ns = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]).unwrap();
        assert_eq!(psd_sqrt(&ns), Err(Error::NotSymmetric));
        assert!(matches!(psd_sqrt(&Matrix::diag(&[1.0, -0.1])), Err(Error::NegativeEigenvalue(_))));
        // tiny negative eigenvalues are clamped
        assert!(psd_sqrt(&Matrix::diag(&[1.0, -1e-14])).is_ok());
    }
}
