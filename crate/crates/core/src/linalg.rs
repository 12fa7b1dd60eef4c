//! Small dense linear-algebra helpers on top of nalgebra.
//!
//! Everything here works on `DMatrix<f64>`; the problems in this crate are
//! tiny (n <= 64), so clarity wins over blocking or in-place tricks.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// `(M + M^T) / 2`.
pub fn sym(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Entry-wise dot product `A • B = trace(A^T B)`.
pub fn inner(a: &Mat, b: &Mat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Eigen-decomposition of the symmetric part, eigenvalues ascending.
pub fn sym_eig(m: &Mat) -> (Vector, Mat) {
    let n = m.nrows();
    let eig = sym(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = Vector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = Mat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn min_eig(m: &Mat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    sym(m).symmetric_eigenvalues().min()
}

pub fn max_eig(m: &Mat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    sym(m).symmetric_eigenvalues().max()
}

/// Operator (spectral) norm: the largest singular value.
pub fn op_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// Trace norm: the sum of singular values.
pub fn trace_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().sum()
}

/// Apply `f` to the eigenvalues of the symmetric part of `m`.
pub fn sym_apply(m: &Mat, f: impl Fn(f64) -> f64) -> Mat {
    let (vals, vecs) = sym_eig(m);
    let d = Mat::from_diagonal(&vals.map(f));
    &vecs * d * vecs.transpose()
}

/// Symmetric square root with eigenvalues floored at `floor`.
pub fn psd_sqrt(m: &Mat, floor: f64) -> Mat {
    sym_apply(m, |x| x.max(floor).sqrt())
}

/// Symmetric inverse square root with eigenvalues floored at `floor`.
pub fn psd_inv_sqrt(m: &Mat, floor: f64) -> Mat {
    sym_apply(m, |x| 1.0 / x.max(floor).sqrt())
}

pub fn cholesky(m: &Mat, what: &'static str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(sym(m)).ok_or(Error::NotPositiveDefinite(what))
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn spd_inverse(m: &Mat, what: &'static str) -> Result<Mat> {
    Ok(sym(&cholesky(m, what)?.inverse()))
}

/// `log det` of a symmetric positive definite matrix.
pub fn spd_log_det(m: &Mat, what: &'static str) -> Result<f64> {
    let chol = cholesky(m, what)?;
    Ok(2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>())
}

/// Largest absolute eigenvalue.
pub fn spectral_radius(m: &Mat) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::dims(
            "spectral_radius",
            "square matrix",
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    if m.nrows() == 1 {
        return Ok(m[(0, 0)].abs());
    }
    Ok(m.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

/// Numerical rank: singular values above `rel_tol * sigma_max`.
pub fn numerical_rank(m: &Mat, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().singular_values();
    let top = sv.max();
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}

/// `(A B)` side by side.
pub fn hstack(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.nrows(), b.nrows());
    let mut out = Mat::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

/// `diag(A, B)`.
pub fn block_diag(a: &Mat, b: &Mat) -> Mat {
    let n = a.nrows() + b.nrows();
    let mut out = Mat::zeros(n, n);
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    out
}

/// The n x d matrix `(I; K)`.
pub fn identity_over(k: &Mat) -> Mat {
    let d = k.ncols();
    let mut out = Mat::zeros(d + k.nrows(), d);
    out.view_mut((0, 0), (d, d)).fill_with_identity();
    out.view_mut((d, 0), k.shape()).copy_from(k);
    out
}

/// Concatenate `x` and `u` into `z = (x; u)`.
pub fn joint(x: &Vector, u: &Vector) -> Vector {
    let mut z = Vector::zeros(x.len() + u.len());
    z.rows_mut(0, x.len()).copy_from(x);
    z.rows_mut(x.len(), u.len()).copy_from(u);
    z
}

pub fn all_finite(m: &Mat) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// Row-reduction rank, used as an independent check on the SVD rank.
pub fn gaussian_rank(m: &Mat, tol: f64) -> usize {
    let mut a = m.clone();
    let (rows, cols) = a.shape();
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let mut rank = 0;
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let (pivot, val) = (rank..rows)
            .map(|r| (r, a[(r, col)].abs()))
            .fold((rank, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if val <= tol * scale {
            continue;
        }
        a.swap_rows(rank, pivot);
        for r in (rank + 1)..rows {
            let f = a[(r, col)] / a[(rank, col)];
            for c in col..cols {
                let v = a[(rank, c)];
                a[(r, c)] -= f * v;
            }
        }
        rank += 1;
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_radius_examples() {
        let nil = Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(spectral_radius(&nil).unwrap(), 0.0);
        assert!((spectral_radius(&Mat::identity(3, 3)).unwrap() - 1.0).abs() < 1e-12);
        let m = Mat::from_row_slice(2, 2, &[0.0, 2.0, 0.5, 0.0]);
        assert!((spectral_radius(&m).unwrap() - 1.0).abs() < 1e-12);
        assert!(spectral_radius(&Mat::zeros(2, 3)).is_err());
    }

    #[test]
    fn norms() {
        let m = Mat::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -4.0]);
        assert!((op_norm(&m) - 4.0).abs() < 1e-12);
        assert!((trace_norm(&m) - 7.0).abs() < 1e-12);
    }

    #[test]
    fn sqrt_roundtrip() {
        let m = Mat::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let s = psd_sqrt(&m, 1e-12);
        assert!((&s * &s - &m).norm() < 1e-12);
        let si = psd_inv_sqrt(&m, 1e-12);
        assert!((&si * &m * &si - Mat::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn rank_agreement() {
        let m = Mat::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        assert_eq!(numerical_rank(&m, 1e-9), 1);
        assert_eq!(gaussian_rank(&m, 1e-9), 1);
    }
}
