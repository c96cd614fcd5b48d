//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Orthonormal basis (as columns) of `ker M`.
///
/// Uses the eigen-decomposition of `MᵀM`; an eigenvalue counts as zero when it
/// is below `(tol · max(1, ‖M‖_F))²`. Returns an `n × 0` matrix when the kernel
/// is trivial.
pub fn null_space(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = m.ncols();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    if m.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    let gram = m.transpose() * m;
    let eig = SymmetricEigen::new(gram);
    let scale = m.norm().max(1.0);
    let cut = (tol * scale).powi(2);
    let cols: Vec<DVector<f64>> = (0..n)
        .filter(|&i| eig.eigenvalues[i] <= cut)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Smallest eigenvalue of a symmetric matrix and a unit eigenvector for it.
///
/// The input is symmetrized first. Returns `None` for a `0 × 0` matrix.
pub fn min_eigen(a: &DMatrix<f64>) -> Option<(f64, DVector<f64>)> {
    if a.nrows() == 0 {
        return None;
    }
    let eig = SymmetricEigen::new(symmetrize(a));
    let (idx, val) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))?;
    Some((val, eig.eigenvectors.column(idx).into_owned()))
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Solves `(H + μI) d = rhs`, starting at `μ = 0` and then doubling from
/// `mu0` until the Cholesky factorization succeeds. Returns the direction and
/// the shift that was used.
pub fn regularized_solve(
    h: &DMatrix<f64>,
    rhs: &DVector<f64>,
    mu0: f64,
    max_tries: usize,
) -> Option<(DVector<f64>, f64)> {
    let n = h.nrows();
    let hs = symmetrize(h);
    let mut mu = 0.0;
    for attempt in 0..=max_tries {
        let shifted = &hs + DMatrix::identity(n, n) * mu;
        if let Some(chol) = shifted.cholesky() {
            let d = chol.solve(rhs);
            if d.iter().all(|v| v.is_finite()) {
                return Some((d, mu));
            }
        }
        mu = if attempt == 0 { mu0 } else { mu * 2.0 };
    }
    None
}

/// Orthogonal projection of `v` onto the span of the orthonormal columns of `basis`.
pub fn project_onto_span(basis: &DMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
    if basis.ncols() == 0 {
        return DVector::zeros(v.len());
    }
    basis * (basis.transpose() * v)
}

/// Euclidean norm of the stacked vector `(a, b)`.
pub fn joint_norm(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a.norm_squared() + b.norm_squared()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_of_rank_one_rows() {
        // rows (0,1) and (0,1): kernel spanned by e1
        let m = DMatrix::from_row_slice(3, 2, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0]);
        let z = null_space(&m, 1e-10);
        assert_eq!(z.ncols(), 1);
        assert!((z[(0, 0)].abs() - 1.0).abs() < 1e-12);
        assert!(z[(1, 0)].abs() < 1e-12);
    }

    #[test]
    fn null_space_full_rank_is_empty() {
        let m = DMatrix::<f64>::identity(3, 3);
        assert_eq!(null_space(&m, 1e-10).ncols(), 0);
    }

    #[test]
    fn regularized_solve_shifts_indefinite() {
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        let rhs = DVector::from_vec(vec![1.0, 1.0]);
        let (d, mu) = regularized_solve(&h, &rhs, 1e-8, 200).unwrap();
        assert!(mu > 1.0);
        let resid = (&h + DMatrix::identity(2, 2) * mu) * &d - &rhs;
        assert!(resid.norm() < 1e-10);
    }

    #[test]
    fn min_eigen_of_diagonal() {
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -2.0, 5.0]));
        let (v, e) = min_eigen(&h).unwrap();
        assert!((v + 2.0).abs() < 1e-12);
        assert!((e[1].abs() - 1.0).abs() < 1e-12);
    }
}
