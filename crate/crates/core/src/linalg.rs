//! Small dense symmetric linear algebra on row-major slices.

use nalgebra::{DMatrix, SymmetricEigen};

pub(crate) fn to_matrix(a: &[f64], n: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, a)
}

/// Symmetric part `(A + Aᵀ)/2`.
pub(crate) fn symmetrize(a: &[f64], n: usize) -> Vec<f64> {
    let mut out = a.to_vec();
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (a[i * n + j] + a[j * n + i]);
            out[i * n + j] = m;
            out[j * n + i] = m;
        }
    }
    out
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(a: &[f64], n: usize) -> Vec<f64> {
    let m = to_matrix(&symmetrize(a, n), n);
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
pub(crate) fn spd_inverse(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let chol = to_matrix(a, n).cholesky()?;
    let inv = chol.inverse();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = inv[(i, j)];
        }
    }
    Some(symmetrize(&out, n))
}

/// Eigenvalues of the pencil `A·v = λ·B·v` for symmetric `A` and SPD `B`,
/// via Cholesky reduction `B = L·Lᵀ`, `C = L⁻¹·A·L⁻ᵀ`. Ascending.
pub fn generalized_symmetric_eigenvalues(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let l = to_matrix(&symmetrize(b, n), n).cholesky()?.unpack();
    let a = to_matrix(&symmetrize(a, n), n);
    // L⁻¹·A
    let la = l.solve_lower_triangular(&a)?;
    // (L⁻¹·(L⁻¹·A)ᵀ) = L⁻¹·A·L⁻ᵀ since A is symmetric
    let c = l.solve_lower_triangular(&la.transpose())?;
    let c = 0.5 * (&c + c.transpose());
    let mut ev: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    Some(ev)
}
