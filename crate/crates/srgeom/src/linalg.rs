//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Singular values below `rel * σ_max` count as zero.
pub const REL_TOL: f64 = 1e-10;

pub fn rank(m: &DMatrix<f64>, rel: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel * smax).count()
}

/// Orthonormal basis (as columns) of the null space of `m`.
pub fn null_space(m: &DMatrix<f64>, rel: f64) -> DMatrix<f64> {
    let ncols = m.ncols();
    // Pad to at least square so that the SVD returns a full right basis.
    let rows = m.nrows().max(ncols);
    let mut a = DMatrix::zeros(rows, ncols);
    a.view_mut((0, 0), (m.nrows(), ncols)).copy_from(m);
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let sv = &svd.singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let cols: Vec<DVector<f64>> = (0..sv.len())
        .filter(|&i| smax == 0.0 || sv[i] <= rel * smax)
        .map(|i| vt.row(i).transpose())
        .collect();
    if cols.is_empty() {
        return DMatrix::zeros(ncols, 0);
    }
    DMatrix::from_columns(&cols)
}

/// Columns forming a basis orthonormal for the symmetric positive-definite
/// Gram matrix `g`, i.e. `B^T g B = I`.
pub fn orthonormal_basis(g: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let l = g.clone().cholesky()?.l();
    let linv = l.try_inverse()?;
    Some(linv.transpose())
}

pub fn is_positive_definite(g: &DMatrix<f64>) -> bool {
    g.clone().cholesky().is_some()
}

/// Least-squares solve of `m x = b`; returns the solution and the residual norm.
pub fn lstsq(m: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, f64) {
    let svd = m.clone().svd(true, true);
    let x = svd.solve(b, 1e-13).unwrap_or_else(|_| DVector::zeros(m.ncols()));
    let r = (m * &x - b).norm();
    (x, r)
}

/// Eigenvalues of a symmetric matrix in descending order.
pub fn sym_eigenvalues_desc(m: &DMatrix<f64>) -> Vec<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().cloned().collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
    ev
}

/// Gram–Schmidt on the given vectors under the inner product `ip`, dropping
/// vectors that are dependent to relative tolerance `rel`.
pub fn gram_schmidt<F>(vs: &[DVector<f64>], ip: F, rel: f64) -> Vec<DVector<f64>>
where
    F: Fn(&DVector<f64>, &DVector<f64>) -> f64,
{
    let mut out: Vec<DVector<f64>> = Vec::new();
    for v in vs {
        let scale = ip(v, v).sqrt();
        let mut w = v.clone();
        for u in &out {
            let c = ip(&w, u);
            w -= u * c;
        }
        let n = ip(&w, &w).sqrt();
        if n > rel * scale.max(f64::MIN_POSITIVE) && n > 0.0 {
            out.push(w / n);
        }
    }
    out
}
