//! Small dense helpers on top of nalgebra.

use nalgebra::DMatrix;

/// Lower-triangular `L` with `L Lᵀ = A` for symmetric positive
/// semidefinite `A`. Zero pivots (within `tol`) produce zero columns, so
/// singular covariances are accepted.
pub(crate) fn cholesky_psd(a: &DMatrix<f64>, tol: f64) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0f64, f64::max).max(1.0);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d < -tol * scale {
            return None;
        }
        if d <= tol * scale {
            // the rest of this column must vanish as well
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                if s.abs() > 1e3 * tol.sqrt() * scale {
                    return None;
                }
            }
            continue;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

/// Matrix of the involution `K_i x = (x_1 − x_i, …, −x_i, …, x_n − x_i)`;
/// `i` is 1-based.
pub(crate) fn k_matrix(n: usize, i: usize) -> DMatrix<f64> {
    let mut k = DMatrix::<f64>::identity(n, n);
    for l in 0..n {
        k[(l, i - 1)] = -1.0;
    }
    k
}

pub(crate) fn is_symmetric(a: &DMatrix<f64>, tol: f64) -> bool {
    a.is_square() && (0..a.nrows()).all(|r| (0..r).all(|c| (a[(r, c)] - a[(c, r)]).abs() <= tol))
}
