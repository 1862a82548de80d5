//! Eigenvectors of small real matrices by shifted inverse iteration.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Unit eigenvector for a known eigenvalue `lambda` of the square matrix `m`.
pub(crate) fn eigenvector(m: &DMatrix<f64>, lambda: Complex64) -> DVector<Complex64> {
    let n = m.nrows();
    let mc = m.map(|v| Complex64::new(v, 0.0));
    let scale = m.norm().max(1e-300);
    let shift = lambda + Complex64::new(1e-11, 1e-11) * scale;
    let lu = (mc - DMatrix::identity(n, n) * shift).lu();
    let mut w = DVector::from_element(n, Complex64::new(1.0, 0.0));
    for _ in 0..4 {
        match lu.solve(&w) {
            Some(next) => {
                let nrm = next.norm();
                if !(nrm > 0.0) || !nrm.is_finite() {
                    break;
                }
                w = next / Complex64::new(nrm, 0.0);
            }
            None => break,
        }
    }
    w
}

/// Fraction of |w|² carried by the components in `idx`, and the relative
/// residual ‖mw − λw‖/‖m‖.
pub(crate) fn weight_and_residual(m: &DMatrix<f64>, lambda: Complex64, idx: &[usize]) -> (f64, f64) {
    let w = eigenvector(m, lambda);
    let total: f64 = w.iter().map(|c| c.norm_sqr()).sum();
    let part: f64 = idx.iter().map(|&i| w[i].norm_sqr()).sum();
    let mc = m.map(|v| Complex64::new(v, 0.0));
    let res = (&mc * &w - &w * lambda).norm() / m.norm().max(1e-300);
    (part / total.max(1e-300), res)
}
