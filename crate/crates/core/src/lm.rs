//! Levenberg–Marquardt least squares with a finite-difference Jacobian.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Stop when the relative decrease of the cost falls below this.
    pub ftol: f64,
    /// Stop when every relative parameter step falls below this.
    pub xtol: f64,
    /// Finite-difference step, relative for |x| > 1 and absolute below.
    pub fd_step: f64,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            ftol: 1e-15,
            xtol: 1e-12,
            fd_step: 1e-7,
            lower: None,
            upper: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub params: Vec<f64>,
    /// σ²(JᵀJ)⁻¹ with σ² = SSR/(m − n).
    pub covariance: DMatrix<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    /// Indices of parameters that finished on a bound.
    pub at_bound: Vec<usize>,
}

impl LmReport {
    pub fn sigma(&self, i: usize) -> f64 {
        self.covariance[(i, i)].max(0.0).sqrt()
    }
}

fn jacobian<F>(f: &mut F, x: &[f64], r0: &DVector<f64>, step: f64) -> DMatrix<f64>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let m = r0.len();
    let n = x.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        let h = step * x[j].abs().max(1.0);
        xp[j] = x[j] + h;
        let rp = f(&xp);
        xp[j] = x[j] - h;
        let rm = f(&xp);
        xp[j] = x[j];
        for i in 0..m {
            jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * h);
        }
    }
    jac
}

fn clamp(x: &mut [f64], opts: &LmOptions) {
    for (i, v) in x.iter_mut().enumerate() {
        if let Some(lo) = &opts.lower {
            *v = v.max(lo[i]);
        }
        if let Some(hi) = &opts.upper {
            *v = v.min(hi[i]);
        }
    }
}

/// Minimize ½‖r(x)‖² starting from `x0`.
pub fn levenberg_marquardt<F>(mut residuals: F, x0: &[f64], opts: &LmOptions) -> Result<LmReport>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    clamp(&mut x, opts);
    let mut r = DVector::from_vec(residuals(&x));
    let m = r.len();
    if m < n {
        return Err(Error::Fit(format!("{m} residuals for {n} parameters")));
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite residual at the initial point".into()));
    }
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    let mut jac = jacobian(&mut residuals, &x, &r, opts.fd_step);

    while iterations < opts.max_iter {
        iterations += 1;
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        let mut accepted = false;
        for _ in 0..40 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&g))) else {
                lambda *= 10.0;
                continue;
            };
            let mut xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            clamp(&mut xn, opts);
            let rn = DVector::from_vec(residuals(&xn));
            let cn = rn.norm_squared();
            if cn.is_finite() && cn <= cost {
                let rel_step = x
                    .iter()
                    .zip(&xn)
                    .map(|(a, b)| (a - b).abs() / a.abs().max(1.0))
                    .fold(0.0, f64::max);
                let rel_cost = (cost - cn) / cost.max(1e-300);
                x = xn;
                r = rn;
                cost = cn;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if rel_cost < opts.ftol || rel_step < opts.xtol {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
            if lambda > 1e16 {
                break;
            }
        }
        if !accepted {
            // No downhill step exists at any damping: a stationary point.
            converged = true;
        }
        if converged || cost == 0.0 {
            converged = true;
            break;
        }
        jac = jacobian(&mut residuals, &x, &r, opts.fd_step);
    }
    if !converged {
        return Err(Error::NoConvergence { what: "Levenberg-Marquardt", iterations });
    }

    let jac = jacobian(&mut residuals, &x, &r, opts.fd_step);
    let dof = (m - n).max(1) as f64;
    let s2 = cost / dof;
    let jtj = jac.transpose() * &jac;
    let covariance = jtj
        .clone()
        .try_inverse()
        .or_else(|| jtj.pseudo_inverse(1e-300).ok())
        .map(|c| c * s2)
        .unwrap_or_else(|| DMatrix::from_element(n, n, f64::NAN));

    let mut at_bound = Vec::new();
    for i in 0..n {
        let lo = opts.lower.as_ref().map(|v| v[i]);
        let hi = opts.upper.as_ref().map(|v| v[i]);
        if lo == Some(x[i]) || hi == Some(x[i]) {
            at_bound.push(i);
        }
    }
    Ok(LmReport {
        params: x,
        covariance,
        residual_norm: cost.sqrt(),
        iterations,
        at_bound,
    })
}
