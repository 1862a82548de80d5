use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{transmon_frequency, DeviceParams, FluxPoint};
use crate::error::{Error, Result};

type CMat = DMatrix<Complex64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LindbladConfig {
    pub dim_cavity: usize,
    pub dim_transmon: usize,
    pub n_th_cavity: f64,
    pub n_th_transmon: f64,
    /// Transmon energy decay, rad/s.
    pub gamma_q: f64,
    /// Cavity drive amplitude, rad/s.
    pub drive_amp: f64,
    /// Drive frequency, rad/s; the frame rotates here.
    pub drive_freq: f64,
}

impl LindbladConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim_cavity < 2 || self.dim_transmon < 2 {
            return Err(Error::InvalidParams("Hilbert-space dimensions must be at least 2".into()));
        }
        if self.dim_cavity * self.dim_transmon > 16 {
            return Err(Error::InvalidParams("dim_cavity * dim_transmon must not exceed 16".into()));
        }
        if !(self.n_th_cavity >= 0.0 && self.n_th_transmon >= 0.0) {
            return Err(Error::InvalidParams("thermal occupations must be non-negative".into()));
        }
        if !(self.gamma_q > 0.0) {
            return Err(Error::InvalidParams("gamma_q must be positive".into()));
        }
        Ok(())
    }
}

fn annihilation(d: usize) -> CMat {
    let mut a = CMat::zeros(d, d);
    for n in 1..d {
        a[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    a
}

fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

fn dagger(m: &CMat) -> CMat {
    m.adjoint()
}

/// Column-stacked superoperator of the dissipator D[L].
fn dissipator(l: &CMat) -> CMat {
    let d = l.nrows();
    let id = identity(d);
    let ldl = dagger(l) * l;
    let lbar = l.map(|z| z.conj());
    lbar.kronecker(l) - id.kronecker(&ldl) * Complex64::new(0.5, 0.0)
        - ldl.transpose().kronecker(&id) * Complex64::new(0.5, 0.0)
}

/// Steady-state density matrix in the frame rotating at `cfg.drive_freq`.
///
/// Ordering: index = n_c · dim_transmon + n_q.
pub fn lindblad_steady_state(
    omega_c: f64,
    omega_q: f64,
    j: f64,
    alpha_t: f64,
    kappa: f64,
    cfg: &LindbladConfig,
) -> Result<CMat> {
    cfg.validate()?;
    let (dc, dq) = (cfg.dim_cavity, cfg.dim_transmon);
    let d = dc * dq;
    let a = annihilation(dc).kronecker(&identity(dq));
    let c = identity(dc).kronecker(&annihilation(dq));
    let ad = dagger(&a);
    let cd = dagger(&c);
    let r = |x: f64| Complex64::new(x, 0.0);

    let h = (&ad * &a) * r(omega_c - cfg.drive_freq) + (&cd * &c) * r(omega_q - cfg.drive_freq)
        - (&cd * &cd * &c * &c) * r(alpha_t / 2.0)
        + (&ad * &c + &a * &cd) * r(j)
        + (&a + &ad) * r(cfg.drive_amp);

    let id = identity(d);
    let minus_i = Complex64::new(0.0, -1.0);
    let mut liou = (id.kronecker(&h) - h.transpose().kronecker(&id)) * minus_i;
    let rates = [
        (kappa * (cfg.n_th_cavity + 1.0), &a),
        (kappa * cfg.n_th_cavity, &ad),
        (cfg.gamma_q * (cfg.n_th_transmon + 1.0), &c),
        (cfg.gamma_q * cfg.n_th_transmon, &cd),
    ];
    for (rate, op) in rates {
        if rate > 0.0 {
            liou += dissipator(op) * r(rate);
        }
    }

    // Replace the first equation with Tr ρ = 1. Rows are scaled by κ to keep the
    // trace row commensurate with the rest.
    let n = d * d;
    let mut rhs = nalgebra::DVector::<Complex64>::zeros(n);
    for col in 0..n {
        liou[(0, col)] = Complex64::new(0.0, 0.0);
    }
    for i in 0..d {
        liou[(0, i + i * d)] = r(kappa);
    }
    rhs[0] = r(kappa);

    let lu = liou.clone().lu();
    let sol = lu.solve(&rhs);
    let ok = sol.as_ref().map(|v| v.iter().all(|z| z.re.is_finite() && z.im.is_finite())).unwrap_or(false);
    if !ok {
        let sv = liou.singular_values();
        let cond = sv.max() / sv.min();
        return Err(Error::Singular { cond });
    }
    let v = sol.unwrap();
    let mut rho = CMat::zeros(d, d);
    for col in 0..d {
        for row in 0..d {
            rho[(row, col)] = v[row + col * d];
        }
    }
    // Symmetrize away round-off.
    let rho = (&rho + rho.adjoint()) * r(0.5);
    Ok(rho)
}

/// ⟨a⟩ from a steady state with the same ordering.
pub fn cavity_expectation(rho: &CMat, dim_cavity: usize, dim_transmon: usize) -> Complex64 {
    let a = annihilation(dim_cavity).kronecker(&identity(dim_transmon));
    (&a * rho).trace()
}

/// |S21| ∝ |⟨a⟩| κ_b / 2ε over a grid of drive frequencies; 1 on a bare
/// resonant cavity.
pub fn lindblad_transmission(
    params: &DeviceParams,
    flux: &FluxPoint,
    cfg: &LindbladConfig,
    freq_grid: &[f64],
) -> Result<Vec<f64>> {
    let wq = transmon_frequency(params, flux.phi_ratio);
    lindblad_transmission_at(params.omega_c, wq, params.j, params.alpha_t, params.kappa_b, cfg, freq_grid)
}

pub fn lindblad_transmission_at(
    omega_c: f64,
    omega_q: f64,
    j: f64,
    alpha_t: f64,
    kappa: f64,
    cfg: &LindbladConfig,
    freq_grid: &[f64],
) -> Result<Vec<f64>> {
    if cfg.drive_amp <= 0.0 {
        return Err(Error::InvalidParams("transmission needs a non-zero probe amplitude".into()));
    }
    freq_grid
        .iter()
        .map(|&w| {
            let c = LindbladConfig { drive_freq: w, ..cfg.clone() };
            let rho = lindblad_steady_state(omega_c, omega_q, j, alpha_t, kappa, &c)?;
            let a = cavity_expectation(&rho, cfg.dim_cavity, cfg.dim_transmon);
            Ok(a.norm() * kappa / (2.0 * cfg.drive_amp))
        })
        .collect()
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}
