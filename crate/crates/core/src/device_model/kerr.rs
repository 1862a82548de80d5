use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{transmon_frequency, DeviceParams, FluxPoint};
use crate::error::{Error, Result};

/// Which one-excitation eigenstate the Kerr shift refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KerrEstimate {
    /// K = 2E₁ − E₂ at the default truncation (4 levels per mode).
    pub kerr: f64,
    /// Same quantity with 5 levels per mode.
    pub kerr_refined: f64,
    /// Set when the refinement moved K by more than 1%.
    pub truncation_warning: bool,
}

pub const KERR_DIM: usize = 4;

/// Transmon–cavity Hamiltonian with `dim` levels per mode. Index = n_c·dim + n_q.
pub fn ladder_hamiltonian(omega_c: f64, omega_q: f64, j: f64, alpha_t: f64, dim: usize) -> DMatrix<f64> {
    let n = dim * dim;
    let mut h = DMatrix::zeros(n, n);
    for nc in 0..dim {
        for nq in 0..dim {
            let i = nc * dim + nq;
            let (fc, fq) = (nc as f64, nq as f64);
            h[(i, i)] = omega_c * fc + omega_q * fq - 0.5 * alpha_t * fq * (fq - 1.0);
            // a c†: |nc, nq⟩ → √nc √(nq+1) |nc−1, nq+1⟩
            if nc >= 1 && nq + 1 < dim {
                let k = (nc - 1) * dim + nq + 1;
                let m = j * (fc * (fq + 1.0)).sqrt();
                h[(k, i)] += m;
                h[(i, k)] += m;
            }
        }
    }
    h
}

/// 2E₁ − E₂ for one polariton branch of a `dim`×`dim` truncation.
///
/// E₁ is the branch's one-excitation energy and E₂ the two-excitation
/// eigenstate with the largest overlap with (A†)²|0⟩, where A† creates the
/// branch's one-excitation eigenstate.
pub fn kerr_ladder(omega_c: f64, omega_q: f64, j: f64, alpha_t: f64, dim: usize, branch: Branch) -> Result<f64> {
    if dim < 2 {
        return Err(Error::InvalidParams("Kerr truncation needs at least 2 levels".into()));
    }
    kerr_from_hamiltonian(ladder_hamiltonian(omega_c, omega_q, j, alpha_t, dim), dim, branch)
}

/// [`kerr_ladder`] on an explicit ladder Hamiltonian (same ordering).
pub fn kerr_from_hamiltonian(h: DMatrix<f64>, dim: usize, branch: Branch) -> Result<f64> {
    let eig = SymmetricEigen::new(h);
    let n = dim * dim;
    let excitations = |i: usize| i / dim + i % dim;
    let weight_in = |v: &DVector<f64>, k: usize| -> f64 {
        (0..n).filter(|&i| excitations(i) == k).map(|i| v[i] * v[i]).sum()
    };

    let mut e0 = None;
    let mut ones: Vec<(f64, DVector<f64>)> = Vec::new();
    for (c, &e) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(c).into_owned();
        if weight_in(&v, 0) > 0.5 {
            e0 = Some(e);
        } else if weight_in(&v, 1) > 0.5 {
            ones.push((e, v));
        }
    }
    let e0 = e0.ok_or_else(|| Error::InvalidParams("ground state not found".into()))?;
    ones.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (e1, v1) = match branch {
        Branch::Upper => ones.last(),
        Branch::Lower => ones.first(),
    }
    .ok_or_else(|| Error::InvalidParams("one-excitation states not found".into()))?
    .clone();

    // |0,1⟩ is transmon, |1,0⟩ is cavity.
    let uq = v1[1];
    let uc = v1[dim];
    // (uq c† + uc a†)²|0⟩ = √2 uq²|0,2⟩ + 2 uq uc|1,1⟩ + √2 uc²|2,0⟩
    let mut target = DVector::zeros(n);
    target[dim + 1] = 2.0 * uq * uc;
    if dim > 2 {
        target[2] = std::f64::consts::SQRT_2 * uq * uq;
        target[2 * dim] = std::f64::consts::SQRT_2 * uc * uc;
    }
    let norm = target.norm();
    if norm == 0.0 {
        return Err(Error::InvalidParams("degenerate polariton vector".into()));
    }
    target /= norm;

    let mut best = (-1.0, 0.0);
    for (c, &e) in eig.eigenvalues.iter().enumerate() {
        let ov = eig.eigenvectors.column(c).dot(&target).abs();
        if ov > best.0 {
            best = (ov, e);
        }
    }
    Ok(2.0 * (e1 - e0) - (best.1 - e0))
}

/// Kerr shift of a polariton branch at the given flux, with a truncation check.
pub fn kerr_estimate(params: &DeviceParams, flux: &FluxPoint, branch: Branch) -> Result<KerrEstimate> {
    let wq = transmon_frequency(params, flux.phi_ratio);
    kerr_estimate_at(params.omega_c, wq, params.j, params.alpha_t, branch)
}

pub fn kerr_estimate_at(omega_c: f64, omega_q: f64, j: f64, alpha_t: f64, branch: Branch) -> Result<KerrEstimate> {
    let kerr = kerr_ladder(omega_c, omega_q, j, alpha_t, KERR_DIM, branch)?;
    let kerr_refined = kerr_ladder(omega_c, omega_q, j, alpha_t, KERR_DIM + 1, branch)?;
    let scale = kerr.abs().max(1e-12 * alpha_t);
    Ok(KerrEstimate {
        kerr,
        kerr_refined,
        truncation_warning: (kerr_refined - kerr).abs() > 0.01 * scale,
    })
}
