//! Single Kerr mode coupled to a mechanical resonator: steady states, the
//! backaction self-energy and instability boundaries.

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots::{bisect, cubic_real};
use crate::units::{drive_amplitude, drive_power_dbm, hz};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Reduced single-mode description of a polariton branch. The Kerr term is
/// −(K/2)(a†a)² so a positive `kerr_plus` pulls the mode down with occupation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KerrModeConfig {
    pub omega_plus: f64,
    pub kerr_plus: f64,
    pub kappa: f64,
    pub kappa_ex: Option<f64>,
    pub kappa_0: Option<f64>,
    pub g_plus: f64,
    pub omega_m: f64,
    pub gamma_m: f64,
}

impl KerrModeConfig {
    /// Upper polariton of the second sample at ω₊/2π = 5.82 GHz.
    pub fn device2_kerr_mode() -> Self {
        Self {
            omega_plus: hz(5.82e9),
            kerr_plus: hz(8.55e6),
            kappa: hz(9e6),
            kappa_ex: None,
            kappa_0: None,
            g_plus: hz(45e3),
            omega_m: hz(3.97e6),
            gamma_m: hz(6.0),
        }
    }

    /// Upper polariton of the first sample at ω₊/2π = 5.873 GHz.
    pub fn device1_kerr_mode() -> Self {
        Self {
            omega_plus: hz(5.873e9),
            kerr_plus: hz(5.1e6),
            kappa: hz(14e6),
            g_plus: hz(13.4e3),
            ..Self::device2_kerr_mode()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) || !(self.gamma_m > 0.0) || !(self.omega_m > 0.0) {
            return Err(Error::InvalidParams("kappa, gamma_m and omega_m must be positive".into()));
        }
        if self.kerr_plus < 0.0 {
            return Err(Error::InvalidParams("kerr_plus must be non-negative".into()));
        }
        if !self.g_plus.is_finite() || !self.omega_plus.is_finite() {
            return Err(Error::InvalidParams("non-finite mode parameters".into()));
        }
        Ok(())
    }

    /// Static mechanical pull per photon: 2g²ω_m/(ω_m² + γ_m²/4).
    pub fn static_shift(&self) -> f64 {
        2.0 * self.g_plus.powi(2) * self.omega_m / (self.omega_m.powi(2) + self.gamma_m.powi(2) / 4.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DriveStrength {
    /// ε in rad/s.
    Amplitude(f64),
    /// Input power converted through an input calibration constant.
    PowerDbm { p_dbm: f64, atten_product: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    pub omega_d: f64,
    pub strength: DriveStrength,
}

impl DriveSpec {
    pub fn amplitude(omega_d: f64, epsilon: f64) -> Self {
        Self { omega_d, strength: DriveStrength::Amplitude(epsilon) }
    }

    pub fn power(omega_d: f64, p_dbm: f64, atten_product: f64) -> Self {
        Self { omega_d, strength: DriveStrength::PowerDbm { p_dbm, atten_product } }
    }

    /// Drive at detuning Δ = ω_d − ω₊ from the mode.
    pub fn detuned(cfg: &KerrModeConfig, detuning: f64, epsilon: f64) -> Self {
        Self::amplitude(cfg.omega_plus + detuning, epsilon)
    }

    pub fn epsilon(&self) -> f64 {
        match self.strength {
            DriveStrength::Amplitude(e) => e,
            DriveStrength::PowerDbm { p_dbm, atten_product } => drive_amplitude(p_dbm, self.omega_d, atten_product),
        }
    }

    pub fn power_dbm(&self, atten_product: f64) -> f64 {
        match self.strength {
            DriveStrength::PowerDbm { p_dbm, .. } => p_dbm,
            DriveStrength::Amplitude(e) => drive_power_dbm(e, self.omega_d, atten_product),
        }
    }

    pub fn detuning(&self, cfg: &KerrModeConfig) -> f64 {
        self.omega_d - cfg.omega_plus
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    pub alpha: Complex64,
    pub beta: Complex64,
}

impl SteadyState {
    pub fn photons(&self) -> f64 {
        self.alpha.norm_sqr()
    }
}

/// Mean-field steady states, ordered by increasing photon number.
pub fn steady_state(cfg: &KerrModeConfig, drive: &DriveSpec) -> Vec<SteadyState> {
    steady_state_at(cfg, drive.detuning(cfg), drive.epsilon())
}

pub fn steady_state_at(cfg: &KerrModeConfig, detuning: f64, epsilon: f64) -> Vec<SteadyState> {
    if epsilon == 0.0 {
        return vec![SteadyState { alpha: Complex64::new(0.0, 0.0), beta: Complex64::new(0.0, 0.0) }];
    }
    let c = cfg.kerr_plus + cfg.static_shift();
    let d = detuning;
    let k2 = cfg.kappa * cfg.kappa / 4.0;
    let e2 = epsilon * epsilon;
    // c² n³ + 2Δc n² + (Δ² + κ²/4) n − ε² = 0
    let roots = if c == 0.0 { vec![e2 / (d * d + k2)] } else { cubic_real(c * c, 2.0 * d * c, d * d + k2, -e2) };
    let mut out: Vec<SteadyState> = roots
        .into_iter()
        .filter(|&n| n >= 0.0)
        .map(|n| {
            let d_eff = d + c * n;
            let alpha = epsilon / Complex64::new(cfg.kappa / 2.0, -d_eff);
            let beta = -I * cfg.g_plus * n / Complex64::new(cfg.gamma_m / 2.0, cfg.omega_m);
            SteadyState { alpha, beta }
        })
        .collect();
    out.sort_by(|a, b| a.photons().total_cmp(&b.photons()));
    out.dedup_by(|a, b| (a.photons() - b.photons()).abs() <= 1e-12 * b.photons().max(1e-300));
    out
}

/// Σ_c[ω] with its building blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfEnergy {
    pub sigma: Complex64,
    /// Δ̃ = Δ + 2K|ᾱ|² − g(β̄ + β̄*)
    pub delta_eff: f64,
    /// G = gᾱ
    pub coupling: Complex64,
    /// η = Kᾱ²
    pub eta: Complex64,
}

pub fn effective_detuning(cfg: &KerrModeConfig, detuning: f64, ss: &SteadyState) -> f64 {
    detuning + 2.0 * cfg.kerr_plus * ss.photons() - cfg.g_plus * 2.0 * ss.beta.re
}

/// Σ_c[ω] = 2i|G|²(Δ̃ − |η|) / (χ_c⁻¹ χ̃_c⁻¹ − |η|²), with
/// χ_c⁻¹ = κ/2 − i(ω + Δ̃) and χ̃_c⁻¹ = κ/2 − i(ω − Δ̃).
pub fn self_energy_from(kappa: f64, delta_eff: f64, coupling: Complex64, eta: Complex64, omega: f64) -> Complex64 {
    let chi_inv = Complex64::new(kappa / 2.0, -(omega + delta_eff));
    let chi_t_inv = Complex64::new(kappa / 2.0, -(omega - delta_eff));
    2.0 * I * coupling.norm_sqr() * (delta_eff - eta.norm()) / (chi_inv * chi_t_inv - eta.norm_sqr())
}

pub fn self_energy(cfg: &KerrModeConfig, detuning: f64, ss: &SteadyState, omega: f64) -> SelfEnergy {
    let delta_eff = effective_detuning(cfg, detuning, ss);
    let coupling = cfg.g_plus * ss.alpha;
    let eta = cfg.kerr_plus * ss.alpha * ss.alpha;
    SelfEnergy { sigma: self_energy_from(cfg.kappa, delta_eff, coupling, eta, omega), delta_eff, coupling, eta }
}

/// Linearized fluctuation matrix for (δa, δa†, δb, δb†).
pub fn fluctuation_matrix(cfg: &KerrModeConfig, detuning: f64, ss: &SteadyState) -> Matrix4<Complex64> {
    let se = self_energy(cfg, detuning, ss, cfg.omega_m);
    let (d, g, eta) = (se.delta_eff, se.coupling, se.eta);
    let k = cfg.kappa / 2.0;
    let m = cfg.gamma_m / 2.0;
    let z = Complex64::new(0.0, 0.0);
    Matrix4::new(
        I * d - k, I * eta, -I * g, -I * g,
        -I * eta.conj(), -I * d - k, I * g.conj(), I * g.conj(),
        -I * g.conj(), -I * g, -I * cfg.omega_m - m, z,
        I * g.conj(), I * g, z, I * cfg.omega_m - m,
    )
}

/// Largest real part of the fluctuation-matrix spectrum.
pub fn max_growth_rate(cfg: &KerrModeConfig, detuning: f64, ss: &SteadyState) -> f64 {
    let m = fluctuation_matrix(cfg, detuning, ss);
    match m.eigenvalues() {
        Some(ev) => ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max),
        None => f64::NAN,
    }
}

/// Whether the optical sub-block (δa, δa†) alone is stable.
pub fn optically_stable(cfg: &KerrModeConfig, detuning: f64, ss: &SteadyState) -> bool {
    let se = self_energy(cfg, detuning, ss, cfg.omega_m);
    // Eigenvalues −κ/2 ± √(|η|² − Δ̃²).
    let disc = se.eta.norm_sqr() - se.delta_eff.powi(2);
    disc <= 0.0 || disc.sqrt() < cfg.kappa / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BackactionPoint {
    pub epsilon: f64,
    pub detuning: f64,
    pub photons: f64,
    /// Γ_m = γ_m + 2 Re Σ_c[ω_m]
    pub gamma_eff: f64,
    /// δω_m = Im Σ_c[ω_m]
    pub delta_omega: f64,
    pub n_branches: usize,
    /// Full linear stability of the selected branch.
    pub stable: bool,
}

/// Default branch: the lowest-occupation root, which is the one reached by
/// sweeping power up from zero.
pub fn backaction_point(cfg: &KerrModeConfig, detuning: f64, epsilon: f64) -> BackactionPoint {
    let roots = steady_state_at(cfg, detuning, epsilon);
    let ss = roots[0];
    backaction_on_branch(cfg, detuning, epsilon, &ss, roots.len())
}

pub fn backaction_on_branch(
    cfg: &KerrModeConfig,
    detuning: f64,
    epsilon: f64,
    ss: &SteadyState,
    n_branches: usize,
) -> BackactionPoint {
    let se = self_energy(cfg, detuning, ss, cfg.omega_m);
    let gamma_eff = cfg.gamma_m + 2.0 * se.sigma.re;
    let growth = max_growth_rate(cfg, detuning, ss);
    BackactionPoint {
        epsilon,
        detuning,
        photons: ss.photons(),
        gamma_eff,
        delta_omega: se.sigma.im,
        n_branches,
        stable: growth < 1e-9 * cfg.omega_m,
    }
}

/// Γ_m and δω_m on an (ε, Δ) grid, row-major in ε.
pub fn backaction_map(cfg: &KerrModeConfig, epsilons: &[f64], detunings: &[f64]) -> Vec<BackactionPoint> {
    epsilons
        .iter()
        .flat_map(|&e| detunings.iter().map(move |&d| backaction_point(cfg, d, e)))
        .collect()
}

/// Γ_m + 0 crossing tolerance for the detuning bisection: 1 kHz.
pub const BOUNDARY_TOL: f64 = std::f64::consts::TAU * 1e3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryRow {
    pub epsilon: f64,
    /// Detunings where Γ_m changes sign on the default branch.
    pub detunings: Vec<f64>,
}

/// Detunings of Γ_m = 0 for each drive amplitude, found by scanning
/// `n_scan` points over [lo, hi] and bisecting each sign change.
pub fn instability_boundary(cfg: &KerrModeConfig, epsilons: &[f64], lo: f64, hi: f64, n_scan: usize) -> Vec<BoundaryRow> {
    epsilons
        .iter()
        .map(|&eps| {
            let f = |d: f64| backaction_point(cfg, d, eps).gamma_eff;
            let n = n_scan.max(2);
            let grid: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
            let vals: Vec<f64> = grid.iter().map(|&d| f(d)).collect();
            let mut detunings = Vec::new();
            for i in 0..n - 1 {
                if vals[i].signum() != vals[i + 1].signum() {
                    if let Ok(r) = bisect(f, grid[i], grid[i + 1], BOUNDARY_TOL) {
                        detunings.push(r);
                    }
                }
            }
            BoundaryRow { epsilon: eps, detunings }
        })
        .collect()
}

/// Smallest ε at fixed detuning for which Γ_m ≤ 0 on the default branch,
/// searching ε ∈ (0, eps_max]. Returns None if the branch never goes unstable.
pub fn threshold_epsilon(cfg: &KerrModeConfig, detuning: f64, eps_max: f64) -> Option<f64> {
    let f = |e: f64| backaction_point(cfg, detuning, e).gamma_eff;
    // Log scan from eps_max·1e−6 upward; the first sign change brackets the onset.
    let n = 120;
    let lo = eps_max * 1e-6;
    let mut prev = (lo, f(lo));
    if prev.1 <= 0.0 {
        return Some(lo);
    }
    for i in 1..=n {
        let e = lo * (eps_max / lo).powf(i as f64 / n as f64);
        let v = f(e);
        if v <= 0.0 {
            let tol = 1e-9 * e;
            return bisect(f, prev.0, e, tol).ok();
        }
        prev = (e, v);
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdOptimum {
    pub detuning: f64,
    pub epsilon: f64,
    pub photons: f64,
}

/// Minimum over detuning of the threshold photon number, searched over
/// [lo, hi] with `n_scan` points then refined by golden section.
pub fn min_threshold_photons(cfg: &KerrModeConfig, lo: f64, hi: f64, n_scan: usize, eps_max: f64) -> Option<ThresholdOptimum> {
    let eval = |d: f64| -> Option<ThresholdOptimum> {
        let e = threshold_epsilon(cfg, d, eps_max)?;
        let n = steady_state_at(cfg, d, e)[0].photons();
        Some(ThresholdOptimum { detuning: d, epsilon: e, photons: n })
    };
    let n = n_scan.max(3);
    let step = (hi - lo) / (n - 1) as f64;
    let mut best: Option<ThresholdOptimum> = None;
    for i in 0..n {
        if let Some(t) = eval(lo + step * i as f64) {
            if best.is_none_or(|b| t.photons < b.photons) {
                best = Some(t);
            }
        }
    }
    let b = best?;
    let (mut a, mut c) = ((b.detuning - step).max(lo), (b.detuning + step).min(hi));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let cost = |d: f64| eval(d).map(|t| t.photons).unwrap_or(f64::INFINITY);
    let mut x1 = c - phi * (c - a);
    let mut x2 = a + phi * (c - a);
    let (mut f1, mut f2) = (cost(x1), cost(x2));
    while c - a > BOUNDARY_TOL {
        if f1 < f2 {
            c = x2;
            x2 = x1;
            f2 = f1;
            x1 = c - phi * (c - a);
            f1 = cost(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (c - a);
            f2 = cost(x2);
        }
    }
    let refined = eval(0.5 * (a + c));
    match refined {
        Some(r) if r.photons < b.photons => Some(r),
        _ => Some(b),
    }
}
