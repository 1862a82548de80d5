//! Mean-field fixed points of cavity + transmon (as a Kerr oscillator) +
//! mechanics, and their linear stability from the 6×6 quadrature Jacobian.
//!
//! Amplitudes are α = x + iy (cavity), ζ = p + iq (transmon), β = u + iv
//! (mechanics), all dimensionless. Detunings are Δ₁ = ω_d − ω_c and
//! Δ₂ = ω_d − ω_q.

use nalgebra::{DMatrix, Matrix6, Vector6};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::device_model::DeviceParams;
use crate::eig::weight_and_residual;
use crate::error::{Error, Result};
use crate::kerr_backaction::{KerrModeConfig, SteadyState};
use crate::roots::bisect;
use crate::units::{drive_amplitude, hz};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreeModeParams {
    pub omega_c: f64,
    pub omega_q: f64,
    pub j: f64,
    /// Enters the flows as a 2α_T|ζ|² frequency pull.
    pub alpha_t: f64,
    pub kappa_b: f64,
    pub gamma: f64,
    pub g0: f64,
    pub omega_m: f64,
    pub gamma_m: f64,
}

impl ThreeModeParams {
    /// Second sample with the transmon 40 MHz above the cavity,
    /// κ_b/2π = 8 MHz, γ/2π = 12 MHz and g₀/2π = 300 kHz.
    pub fn fig6c() -> Self {
        let dev = DeviceParams::device2();
        Self::from_device(&dev, dev.omega_c + hz(40e6), hz(12e6), hz(300e3))
    }

    pub fn from_device(dev: &DeviceParams, omega_q: f64, gamma: f64, g0: f64) -> Self {
        Self {
            omega_c: dev.omega_c,
            omega_q,
            j: dev.j,
            alpha_t: dev.alpha_t,
            kappa_b: dev.kappa_b,
            gamma,
            g0,
            omega_m: dev.omega_m,
            gamma_m: dev.gamma_m,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("omega_c", self.omega_c), ("omega_q", self.omega_q), ("kappa_b", self.kappa_b), ("gamma", self.gamma), ("omega_m", self.omega_m), ("gamma_m", self.gamma_m)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be positive and finite, got {v}")));
            }
        }
        for (name, v) in [("J", self.j), ("alpha_T", self.alpha_t), ("g0", self.g0)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be non-negative and finite, got {v}")));
            }
        }
        Ok(())
    }

    /// ω_m + γ_m²/(4ω_m): static stiffness seen by the radiation force.
    pub fn mech_stiffness(&self) -> f64 {
        self.omega_m + self.gamma_m * self.gamma_m / (4.0 * self.omega_m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreeModeDrive {
    pub omega_d: f64,
    /// Cavity drive amplitude, rad/s.
    pub epsilon: f64,
}

impl ThreeModeDrive {
    pub fn from_power(omega_d: f64, p_dbm: f64, atten_product: f64) -> Self {
        Self { omega_d, epsilon: drive_amplitude(p_dbm, omega_d, atten_product) }
    }

    pub fn delta1(&self, params: &ThreeModeParams) -> f64 {
        self.omega_d - params.omega_c
    }

    pub fn delta2(&self, params: &ThreeModeParams) -> f64 {
        self.omega_d - params.omega_q
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ThreeModeState {
    pub x: f64,
    pub y: f64,
    pub p: f64,
    pub q: f64,
    pub u: f64,
    pub v: f64,
}

impl ThreeModeState {
    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(self.x, self.y, self.p, self.q, self.u, self.v)
    }

    pub fn from_vector(k: &Vector6<f64>) -> Self {
        Self { x: k[0], y: k[1], p: k[2], q: k[3], u: k[4], v: k[5] }
    }

    pub fn cavity_photons(&self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn transmon_photons(&self) -> f64 {
        self.p * self.p + self.q * self.q
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite())
    }
}

/// Right-hand sides f₁…f₆ of the quadrature equations of motion.
pub fn flows(params: &ThreeModeParams, drive: &ThreeModeDrive, s: &ThreeModeState) -> Vector6<f64> {
    let d1 = drive.delta1(params);
    let d2 = drive.delta2(params);
    let (kb, g, j, a, g0) = (params.kappa_b / 2.0, params.gamma / 2.0, params.j, params.alpha_t, params.g0);
    let pull = -d2 - 2.0 * a * s.transmon_photons() + 2.0 * g0 * s.u;
    Vector6::new(
        -kb * s.x - d1 * s.y + j * s.q,
        d1 * s.x - kb * s.y - j * s.p - drive.epsilon,
        -g * s.p + pull * s.q + j * s.y,
        -g * s.q - pull * s.p - j * s.x,
        -params.gamma_m / 2.0 * s.u + params.omega_m * s.v,
        -params.omega_m * s.u - params.gamma_m / 2.0 * s.v - g0 * s.transmon_photons(),
    )
}

/// Analytic Jacobian ∂fᵢ/∂kⱼ at `s`.
pub fn jacobian(params: &ThreeModeParams, drive: &ThreeModeDrive, s: &ThreeModeState) -> Matrix6<f64> {
    let d1 = drive.delta1(params);
    let d2 = drive.delta2(params);
    let (kb, g, j, a, g0, gm, wm) =
        (params.kappa_b / 2.0, params.gamma / 2.0, params.j, params.alpha_t, params.g0, params.gamma_m / 2.0, params.omega_m);
    let (p, q, u) = (s.p, s.q, s.u);
    #[rustfmt::skip]
    let m = Matrix6::new(
        -kb, -d1, 0.0, j, 0.0, 0.0,
        d1, -kb, -j, 0.0, 0.0, 0.0,
        0.0, j, -g - 4.0 * a * p * q, -d2 - 2.0 * a * p * p - 6.0 * a * q * q + 2.0 * g0 * u, 2.0 * g0 * q, 0.0,
        -j, 0.0, d2 + 6.0 * a * p * p + 2.0 * a * q * q - 2.0 * g0 * u, -g + 4.0 * a * p * q, -2.0 * g0 * p, 0.0,
        0.0, 0.0, 0.0, 0.0, -gm, wm,
        0.0, 0.0, -2.0 * g0 * p, -2.0 * g0 * q, -wm, -gm,
    );
    m
}

/// Flow norm divided by the largest rate in the problem and by max(1, |k|).
pub fn scaled_residual(params: &ThreeModeParams, drive: &ThreeModeDrive, s: &ThreeModeState) -> f64 {
    let f = flows(params, drive, s);
    let n = s.transmon_photons();
    let rate = [
        params.kappa_b,
        params.gamma,
        drive.delta1(params).abs(),
        drive.delta2(params).abs(),
        params.j,
        params.omega_m,
        2.0 * params.alpha_t * n,
        2.0 * params.g0 * s.u.abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    f.norm() / (rate * s.to_vector().norm().max(1.0))
}

/// Coefficients of the reduced steady state: A = κ_b²/4 + Δ₁²,
/// B = γ/2 + J²κ_b/(2A) and C at transmon occupation `n` and mechanical
/// displacement `u`.
fn abc(params: &ThreeModeParams, drive: &ThreeModeDrive, n: f64, u: f64) -> (f64, f64, f64) {
    let d1 = drive.delta1(params);
    let a = params.kappa_b * params.kappa_b / 4.0 + d1 * d1;
    let b = params.gamma / 2.0 + params.j * params.j * params.kappa_b / (2.0 * a);
    let c = -drive.delta2(params) - 2.0 * params.alpha_t * n + 2.0 * params.g0 * u + params.j * params.j * d1 / a;
    (a, b, c)
}

/// Transmon quadratures (p, q) given the occupation and displacement
/// that enter C.
fn transmon_quadratures(params: &ThreeModeParams, drive: &ThreeModeDrive, n: f64, u: f64) -> (f64, f64) {
    let (a, b, c) = abc(params, drive, n, u);
    let (j, k, d1, e) = (params.j, params.kappa_b, drive.delta1(params), drive.epsilon);
    let den = b * b + c * c;
    let p = -(j * d1 * c / a + j * k * b / (2.0 * a)) * e / den;
    let q = (-j * d1 * b / a + j * k * c / (2.0 * a)) * e / den;
    (p, q)
}

/// Occupation implied by a mechanical displacement: n = −u(ω_m + γ_m²/4ω_m)/g₀.
fn occupation_for(params: &ThreeModeParams, u: f64) -> f64 {
    -u * params.mech_stiffness() / params.g0
}

/// Scalar steady-state condition in the mechanical displacement,
/// (ω_m + γ_m²/4ω_m) u − g₀ (Jκ_bε/(2AB) p(u) + JΔ₁ε/(AB) q(u)).
/// The occupation inside C is tied to u through the force balance.
pub fn steady_state_residual(params: &ThreeModeParams, drive: &ThreeModeDrive, u: f64) -> f64 {
    let n = occupation_for(params, u);
    let (a, b, _) = abc(params, drive, n, u);
    let (p, q) = transmon_quadratures(params, drive, n, u);
    let (j, k, d1, e) = (params.j, params.kappa_b, drive.delta1(params), drive.epsilon);
    params.mech_stiffness() * u - params.g0 * (j * k * e / (2.0 * a * b) * p + j * d1 * e / (a * b) * q)
}

/// Back-substitute all six quadratures from the transmon occupation.
pub fn state_from_occupation(params: &ThreeModeParams, drive: &ThreeModeDrive, n: f64) -> ThreeModeState {
    let u = -params.g0 * n / params.mech_stiffness();
    let (p, q) = transmon_quadratures(params, drive, n, u);
    let d1 = drive.delta1(params);
    let (a, _, _) = abc(params, drive, n, u);
    let (j, k, e) = (params.j, params.kappa_b, drive.epsilon);
    let x = (k * j * q / 2.0 + d1 * (j * p + e)) / a;
    let y = (d1 * j * q - k / 2.0 * (j * p + e)) / a;
    let v = params.gamma_m * u / (2.0 * params.omega_m);
    ThreeModeState { x, y, p, q, u, v }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    /// Uniform scan intervals over the bracketing range.
    pub n_linear: usize,
    /// Additional log-spaced nodes covering 14 decades below the bound.
    pub n_log: usize,
    /// Largest accepted [`scaled_residual`] of a returned fixed point.
    pub residual_tol: f64,
    /// Stability threshold in units of ω_m.
    pub stability_tol: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self { n_linear: 400, n_log: 400, residual_tol: 1e-8, stability_tol: 1e-9 }
    }
}

impl ScanOptions {
    pub fn refined(&self, factor: usize) -> Self {
        Self { n_linear: self.n_linear * factor, n_log: self.n_log * factor, ..self.clone() }
    }
}

/// Upper bound on the transmon occupation, J²ε²/(A B²), reached when C = 0.
pub fn occupation_bound(params: &ThreeModeParams, drive: &ThreeModeDrive) -> f64 {
    let (a, b, _) = abc(params, drive, 0.0, 0.0);
    params.j * params.j * drive.epsilon * drive.epsilon / (a * b * b)
}

fn golden_min<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Transmon occupations at which the scalar steady-state condition vanishes.
///
/// The scan runs over the displacement u ∈ [−g₀ n_max/ω_eff, 0], expressed
/// through n = −u ω_eff/g₀ so the same nodes serve g₀ = 0, where the
/// condition becomes n = |ζ(n)|². Local extrema of the residual that do not
/// change sign between nodes are minimized to catch root pairs closer than
/// the node spacing.
pub fn occupation_roots(params: &ThreeModeParams, drive: &ThreeModeDrive, opts: &ScanOptions) -> Vec<f64> {
    let n_max = 1.01 * occupation_bound(params, drive);
    if !(n_max > 0.0) || !n_max.is_finite() {
        return vec![0.0];
    }
    let h = |n: f64| -> f64 {
        if params.g0 > 0.0 {
            let u = -params.g0 * n / params.mech_stiffness();
            steady_state_residual(params, drive, u)
        } else {
            let (p, q) = transmon_quadratures(params, drive, n, 0.0);
            p * p + q * q - n
        }
    };
    let mut nodes: Vec<f64> = (0..=opts.n_linear.max(1)).map(|i| n_max * i as f64 / opts.n_linear.max(1) as f64).collect();
    let n_log = opts.n_log.max(2);
    nodes.extend((0..n_log).map(|i| n_max * 10f64.powf(-14.0 + 14.0 * i as f64 / (n_log - 1) as f64)));
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();
    let vals: Vec<f64> = nodes.iter().map(|&n| h(n)).collect();

    let mut brackets = Vec::new();
    for i in 0..nodes.len() - 1 {
        if vals[i] == 0.0 {
            brackets.push((nodes[i], nodes[i]));
        } else if vals[i].signum() != vals[i + 1].signum() && vals[i + 1] != 0.0 {
            brackets.push((nodes[i], nodes[i + 1]));
        }
    }
    if vals[nodes.len() - 1] == 0.0 {
        let last = nodes[nodes.len() - 1];
        brackets.push((last, last));
    }
    for i in 1..nodes.len() - 1 {
        let s = vals[i].signum();
        if vals[i - 1].signum() == s && vals[i + 1].signum() == s && vals[i].abs() <= vals[i - 1].abs() && vals[i].abs() <= vals[i + 1].abs() {
            let (m, fm) = golden_min(|n| s * h(n), nodes[i - 1], nodes[i + 1]);
            if fm < 0.0 {
                brackets.push((nodes[i - 1], m));
                brackets.push((m, nodes[i + 1]));
            }
        }
    }

    let mut roots: Vec<f64> = brackets
        .into_iter()
        .filter_map(|(lo, hi)| if lo == hi { Some(lo) } else { bisect(h, lo, hi, 0.0).ok() })
        .collect();
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1e-300));
    roots
}

/// Newton refinement on the six flows; a step is kept only if it lowers
/// the scaled residual.
fn polish(params: &ThreeModeParams, drive: &ThreeModeDrive, s: ThreeModeState) -> ThreeModeState {
    let mut best = s;
    let mut res = scaled_residual(params, drive, &best);
    for _ in 0..30 {
        if res < 1e-14 {
            break;
        }
        let jac = jacobian(params, drive, &best);
        let f = flows(params, drive, &best);
        let Some(step) = jac.lu().solve(&(-f)) else { break };
        let trial = ThreeModeState::from_vector(&(best.to_vector() + step));
        let r = scaled_residual(params, drive, &trial);
        if !(r < res) {
            break;
        }
        best = trial;
        res = r;
    }
    best
}

/// All fixed points, ordered by transmon occupation.
pub fn find_fixed_points(params: &ThreeModeParams, drive: &ThreeModeDrive, opts: &ScanOptions) -> Result<Vec<ThreeModeState>> {
    params.validate()?;
    if !drive.epsilon.is_finite() || !drive.omega_d.is_finite() {
        return Err(Error::InvalidParams("drive must be finite".into()));
    }
    if drive.epsilon == 0.0 {
        return Ok(vec![ThreeModeState::default()]);
    }
    let roots = occupation_roots(params, drive, opts);
    if roots.is_empty() {
        return Err(Error::NoBracket { lo: -params.g0 * occupation_bound(params, drive) / params.mech_stiffness(), hi: 0.0 });
    }
    let mut out: Vec<ThreeModeState> = Vec::with_capacity(roots.len());
    for n in roots {
        let s = polish(params, drive, state_from_occupation(params, drive, n));
        let r = scaled_residual(params, drive, &s);
        if !(r < opts.residual_tol) {
            return Err(Error::NoConvergence { what: "fixed-point polish", iterations: 30 });
        }
        let dup = out.iter().any(|o| (o.to_vector() - s.to_vector()).norm() <= 1e-9 * s.to_vector().norm().max(1e-12));
        if !dup {
            out.push(s);
        }
    }
    out.sort_by(|a, b| a.transmon_photons().total_cmp(&b.transmon_photons()));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    /// At least one growing eigenmode lives mostly in the cavity/transmon.
    Unstable,
    /// Every growing eigenmode is mechanics-dominated.
    MechanicallyUnstable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointReport {
    pub state: ThreeModeState,
    pub eigenvalues: [Complex64; 6],
    /// Weight of each eigenvector on (u, v).
    pub mech_weights: [f64; 6],
    pub classification: Stability,
    /// Index of the eigenvalue with the largest real part.
    pub critical: usize,
    pub max_growth: f64,
    /// Largest ‖Sw − λw‖/‖S‖ over the eigenpairs.
    pub eigen_residual: f64,
}

/// Eigen-decomposition of a Jacobian and the stable / unstable /
/// mechanically-unstable label. Eigenvalues with Re λ ≥ −tol·ω_m count as
/// unstable; the eigenvector weight on (u, v) above ½ marks a mode as
/// mechanical.
pub fn classify_jacobian(s: &Matrix6<f64>, omega_m: f64, tol: f64) -> ([Complex64; 6], [f64; 6], Stability, usize, f64, f64) {
    let ev = s.complex_eigenvalues();
    let mut eigenvalues = [Complex64::new(0.0, 0.0); 6];
    let mut weights = [0.0; 6];
    let mut eig_res: f64 = 0.0;
    let dm = DMatrix::from_iterator(6, 6, s.iter().copied());
    for i in 0..6 {
        eigenvalues[i] = ev[i];
        let (w, r) = weight_and_residual(&dm, ev[i], &[4, 5]);
        weights[i] = w;
        eig_res = eig_res.max(r);
    }
    let critical = (0..6).max_by(|&a, &b| eigenvalues[a].re.total_cmp(&eigenvalues[b].re)).unwrap();
    let max_growth = eigenvalues[critical].re;
    let thr = -tol * omega_m;
    let unstable: Vec<usize> = (0..6).filter(|&i| eigenvalues[i].re >= thr).collect();
    let class = if unstable.is_empty() {
        Stability::Stable
    } else if unstable.iter().any(|&i| weights[i] <= 0.5) {
        Stability::Unstable
    } else {
        Stability::MechanicallyUnstable
    };
    (eigenvalues, weights, class, critical, max_growth, eig_res)
}

pub fn classify_stability(params: &ThreeModeParams, drive: &ThreeModeDrive, state: &ThreeModeState, opts: &ScanOptions) -> FixedPointReport {
    let s = jacobian(params, drive, state);
    let (eigenvalues, mech_weights, classification, critical, max_growth, eigen_residual) = classify_jacobian(&s, params.omega_m, opts.stability_tol);
    FixedPointReport { state: *state, eigenvalues, mech_weights, classification, critical, max_growth, eigen_residual }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionLabel {
    pub power_dbm: f64,
    pub omega_d: f64,
    pub n_fixed_points: usize,
    pub n_stable: usize,
    /// Some fixed point is optically stable but has a growing mechanical mode.
    pub mech_unstable_any: bool,
    /// Solver failure at this point; the counts are then zero.
    pub hole: Option<String>,
}

pub fn region_label(params: &ThreeModeParams, omega_d: f64, power_dbm: f64, atten_product: f64, opts: &ScanOptions) -> RegionLabel {
    let drive = ThreeModeDrive::from_power(omega_d, power_dbm, atten_product);
    let mut label = RegionLabel { power_dbm, omega_d, n_fixed_points: 0, n_stable: 0, mech_unstable_any: false, hole: None };
    match find_fixed_points(params, &drive, opts) {
        Ok(fps) => {
            label.n_fixed_points = fps.len();
            for s in &fps {
                match classify_stability(params, &drive, s, opts).classification {
                    Stability::Stable => label.n_stable += 1,
                    Stability::MechanicallyUnstable => label.mech_unstable_any = true,
                    Stability::Unstable => {}
                }
            }
        }
        Err(e) => label.hole = Some(e.to_string()),
    }
    label
}

/// Region labels on a power × frequency grid, row-major in power.
pub fn region_map(params: &ThreeModeParams, powers_dbm: &[f64], omega_ds: &[f64], atten_product: f64, opts: &ScanOptions) -> Vec<RegionLabel> {
    powers_dbm
        .iter()
        .flat_map(|&p| omega_ds.iter().map(move |&w| region_label(params, w, p, atten_product, opts)))
        .collect()
}

/// Single Kerr mode plus mechanics written in the three-mode variables:
/// the transmon slot carries the mode, the cavity is detached (J = 0) and
/// the mean-field pull 2α_T n equals the Kerr shift K n.
pub fn reduced_limit(cfg: &KerrModeConfig, detuning: f64) -> (ThreeModeParams, ThreeModeDrive) {
    let params = ThreeModeParams {
        omega_c: cfg.omega_plus,
        omega_q: cfg.omega_plus,
        j: 0.0,
        alpha_t: cfg.kerr_plus / 2.0,
        kappa_b: cfg.kappa,
        gamma: cfg.kappa,
        g0: cfg.g_plus,
        omega_m: cfg.omega_m,
        gamma_m: cfg.gamma_m,
    };
    (params, ThreeModeDrive { omega_d: cfg.omega_plus + detuning, epsilon: 0.0 })
}

/// Stability of a single-Kerr-mode steady state from the reduced 6×6
/// Jacobian. The drive acts on the mode directly, which only changes the
/// constant part of the flows, so the Jacobian is the three-mode one.
pub fn reduced_stability(cfg: &KerrModeConfig, detuning: f64, ss: &SteadyState, tol: f64) -> ([Complex64; 6], Stability) {
    let (params, drive) = reduced_limit(cfg, detuning);
    let state = ThreeModeState { x: 0.0, y: 0.0, p: ss.alpha.re, q: ss.alpha.im, u: ss.beta.re, v: ss.beta.im };
    let (ev, _, class, ..) = classify_jacobian(&jacobian(&params, &drive, &state), params.omega_m, tol);
    (ev, class)
}
