//! Pump-probe absorption line shapes of a mode coupled to the mechanical
//! resonator, in the Kerr-oscillator and two-level limits, and g extraction.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kerr_backaction::KerrModeConfig;
use crate::lm::{levenberg_marquardt, LmOptions};
use crate::roots::cubic_real;
use crate::units::hz;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Strong pump plus weak probe. `detuning` is Δ = ω_d − ω_mode; probe
/// offsets δ are measured from the mode, so the probe sits at
/// δ_p = ω_p − ω_d = δ − Δ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpProbeConfig {
    pub epsilon_d: f64,
    pub epsilon_p: f64,
    pub detuning: f64,
    /// Largest ε_p/ε_d for which the first-order ansatz is trusted.
    pub max_probe_ratio: f64,
}

impl PumpProbeConfig {
    /// Probe 6 dB below the pump.
    pub fn new(epsilon_d: f64, detuning: f64) -> Self {
        Self { epsilon_d, epsilon_p: 0.5 * epsilon_d, detuning, max_probe_ratio: 0.5 }
    }

    /// Pump one mechanical frequency below the Kerr mode.
    pub fn red_sideband(cfg: &KerrModeConfig, epsilon_d: f64) -> Self {
        Self::new(epsilon_d, -cfg.omega_m)
    }

    /// Pump one mechanical frequency below the dressed two-level transition.
    /// In this frame that is Δ = −ω_m; Δ = +ω_m gives a gain peak instead.
    pub fn tls_sideband(tls: &TlsConfig, epsilon_d: f64) -> Self {
        Self::new(epsilon_d, -tls.omega_m)
    }

    pub fn probe_offset(&self, delta: f64) -> f64 {
        delta - self.detuning
    }

    pub fn probe_ratio_ok(&self) -> bool {
        self.epsilon_p.abs() <= self.max_probe_ratio * self.epsilon_d.abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TlsConfig {
    /// ω_q + J²/(ω_q − ω_c)
    pub tilde_omega_q: f64,
    pub gamma_q: f64,
    /// Carried for bookkeeping; the first-order line shape has no pure-dephasing term.
    pub gamma_phi: f64,
    pub g_0: f64,
    pub omega_m: f64,
    pub gamma_m: f64,
}

impl TlsConfig {
    pub fn dressed_frequency(omega_q: f64, omega_c: f64, j: f64) -> f64 {
        omega_q + j * j / (omega_q - omega_c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_q > 0.0) || !(self.omega_m > 0.0) || !(self.gamma_m > 0.0) {
            return Err(Error::InvalidParams("gamma_q, omega_m and gamma_m must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineShape {
    pub delta: Vec<f64>,
    pub response: Vec<Complex64>,
    /// Coherent occupation of the pumped mode (weak case) or excited-state
    /// population (σᶻ₀ + 1)/2 (two-level case).
    pub occupation: f64,
    pub probe_ratio_warning: bool,
}

/// Static pull per photon from the mechanical displacement X₀ = −2g|ᾱ|²/ω_m.
fn weak_static_shift(cfg: &KerrModeConfig) -> f64 {
    cfg.kerr_plus + 2.0 * cfg.g_plus.powi(2) / cfg.omega_m
}

/// Pump occupation |ᾱ|² on the up-sweep branch.
pub fn weak_kerr_photons(cfg: &KerrModeConfig, pp: &PumpProbeConfig) -> f64 {
    let c = weak_static_shift(cfg);
    let d = pp.detuning;
    let k2 = cfg.kappa.powi(2) / 4.0;
    let e2 = pp.epsilon_d.powi(2);
    if e2 == 0.0 {
        return 0.0;
    }
    if c == 0.0 {
        return e2 / (d * d + k2);
    }
    cubic_real(c * c, 2.0 * d * c, d * d + k2, -e2)
        .into_iter()
        .filter(|&n| n >= 0.0)
        .fold(f64::INFINITY, f64::min)
}

/// Pump amplitude that yields occupation `n` at detuning Δ.
pub fn pump_for_photons(cfg: &KerrModeConfig, detuning: f64, n: f64) -> f64 {
    let d_eff = detuning + weak_static_shift(cfg) * n;
    (n * (cfg.kappa.powi(2) / 4.0 + d_eff * d_eff)).sqrt()
}

/// A₋ at one probe offset for occupation `n`.
pub fn weak_kerr_point(cfg: &KerrModeConfig, pp: &PumpProbeConfig, n: f64, delta: f64) -> Complex64 {
    let dp = pp.probe_offset(delta);
    let (k, wm, gm, g) = (cfg.kerr_plus, cfg.omega_m, cfg.gamma_m, cfg.g_plus);
    let b1 = Complex64::new(wm * wm - dp * dp, -gm * dp);
    let shift = 2.0 * k * n + 2.0 * g * g * n / wm;
    let b2 = Complex64::new(cfg.kappa / 2.0, -(dp + pp.detuning) - shift);
    let b3 = Complex64::new(cfg.kappa / 2.0, -(dp - pp.detuning) + shift);
    let b1p = 2.0 * g * g * wm / b1;
    let lhs = b2 - I * n * b1p - n * n * (k + b1p).powi(2) / (b3 + I * n * b1p);
    -I * pp.epsilon_p / lhs
}

pub fn weak_kerr_response(cfg: &KerrModeConfig, pp: &PumpProbeConfig, delta_grid: &[f64]) -> LineShape {
    let n = weak_kerr_photons(cfg, pp);
    LineShape {
        delta: delta_grid.to_vec(),
        response: delta_grid.iter().map(|&d| weak_kerr_point(cfg, pp, n, d)).collect(),
        occupation: n,
        probe_ratio_warning: !pp.probe_ratio_ok(),
    }
}

/// Closed form for a pump exactly one mechanical frequency below the mode,
/// with the δ_p ≈ ω_m simplifications applied to B₁ and B₃.
pub fn weak_kerr_sideband_form(cfg: &KerrModeConfig, epsilon_p: f64, n: f64, delta: f64) -> Complex64 {
    let (k, wm, g, kap) = (cfg.kerr_plus, cfg.omega_m, cfg.g_plus, cfg.kappa);
    let mech = Complex64::new(cfg.gamma_m, -2.0 * delta);
    let static_shift = 2.0 * g * g * n / wm;
    let num = k + 2.0 * I * g * g / mech;
    let den3 = Complex64::new(kap / 2.0, 2.0 * k * n - 2.0 * wm) + 2.0 * n * g * g / wm * (I - wm / mech);
    let den = Complex64::new(-kap / 2.0, 2.0 * k * n + static_shift + delta) - 2.0 * n * g * g / mech
        + n * n * num * num / den3;
    I * epsilon_p / den
}

/// Steady state of the pumped two-level system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TlsSteadyState {
    pub sigma_z: f64,
    pub sigma_plus: Complex64,
    pub sigma_minus: Complex64,
    pub x0: f64,
    pub delta_eff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TlsOptions {
    /// Solve Δ̃ = Δ − g₀X₀ self-consistently instead of Δ̃ ≈ Δ.
    pub self_consistent_shift: bool,
    /// Keep σᶻ₀ in the probe source term instead of σᶻ₀ ≈ −1.
    pub exact_population: bool,
    /// Use the sign of the pump term in B₅ that follows from the
    /// first-order σ⁺ equation; the closed form as usually quoted has the
    /// opposite sign. The two differ at O(ε_d²/γ_q²).
    pub consistent_b5: bool,
}

impl Default for TlsOptions {
    fn default() -> Self {
        Self { self_consistent_shift: false, exact_population: false, consistent_b5: false }
    }
}

impl TlsOptions {
    pub fn exact() -> Self {
        Self { self_consistent_shift: true, exact_population: true, consistent_b5: true }
    }
}

pub fn tls_steady_state(tls: &TlsConfig, pp: &PumpProbeConfig, self_consistent: bool) -> TlsSteadyState {
    let (gq, ed, g, wm) = (tls.gamma_q, pp.epsilon_d, tls.g_0, tls.omega_m);
    let eval = |dt: f64| {
        let dn = dt * dt + gq * gq / 4.0 + 2.0 * ed * ed;
        let sz = -(dt * dt + gq * gq / 4.0) / dn;
        let x0 = -g * (sz + 1.0) / wm;
        (dn, sz, x0)
    };
    let mut dt = pp.detuning;
    if self_consistent {
        for _ in 0..200 {
            let (_, _, x0) = eval(dt);
            let next = pp.detuning - g * x0;
            let done = (next - dt).abs() <= 1e-15 * dt.abs().max(gq);
            dt = next;
            if done {
                break;
            }
        }
    }
    let (dn, sz, x0) = eval(dt);
    TlsSteadyState {
        sigma_z: sz,
        sigma_plus: I * ed * Complex64::new(gq / 2.0, -dt) / dn,
        sigma_minus: -I * ed * Complex64::new(gq / 2.0, dt) / dn,
        x0,
        delta_eff: dt,
    }
}

fn guard(z: Complex64, scale: f64, what: &str, delta: f64) -> Result<Complex64> {
    if !z.is_finite() || z.norm() <= 1e-14 * scale {
        return Err(Error::Pole(format!("{what} vanishes at probe offset {delta:.6e} rad/s")));
    }
    Ok(z)
}

/// σ⁻₋ at one probe offset.
pub fn tls_point(tls: &TlsConfig, pp: &PumpProbeConfig, ss: &TlsSteadyState, opts: &TlsOptions, delta: f64) -> Result<Complex64> {
    let dp = pp.probe_offset(delta);
    let (gq, ed, ep, g, wm, gm) = (tls.gamma_q, pp.epsilon_d, pp.epsilon_p, tls.g_0, tls.omega_m, tls.gamma_m);
    let dt = ss.delta_eff;
    let dn = dt * dt + gq * gq / 4.0 + 2.0 * ed * ed;
    let b4_den = guard(I * wm + Complex64::new(gm, -dp) * dp / wm, wm, "mechanical denominator of B4", delta)?;
    let b4 = -I * g / b4_den;
    let pump = if opts.consistent_b5 { -I * ed } else { I * ed };
    let b5_den = guard(Complex64::new(gq / 2.0, -(dp - dt)), gq, "B5 denominator", delta)?;
    let b5 = (pump - b4 * ed * g * Complex64::new(gq / 2.0, -dt) / dn) / b5_den;
    let b67_den = guard(Complex64::new(gq, -dp) + 2.0 * I * ed * b5, gq, "B6 denominator", delta)?;
    let b6 = 2.0 * I * ed / b67_den;
    let b7 = 2.0 * ep * ed / b67_den * Complex64::new(gq / 2.0, -dt) / dn;
    let f = I * ed - g * ed * b4 * Complex64::new(gq / 2.0, dt) / dn;
    let b8 = guard(Complex64::new(gq / 2.0, -(dt + dp)) - f * b6, gq, "B8", delta)?;
    let population = if opts.exact_population { ss.sigma_z } else { -1.0 };
    Ok((f * b7 + I * ep * population) / b8)
}

/// σ⁻₋(δ) times a caller-supplied normalization.
pub fn tls_response(
    tls: &TlsConfig,
    pp: &PumpProbeConfig,
    opts: &TlsOptions,
    normalization: Complex64,
    delta_grid: &[f64],
) -> Result<LineShape> {
    tls.validate()?;
    let ss = tls_steady_state(tls, pp, opts.self_consistent_shift);
    let response = delta_grid
        .iter()
        .map(|&d| tls_point(tls, pp, &ss, opts, d).map(|z| z * normalization))
        .collect::<Result<Vec<_>>>()?;
    Ok(LineShape {
        delta: delta_grid.to_vec(),
        response,
        occupation: 0.5 * (ss.sigma_z + 1.0),
        probe_ratio_warning: !pp.probe_ratio_ok(),
    })
}

/// Default offset grid: ±40 γ_m over 501 points around `center`.
pub fn default_grid(center: f64, gamma_m: f64) -> Vec<f64> {
    let half = 40.0 * gamma_m;
    (0..501).map(|i| center - half + 2.0 * half * i as f64 / 500.0).collect()
}

/// Cavity-like branch of the first sample at ω₊/2π = 5.884 GHz, pumped to
/// 0.058 photons on the red sideband with the probe 6 dB down.
pub fn device1_absorption_model() -> LineModel {
    let cfg = KerrModeConfig {
        omega_plus: hz(5.884e9),
        kappa: hz(11.5e6),
        g_plus: hz(40e3),
        gamma_m: hz(13.0),
        ..KerrModeConfig::device1_kerr_mode()
    };
    let pp = PumpProbeConfig::red_sideband(&cfg, pump_for_photons(&cfg, -cfg.omega_m, 0.058));
    LineModel::WeakKerr { cfg, pp }
}

/// Transmon-like branch of the second sample at ω₊/2π = 6.005 GHz.
pub fn device2_tls_model() -> LineModel {
    let tls = TlsConfig {
        tilde_omega_q: hz(6.005e9),
        gamma_q: hz(12e6),
        gamma_phi: 0.0,
        g_0: hz(45e3),
        omega_m: hz(3.97e6),
        gamma_m: hz(6.0),
    };
    let pp = PumpProbeConfig::tls_sideband(&tls, hz(0.5e6));
    LineModel::Tls { tls, pp, opts: TlsOptions::default() }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LineModel {
    WeakKerr { cfg: KerrModeConfig, pp: PumpProbeConfig },
    Tls { tls: TlsConfig, pp: PumpProbeConfig, opts: TlsOptions },
}

impl LineModel {
    pub fn coupling(&self) -> f64 {
        match self {
            LineModel::WeakKerr { cfg, .. } => cfg.g_plus,
            LineModel::Tls { tls, .. } => tls.g_0,
        }
    }

    pub fn gamma_m(&self) -> f64 {
        match self {
            LineModel::WeakKerr { cfg, .. } => cfg.gamma_m,
            LineModel::Tls { tls, .. } => tls.gamma_m,
        }
    }

    /// Copy with coupling, mechanical linewidth and mechanical frequency
    /// offset replaced. The pump detuning is held fixed.
    pub fn with_mechanics(&self, g: f64, gamma_m: f64, omega_offset: f64) -> Self {
        let mut m = self.clone();
        match &mut m {
            LineModel::WeakKerr { cfg, .. } => {
                cfg.g_plus = g;
                cfg.gamma_m = gamma_m;
                cfg.omega_m += omega_offset;
            }
            LineModel::Tls { tls, .. } => {
                tls.g_0 = g;
                tls.gamma_m = gamma_m;
                tls.omega_m += omega_offset;
            }
        }
        m
    }

    /// Response scaled to be of order one away from the feature.
    pub fn normalized(&self, delta_grid: &[f64]) -> Result<Vec<Complex64>> {
        match self {
            LineModel::WeakKerr { cfg, pp } => {
                let s = cfg.kappa / 2.0 / pp.epsilon_p;
                Ok(weak_kerr_response(cfg, pp, delta_grid).response.into_iter().map(|z| z * s).collect())
            }
            LineModel::Tls { tls, pp, opts } => {
                let s = Complex64::new(tls.gamma_q / 2.0 / pp.epsilon_p, 0.0);
                Ok(tls_response(tls, pp, opts, s, delta_grid)?.response)
            }
        }
    }

    /// |S21| model with amplitude and additive background.
    pub fn magnitude(&self, p: &FitParams, delta_grid: &[f64]) -> Result<Vec<f64>> {
        let m = self.with_mechanics(p.g, p.gamma_m, p.omega_offset);
        Ok(m.normalized(delta_grid)?.into_iter().map(|z| p.amplitude * z.norm() + p.background).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    pub g: f64,
    pub gamma_m: f64,
    pub omega_offset: f64,
    pub amplitude: f64,
    pub background: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub params: FitParams,
    pub sigma: FitParams,
    pub residual_norm: f64,
    pub iterations: usize,
}

pub const MIN_FIT_SAMPLES: usize = 30;

/// Initial values from the dip: linewidth from the half-depth width and
/// coupling from inverting the dip depth through the cooperativity.
pub fn initial_guess(model: &LineModel, delta: &[f64], mag: &[f64]) -> FitParams {
    let m = mag.len();
    let edge = m.min(20) / 2;
    let base = {
        let mut e: Vec<f64> = mag[..edge.max(1)].iter().chain(&mag[m - edge.max(1)..]).copied().collect();
        e.sort_by(f64::total_cmp);
        e[e.len() / 2]
    };
    let (imin, &vmin) = mag.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    // Half depth in power: the dip in |S21|² is Lorentzian with FWHM γ_m(1 + C).
    let half = (0.5 * (base * base + vmin * vmin)).sqrt();
    let left = (0..imin).rev().find(|&i| mag[i] >= half).unwrap_or(0);
    let right = (imin..m).find(|&i| mag[i] >= half).unwrap_or(m - 1);
    let width = (delta[right] - delta[left]).abs().max(1e-3 * model.gamma_m());
    let coop = (base / vmin.max(1e-300) - 1.0).max(1e-3);
    let gamma = width / (1.0 + coop);
    let g = match model {
        LineModel::WeakKerr { cfg, pp } => {
            let n = weak_kerr_photons(cfg, pp).max(1e-300);
            (coop * cfg.kappa * gamma / (4.0 * n)).sqrt()
        }
        LineModel::Tls { .. } => 0.0,
    };
    let mut p = FitParams {
        g,
        gamma_m: gamma,
        omega_offset: model.offset_for_feature_at(delta[imin]),
        amplitude: base,
        background: 0.0,
    };
    let ssr = |p: &FitParams| match model.magnitude(p, delta) {
        Ok(v) => v.iter().zip(mag).map(|(a, b)| (a - b).powi(2)).sum::<f64>(),
        Err(_) => f64::INFINITY,
    };
    let scan = |p: &mut FitParams, values: &mut dyn Iterator<Item = f64>, set: fn(&mut FitParams, f64)| {
        let mut best = ssr(p);
        for v in values {
            let mut trial = *p;
            set(&mut trial, v);
            let c = ssr(&trial);
            if c < best {
                best = c;
                *p = trial;
            }
        }
    };
    let log_range = |lo: f64, decades: f64| (0..=(20.0 * decades) as usize).map(move |k| lo * 10f64.powf(k as f64 / 20.0));
    if matches!(model, LineModel::Tls { .. }) {
        // No closed-form depth inversion for the two-level shape.
        p.g = hz(1e3);
        scan(&mut p, &mut log_range(hz(1e2), 5.0), |p, v| p.g = v);
    }
    // Coordinate passes around the heuristics; the dip minimum of an
    // asymmetric shape is a biased estimate of the offset.
    for _ in 0..3 {
        let centre = p.omega_offset;
        scan(&mut p, &mut (0..=40).map(|k| centre + width * (k as f64 / 20.0 - 1.0)), |p, v| p.omega_offset = v);
        let (g0, w0) = (p.g, p.gamma_m);
        scan(&mut p, &mut log_range(w0 / 10.0, 2.0), |p, v| p.gamma_m = v);
        scan(&mut p, &mut log_range(g0 / 10.0, 2.0), |p, v| p.g = v);
    }
    p
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FitSetup {
    pub init: Option<FitParams>,
    /// Also fit the additive background. On a magnitude trace it trades off
    /// against amplitude and dip depth, so it is held at its initial value
    /// unless asked for.
    pub free_background: bool,
}

const PARAM_NAMES: [&str; 5] = ["g", "gamma_m", "omega_offset", "amplitude", "background"];

/// Damped least squares over coupling, mechanical linewidth, mechanical
/// frequency offset, amplitude and (optionally) background.
pub fn fit_g(model: &LineModel, delta: &[f64], mag: &[f64], setup: &FitSetup) -> Result<FitReport> {
    if delta.len() != mag.len() {
        return Err(Error::Fit("trace columns differ in length".into()));
    }
    if delta.len() < MIN_FIT_SAMPLES {
        return Err(Error::Fit(format!("{} samples, need at least {MIN_FIT_SAMPLES}", delta.len())));
    }
    let p0 = setup.init.unwrap_or_else(|| initial_guess(model, delta, mag));
    // The (g, γ_m, offset) valley has shallow side minima; restart from a
    // few spread-out points and keep the lowest residual.
    let mut starts = vec![p0];
    for (fg, fw) in [(0.7, 1.0), (1.4, 1.0), (1.0, 0.6), (1.0, 1.6), (0.8, 1.4), (1.25, 0.7)] {
        starts.push(FitParams { g: p0.g * fg, gamma_m: p0.gamma_m * fw, ..p0 });
    }
    let mut best: Option<FitReport> = None;
    let mut last_err = None;
    for s in &starts {
        match fit_from(model, delta, mag, s, setup.free_background) {
            Ok(r) => {
                if best.as_ref().is_none_or(|b| r.residual_norm < b.residual_norm) {
                    best = Some(r);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| Error::Fit("no start converged".into())))
}

fn fit_from(model: &LineModel, delta: &[f64], mag: &[f64], p0: &FitParams, free_background: bool) -> Result<FitReport> {
    let (gs, ws) = (p0.g.abs().max(1e-300), p0.gamma_m.abs().max(1e-300));
    let unpack = |x: &[f64]| FitParams {
        g: x[0] * gs,
        gamma_m: x[1] * ws,
        omega_offset: x[2] * ws,
        amplitude: x[3],
        background: if free_background { x[4] } else { p0.background },
    };
    let residual = |x: &[f64]| -> Vec<f64> {
        match model.magnitude(&unpack(x), delta) {
            Ok(v) => v.iter().zip(mag).map(|(a, b)| a - b).collect(),
            Err(_) => vec![f64::NAN; mag.len()],
        }
    };
    let np = if free_background { 5 } else { 4 };
    let x0 = [1.0, 1.0, p0.omega_offset / ws, p0.amplitude, p0.background];
    let opts = LmOptions {
        max_iter: 300,
        ftol: 1e-14,
        xtol: 1e-12,
        fd_step: 1e-6,
        lower: Some(vec![1e-6, 1e-6, f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY][..np].to_vec()),
        upper: None,
    };
    let rep = levenberg_marquardt(residual, &x0[..np], &opts)?;
    if let Some(&i) = rep.at_bound.first() {
        return Err(Error::Fit(format!("parameter {} finished on its bound", PARAM_NAMES[i])));
    }
    let params = unpack(&rep.params);
    let s: Vec<f64> = (0..5).map(|i| if i < np { rep.sigma(i) } else { 0.0 }).collect();
    let sigma = FitParams { g: s[0] * gs, gamma_m: s[1] * ws, omega_offset: s[2] * ws, amplitude: s[3], background: s[4] };
    Ok(FitReport { params, sigma, residual_norm: rep.residual_norm, iterations: rep.iterations })
}

impl LineModel {
    /// Mechanical frequency offset that would put the feature at probe
    /// offset `delta`. The feature sits on the sideband δ_p = ±ω_m facing
    /// the mode, i.e. with the sign of −Δ.
    pub fn offset_for_feature_at(&self, delta: f64) -> f64 {
        let (wm, d) = match self {
            LineModel::WeakKerr { cfg, pp } => (cfg.omega_m, pp.detuning),
            LineModel::Tls { tls, pp, .. } => (tls.omega_m, pp.detuning),
        };
        let s = if d > 0.0 { -1.0 } else { 1.0 };
        s * (delta - d) - wm
    }
}

/// Inverse-variance weighted mean of repeated estimates and the scatter of
/// the individual values.
pub fn aggregate(estimates: &[(f64, f64)]) -> (f64, f64) {
    let w: f64 = estimates.iter().map(|(_, s)| 1.0 / (s * s)).sum();
    let mean = estimates.iter().map(|(v, s)| v / (s * s)).sum::<f64>() / w;
    let n = estimates.len() as f64;
    let plain = estimates.iter().map(|(v, _)| v).sum::<f64>() / n;
    let spread = (estimates.iter().map(|(v, _)| (v - plain).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    (mean, spread)
}

#[cfg(test)]
mod tests;
