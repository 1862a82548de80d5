//! Calibration chain: dispersive shift and ac-Stark photon numbers, output
//! gain, sideband thermometry and output-port reflection fits.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm::{levenberg_marquardt, LmOptions};
use crate::units::{bose_temperature, db_to_linear, dbm_to_watts, linear_to_db, HBAR};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub chi: f64,
    pub atten_product: f64,
    pub gain_db: f64,
    pub n_m: f64,
    /// Mechanical mode temperature, K.
    pub t_mode: f64,
    pub kappa_e: f64,
}

impl CalibrationRecord {
    /// `delta` = ω_q − ω_c and the anharmonicity magnitude fix the sign of χ.
    pub fn validate(&self, delta: f64, alpha_t: f64) -> Result<()> {
        if !(self.n_m >= 0.0) {
            return Err(Error::InvalidParams("n_m must be non-negative".into()));
        }
        if !self.gain_db.is_finite() {
            return Err(Error::InvalidParams("gain_db must be finite".into()));
        }
        let expected = dispersive_shift(1.0, delta, alpha_t).signum();
        if self.chi != 0.0 && self.chi.signum() != expected {
            return Err(Error::InvalidParams("chi sign inconsistent with detuning and anharmonicity".into()));
        }
        Ok(())
    }
}

/// χ = −(J²/Δ)·α_T/(Δ − α_T) with Δ = ω_q − ω_c.
pub fn dispersive_shift(j: f64, delta: f64, alpha_t: f64) -> f64 {
    -(j * j / delta) * alpha_t / (delta - alpha_t)
}

/// As [`dispersive_shift`], refusing detunings within 10κ_b of either pole.
pub fn dispersive_shift_checked(j: f64, delta: f64, alpha_t: f64, kappa_b: f64) -> Result<f64> {
    let guard = 10.0 * kappa_b;
    if delta.abs() < guard {
        return Err(Error::Pole(format!("|Δ| = {:.3e} rad/s is within 10κ_b of resonance", delta.abs())));
    }
    if (delta - alpha_t).abs() < guard {
        return Err(Error::Pole(format!("|Δ − α_T| = {:.3e} rad/s is within 10κ_b", (delta - alpha_t).abs())));
    }
    Ok(dispersive_shift(j, delta, alpha_t))
}

/// Qubit shift ω_q′ − ω_q = −2n_dχ.
pub fn stark_shift(n_d: f64, chi: f64) -> f64 {
    -2.0 * n_d * chi
}

pub fn stark_photon_number(shift: f64, chi: f64) -> f64 {
    if shift == 0.0 {
        return 0.0;
    }
    shift / (-2.0 * chi)
}

/// Resonant occupation for a probe of `p_dbm` at ω_d: n = ε²/(κ/2)² with
/// ε² = P/(ħω_d·atten_product).
pub fn photons_from_power(p_dbm: f64, omega_d: f64, kappa: f64, atten_product: f64) -> f64 {
    4.0 * dbm_to_watts(p_dbm) / (HBAR * omega_d * atten_product * kappa * kappa)
}

/// Least-squares slope of y against x through the origin.
fn slope_through_origin(x: &[f64], y: &[f64]) -> f64 {
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    sxy / sxx
}

/// Ordinary least-squares line, returns (slope, intercept).
fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn check_pairs(x: &[f64], y: &[f64], min: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::InvalidParams("mismatched series lengths".into()));
    }
    if x.len() < min {
        return Err(Error::InvalidParams(format!("at least {min} points needed")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParams("non-finite calibration data".into()));
    }
    Ok(())
}

/// Attenuation product from a Stark sweep: the photon numbers implied by
/// the measured qubit shifts are fitted linearly against input power.
pub fn fit_atten_product(p_dbm: &[f64], shifts: &[f64], chi: f64, omega_d: f64, kappa: f64) -> Result<f64> {
    check_pairs(p_dbm, shifts, 2)?;
    let watts: Vec<f64> = p_dbm.iter().map(|&p| dbm_to_watts(p)).collect();
    let n: Vec<f64> = shifts.iter().map(|&s| stark_photon_number(s, chi)).collect();
    let slope = slope_through_origin(&watts, &n);
    if !(slope > 0.0) {
        return Err(Error::Fit("photon number does not grow with probe power".into()));
    }
    Ok(4.0 / (HBAR * omega_d * kappa * kappa * slope))
}

/// Transmitted power P_d = ħω·A_P·κ_e·n_d.
pub fn transmitted_power(n_d: f64, kappa_e: f64, omega: f64, gain_db: f64) -> f64 {
    HBAR * omega * db_to_linear(gain_db) * kappa_e * n_d
}

/// Net output gain in dB from the slope of P_d (W) against n_d.
pub fn output_gain(p_d: &[f64], n_d: &[f64], kappa_e: f64, omega: f64) -> Result<f64> {
    check_pairs(n_d, p_d, 3)?;
    let (slope, _) = line_fit(n_d, p_d);
    if !(slope > 0.0) {
        return Err(Error::Fit("transmitted power does not grow with occupation".into()));
    }
    Ok(linear_to_db(slope / (HBAR * omega * kappa_e)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermometryParams {
    pub g_plus: f64,
    pub kappa: f64,
    pub kappa_e: f64,
    pub gamma_m: f64,
    pub omega_m: f64,
    pub gain_db: f64,
    /// Added noise quanta; only shifts the intercept.
    pub n_add: f64,
}

impl ThermometryParams {
    /// Operating point of the calibration sweep on the first sample.
    pub fn device1_sweep() -> Self {
        use crate::units::hz;
        Self {
            g_plus: hz(22e3),
            kappa: hz(11.5e6),
            kappa_e: hz(6.2e6),
            gamma_m: hz(6.0),
            omega_m: hz(3.97e6),
            gain_db: 58.5,
            n_add: 10.0,
        }
    }

    /// d(S_VV/ħω)/d(n_d n_m).
    fn per_phonon_photon(&self) -> f64 {
        db_to_linear(self.gain_db) * self.kappa_e / self.gamma_m * 16.0 * self.g_plus.powi(2)
            / (self.kappa.powi(2) + 4.0 * self.omega_m.powi(2))
    }
}

/// Sideband peak PSD in quanta, S_VV/ħω.
pub fn sideband_psd(params: &ThermometryParams, n_d: f64, n_m: f64) -> f64 {
    db_to_linear(params.gain_db) * (0.5 + params.n_add) + params.per_phonon_photon() * n_d * n_m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thermometry {
    pub n_m: f64,
    pub t_mode: f64,
    pub slope: f64,
    pub intercept: f64,
}

/// Thermal occupation from the slope of S_VV/ħω against n_d, and the mode
/// temperature from Bose–Einstein inversion.
pub fn sideband_thermometry(svv: &[f64], n_d: &[f64], params: &ThermometryParams) -> Result<Thermometry> {
    check_pairs(n_d, svv, 2)?;
    let (slope, intercept) = line_fit(n_d, svv);
    if !(slope > 0.0) {
        return Err(Error::Fit("sideband power does not grow with pump occupation".into()));
    }
    let n_m = slope / params.per_phonon_photon();
    Ok(Thermometry { n_m, t_mode: bose_temperature(params.omega_m, n_m), slope, intercept })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflectionParams {
    pub kappa_e: f64,
    /// κ_i + κ_in; the two only ever appear summed.
    pub kappa_loss: f64,
    pub omega_c: f64,
}

impl ReflectionParams {
    pub fn kappa_total(&self) -> f64 {
        self.kappa_e + self.kappa_loss
    }

    /// Splits the loss given an independently known input-port rate.
    pub fn kappa_i(&self, kappa_in: f64) -> f64 {
        self.kappa_loss - kappa_in
    }
}

/// S₁₁(ω) = 1 − κ_e/((κ_i + κ_in + κ_e)/2 + i(ω − ω_c)).
pub fn reflection(p: &ReflectionParams, omega: f64) -> Complex64 {
    Complex64::new(1.0, 0.0) - p.kappa_e / Complex64::new(p.kappa_total() / 2.0, omega - p.omega_c)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReflectionTrace {
    Complex(Vec<Complex64>),
    /// |S₁₁| only. Swapping κ_e and κ_i + κ_in leaves it unchanged, so the
    /// coupling regime has to be supplied.
    Magnitude { mag: Vec<f64>, overcoupled: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReflectionFit {
    pub params: ReflectionParams,
    /// One-sigma uncertainties of (κ_e, κ_i + κ_in, ω_c).
    pub sigma: [f64; 3],
    pub residual_norm: f64,
}

fn reflection_guess(omega: &[f64], trace: &ReflectionTrace) -> ReflectionParams {
    // Dip depth |1 − S| peaks at ω_c with value 2κ_e/κ.
    let depth: Vec<f64> = match trace {
        ReflectionTrace::Complex(s) => s.iter().map(|z| (1.0 - z).norm()).collect(),
        ReflectionTrace::Magnitude { mag, .. } => mag.iter().map(|m| 1.0 - m).collect(),
    };
    let (i0, _) = depth.iter().enumerate().fold((0, f64::NEG_INFINITY), |b, (i, &d)| if d > b.1 { (i, d) } else { b });
    let omega_c = omega[i0];
    // Half-width where the dip depth falls to half its extreme.
    let half = depth[i0] / 2.0;
    let right = (i0..omega.len()).find(|&i| depth[i] < half).map(|i| omega[i] - omega_c);
    let left = (0..=i0).rev().find(|&i| depth[i] < half).map(|i| omega_c - omega[i]);
    let span = omega[omega.len() - 1] - omega[0];
    let hw = match (left, right) {
        (Some(l), Some(r)) => 0.5 * (l + r),
        (Some(w), None) | (None, Some(w)) => w,
        (None, None) => span / 10.0,
    };
    let kappa = 2.0 * hw.max(span * 1e-4);
    let kappa_e = match trace {
        ReflectionTrace::Complex(s) => ((1.0 - s[i0]).norm() * kappa / 2.0).min(kappa * 0.99),
        ReflectionTrace::Magnitude { mag, overcoupled } => {
            // |S(ω_c)| = |κ_loss − κ_e|/κ.
            let r = mag[i0].min(0.98);
            if *overcoupled { kappa * (1.0 + r) / 2.0 } else { kappa * (1.0 - r) / 2.0 }
        }
    };
    ReflectionParams { kappa_e, kappa_loss: (kappa - kappa_e).max(kappa * 0.01), omega_c }
}

/// Damped least-squares fit of the reflection model to a trace sampled at
/// `omega`, which must span at least five linewidths.
pub fn reflection_fit(omega: &[f64], trace: &ReflectionTrace) -> Result<ReflectionFit> {
    let n = match trace {
        ReflectionTrace::Complex(s) => s.len(),
        ReflectionTrace::Magnitude { mag, .. } => mag.len(),
    };
    if n != omega.len() || n < 8 {
        return Err(Error::InvalidParams("trace and frequency grid must match and hold at least 8 points".into()));
    }
    let g = reflection_guess(omega, trace);
    let span = omega[n - 1] - omega[0];
    if span < 5.0 * g.kappa_total() {
        return Err(Error::Fit(format!("trace spans {:.2} linewidths, 5 needed", span / g.kappa_total())));
    }
    // Parameters in units of the guessed linewidth, ω_c as an offset.
    let scale = g.kappa_total();
    let unpack = |x: &[f64]| ReflectionParams { kappa_e: x[0] * scale, kappa_loss: x[1] * scale, omega_c: g.omega_c + x[2] * scale };
    let residuals = |x: &[f64]| -> Vec<f64> {
        let p = unpack(x);
        match trace {
            ReflectionTrace::Complex(s) => omega
                .iter()
                .zip(s)
                .flat_map(|(&w, z)| {
                    let d = reflection(&p, w) - z;
                    [d.re, d.im]
                })
                .collect(),
            ReflectionTrace::Magnitude { mag, .. } => omega.iter().zip(mag).map(|(&w, m)| reflection(&p, w).norm() - m).collect(),
        }
    };
    let opts = LmOptions { lower: Some(vec![0.0, 0.0, f64::NEG_INFINITY]), ..LmOptions::default() };
    let x0 = [g.kappa_e / scale, g.kappa_loss / scale, 0.0];
    let rep = levenberg_marquardt(residuals, &x0, &opts)?;
    let mut params = unpack(&rep.params);
    if let ReflectionTrace::Magnitude { overcoupled, .. } = trace {
        if (params.kappa_e > params.kappa_loss) != *overcoupled {
            std::mem::swap(&mut params.kappa_e, &mut params.kappa_loss);
        }
    }
    let sigma = [rep.sigma(0) * scale, rep.sigma(1) * scale, rep.sigma(2) * scale];
    Ok(ReflectionFit { params, sigma, residual_norm: rep.residual_norm })
}
