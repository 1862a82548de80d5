//! Physical constants and unit conversions.

use std::f64::consts::TAU;

pub const HBAR: f64 = 1.054_571_817e-34;
pub const K_B: f64 = 1.380_649e-23;

/// Hz to rad/s.
#[inline]
pub fn hz(f: f64) -> f64 {
    TAU * f
}

/// rad/s to Hz.
#[inline]
pub fn to_hz(w: f64) -> f64 {
    w / TAU
}

#[inline]
pub fn khz(f: f64) -> f64 {
    hz(f * 1e3)
}

#[inline]
pub fn mhz(f: f64) -> f64 {
    hz(f * 1e6)
}

#[inline]
pub fn ghz(f: f64) -> f64 {
    hz(f * 1e9)
}

pub fn dbm_to_watts(p_dbm: f64) -> f64 {
    1e-3 * 10f64.powf(p_dbm / 10.0)
}

pub fn watts_to_dbm(p: f64) -> f64 {
    10.0 * (p / 1e-3).log10()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Drive amplitude squared (rad²/s²) from input power.
///
/// `atten_product` is the input-line attenuation times 1/κ_in. It is kept as an
/// opaque calibration constant; this is the only place its unit is interpreted:
/// ε² = P_in / (ħ ω_d · atten_product).
pub fn drive_amplitude(p_dbm: f64, omega_d: f64, atten_product: f64) -> f64 {
    (dbm_to_watts(p_dbm) / (HBAR * omega_d * atten_product)).sqrt()
}

/// Inverse of [`drive_amplitude`].
pub fn drive_power_dbm(epsilon: f64, omega_d: f64, atten_product: f64) -> f64 {
    watts_to_dbm(epsilon * epsilon * HBAR * omega_d * atten_product)
}

/// Mean thermal occupation of a bosonic mode.
pub fn bose(omega: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    1.0 / (HBAR * omega / (K_B * temperature)).exp_m1()
}

/// Temperature for a given mean occupation; zero occupation maps to 0 K.
pub fn bose_temperature(omega: f64, n: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    HBAR * omega / (K_B * (1.0 / n).ln_1p())
}
