//! Low-power instability map: each single-photon transition of the
//! transmon–cavity ladder is treated as an independent two-level system whose
//! frequency depends on the mechanical displacement.
//!
//! Variables per transition are s = ⟨σᶻ⟩, ⟨σ⁺⟩ = p + iq and ⟨b⟩ = u + iv.

use nalgebra::{DMatrix, Matrix5, Vector5};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::device_model::{flux_for_qubit_frequency, polariton_spectrum, DeviceParams, FluxPoint, PolaritonSpectrum, TransitionLabel};
use crate::eig::weight_and_residual;
use crate::error::{Error, Result};
use crate::roots::bisect;
use crate::units::{drive_amplitude, hz};

/// The four modelled transitions, in order ω₁ … ω₄.
pub const MODELED: [TransitionLabel; 4] = [TransitionLabel::Minus, TransitionLabel::Plus, TransitionLabel::MinusAlpha, TransitionLabel::MinusBeta];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TlsRates {
    pub gamma: [f64; 4],
    pub gamma_phi: [f64; 4],
}

impl Default for TlsRates {
    fn default() -> Self {
        Self {
            gamma: [hz(10e6), hz(10e6), hz(18e6), hz(14e6)],
            gamma_phi: [hz(4e6), hz(4e6), hz(8e6), hz(9e6)],
        }
    }
}

/// Thermal occupation of the lower states. The two-excitation states carry
/// no weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalWeights {
    pub ground: f64,
    pub minus: f64,
    pub plus: f64,
}

impl Default for ThermalWeights {
    fn default() -> Self {
        Self { ground: 0.82, minus: 0.10, plus: 0.08 }
    }
}

impl ThermalWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("ground", self.ground), ("minus", self.minus), ("plus", self.plus)] {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::InvalidParams(format!("weight of {name} must lie in [0, 1], got {w}")));
            }
        }
        let sum = self.ground + self.minus + self.plus;
        if sum > 1.0 + 1e-12 {
            return Err(Error::InvalidParams(format!("thermal weights sum to {sum} > 1")));
        }
        Ok(())
    }

    /// Weight of the lower state of `label`.
    pub fn lower_state(&self, label: TransitionLabel) -> f64 {
        use TransitionLabel::*;
        match label {
            Minus | Plus | GammaHalf => self.ground,
            MinusAlpha | MinusBeta | MinusGamma => self.minus,
            PlusAlpha | PlusBeta | PlusGamma => self.plus,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionTls {
    pub label: TransitionLabel,
    pub omega_i: f64,
    pub g_i: f64,
    pub gamma_i: f64,
    pub gamma_phi_i: f64,
    pub thermal_weight: f64,
    pub omega_m: f64,
    pub gamma_m: f64,
}

impl TransitionTls {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_i > 0.0 && self.gamma_i.is_finite()) {
            return Err(Error::InvalidParams(format!("{}: gamma must be positive", self.label.name())));
        }
        if !(self.gamma_phi_i >= 0.0) || !(0.0..=1.0).contains(&self.thermal_weight) {
            return Err(Error::InvalidParams(format!("{}: bad dephasing or weight", self.label.name())));
        }
        if !(self.omega_m > 0.0 && self.gamma_m > 0.0 && self.g_i.is_finite() && self.omega_i.is_finite()) {
            return Err(Error::InvalidParams(format!("{}: bad mechanics or coupling", self.label.name())));
        }
        Ok(())
    }

    /// Transverse decay γ/2 + γ_φ.
    pub fn transverse(&self) -> f64 {
        self.gamma_i / 2.0 + self.gamma_phi_i
    }

    /// Drive seen by this transition: √(weight) times the input drive.
    pub fn drive_amplitude(&self, epsilon: f64) -> f64 {
        self.thermal_weight.sqrt() * epsilon
    }

    fn stiffness(&self) -> f64 {
        self.omega_m + self.gamma_m * self.gamma_m / (4.0 * self.omega_m)
    }
}

/// The four modelled transitions at one flux point, couplings taken from the
/// spectrum.
pub fn enumerate_transitions(
    spectrum: &PolaritonSpectrum,
    rates: &TlsRates,
    weights: &ThermalWeights,
    omega_m: f64,
    gamma_m: f64,
) -> Result<Vec<TransitionTls>> {
    weights.validate()?;
    MODELED
        .iter()
        .enumerate()
        .map(|(i, &label)| {
            let t = TransitionTls {
                label,
                omega_i: spectrum.frequency(label),
                g_i: spectrum.coupling(label).unwrap_or(0.0),
                gamma_i: rates.gamma[i],
                gamma_phi_i: rates.gamma_phi[i],
                thermal_weight: weights.lower_state(label),
                omega_m,
                gamma_m,
            };
            t.validate()?;
            Ok(t)
        })
        .collect()
}

/// Second sample with the transmon 40 MHz above the cavity and B∥ = 9 mT.
pub fn fig6b_transitions(rates: &TlsRates, weights: &ThermalWeights) -> Result<Vec<TransitionTls>> {
    let dev = DeviceParams::device2();
    let phi = flux_for_qubit_frequency(&dev, dev.omega_c + hz(40e6))?;
    let spec = polariton_spectrum(&dev, &FluxPoint::new(phi, 9e-3))?;
    enumerate_transitions(&spec, rates, weights, dev.omega_m, dev.gamma_m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TlsDrive {
    pub omega_d: f64,
    /// Input drive amplitude before thermal weighting, rad/s.
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TlsFixedPoint {
    pub s: f64,
    pub p: f64,
    pub q: f64,
    pub u: f64,
    pub v: f64,
}

impl TlsFixedPoint {
    pub fn ground() -> Self {
        Self { s: -1.0, p: 0.0, q: 0.0, u: 0.0, v: 0.0 }
    }

    pub fn to_vector(&self) -> Vector5<f64> {
        Vector5::new(self.s, self.p, self.q, self.u, self.v)
    }

    pub fn from_vector(k: &Vector5<f64>) -> Self {
        Self { s: k[0], p: k[1], q: k[2], u: k[3], v: k[4] }
    }
}

/// Mean-field equations of motion.
pub fn tls_flows(tls: &TransitionTls, drive: &TlsDrive, k: &TlsFixedPoint) -> Vector5<f64> {
    let e = tls.drive_amplitude(drive.epsilon);
    let d = drive.omega_d - tls.omega_i;
    let g = tls.g_i;
    let t = tls.transverse();
    let pull = -d + 2.0 * g * k.u;
    Vector5::new(
        4.0 * e * k.q - tls.gamma_i * (k.s + 1.0),
        -t * k.p - pull * k.q,
        -t * k.q + pull * k.p - e * k.s,
        -tls.gamma_m / 2.0 * k.u + tls.omega_m * k.v,
        -tls.omega_m * k.u - tls.gamma_m / 2.0 * k.v - g / 2.0 * (k.s + 1.0),
    )
}

pub fn tls_jacobian(tls: &TransitionTls, drive: &TlsDrive, k: &TlsFixedPoint) -> Matrix5<f64> {
    let e = tls.drive_amplitude(drive.epsilon);
    let d = drive.omega_d - tls.omega_i;
    let g = tls.g_i;
    let t = tls.transverse();
    let (wm, gm) = (tls.omega_m, tls.gamma_m / 2.0);
    #[rustfmt::skip]
    let m = Matrix5::new(
        -tls.gamma_i, 0.0, 4.0 * e, 0.0, 0.0,
        0.0, -t, d - 2.0 * g * k.u, -2.0 * g * k.q, 0.0,
        -e, -d + 2.0 * g * k.u, -t, 2.0 * g * k.p, 0.0,
        0.0, 0.0, 0.0, -gm, wm,
        -g / 2.0, 0.0, 0.0, -wm, -gm,
    );
    m
}

/// Back-substitution from the population: q(s), u(s), v(s), p(s).
pub fn fixed_point_from_population(tls: &TransitionTls, drive: &TlsDrive, s: f64) -> TlsFixedPoint {
    let e = tls.drive_amplitude(drive.epsilon);
    let d = drive.omega_d - tls.omega_i;
    let g = tls.g_i;
    let q = tls.gamma_i / (4.0 * e) * (s + 1.0);
    let u = -(g / 2.0) * (s + 1.0) / tls.stiffness();
    let v = -(g * tls.gamma_m / (4.0 * tls.omega_m)) * (s + 1.0) / tls.stiffness();
    let p = -q * (-d + 2.0 * g * u) / tls.transverse();
    TlsFixedPoint { s, p, q, u, v }
}

/// (γ/2 + γ_φ) q(s) + Δ p(s) − 2g u(s) p(s) + ε s; zero at a fixed point.
pub fn population_residual(tls: &TransitionTls, drive: &TlsDrive, s: f64) -> f64 {
    let k = fixed_point_from_population(tls, drive, s);
    let e = tls.drive_amplitude(drive.epsilon);
    let d = drive.omega_d - tls.omega_i;
    tls.transverse() * k.q + d * k.p - 2.0 * tls.g_i * k.u * k.p + e * k.s
}

/// Scan intervals over s ∈ [−1, 0].
pub const POPULATION_SCAN: usize = 400;

/// All fixed points with s ∈ [−1, 0], by sign scan and bisection of the
/// population condition. Interior extrema without a sign change are
/// minimized to catch close root pairs.
pub fn tls_fixed_points(tls: &TransitionTls, drive: &TlsDrive) -> Result<Vec<TlsFixedPoint>> {
    tls.validate()?;
    let e = tls.drive_amplitude(drive.epsilon);
    if e == 0.0 {
        return Ok(vec![TlsFixedPoint::ground()]);
    }
    if !e.is_finite() || !drive.omega_d.is_finite() {
        return Err(Error::InvalidParams("drive must be finite".into()));
    }
    let f = |s: f64| population_residual(tls, drive, s);
    let n = POPULATION_SCAN;
    let xs: Vec<f64> = (0..=n).map(|i| -1.0 + i as f64 / n as f64).collect();
    let fs: Vec<f64> = xs.iter().map(|&s| f(s)).collect();
    let mut brackets = Vec::new();
    for i in 0..n {
        if fs[i] == 0.0 {
            brackets.push((xs[i], xs[i]));
        } else if fs[i + 1] != 0.0 && fs[i].signum() != fs[i + 1].signum() {
            brackets.push((xs[i], xs[i + 1]));
        }
    }
    if fs[n] == 0.0 {
        brackets.push((0.0, 0.0));
    }
    for i in 1..n {
        let sg = fs[i].signum();
        if fs[i - 1].signum() == sg && fs[i + 1].signum() == sg && fs[i].abs() <= fs[i - 1].abs() && fs[i].abs() <= fs[i + 1].abs() {
            let (m, fm) = golden_min(|s| sg * f(s), xs[i - 1], xs[i + 1]);
            if fm < 0.0 {
                brackets.push((xs[i - 1], m));
                brackets.push((m, xs[i + 1]));
            }
        }
    }
    let mut roots: Vec<f64> = brackets
        .into_iter()
        .filter_map(|(lo, hi)| if lo == hi { Some(lo) } else { bisect(f, lo, hi, 0.0).ok() })
        .collect();
    if roots.is_empty() {
        return Err(Error::NoBracket { lo: -1.0, hi: 0.0 });
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    Ok(roots.into_iter().map(|s| fixed_point_from_population(tls, drive, s)).collect())
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

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TlsStability {
    pub eigenvalues: [Complex64; 5],
    pub max_growth: f64,
    pub unstable: bool,
    /// Weight on (u, v) of the eigenvector with the largest growth rate.
    pub critical_mech_weight: f64,
    pub eigen_residual: f64,
}

/// Eigenvalues of the 5×5 Jacobian; unstable iff some Re λ > tol·ω_m.
pub fn tls_stability(tls: &TransitionTls, drive: &TlsDrive, k: &TlsFixedPoint, tol: f64) -> TlsStability {
    let s = tls_jacobian(tls, drive, k);
    let ev = s.complex_eigenvalues();
    let mut eigenvalues = [Complex64::new(0.0, 0.0); 5];
    for i in 0..5 {
        eigenvalues[i] = ev[i];
    }
    let crit = (0..5).max_by(|&a, &b| eigenvalues[a].re.total_cmp(&eigenvalues[b].re)).unwrap();
    let dm = DMatrix::from_iterator(5, 5, s.iter().copied());
    let (critical_mech_weight, eigen_residual) = weight_and_residual(&dm, eigenvalues[crit], &[3, 4]);
    let max_growth = eigenvalues[crit].re;
    TlsStability { eigenvalues, max_growth, unstable: max_growth > tol * tls.omega_m, critical_mech_weight, eigen_residual }
}

/// Default stability threshold in units of ω_m.
pub const STABILITY_TOL: f64 = 1e-9;

/// Whether any fixed point of this transition is unstable.
pub fn transition_unstable(tls: &TransitionTls, drive: &TlsDrive) -> Result<bool> {
    Ok(tls_fixed_points(tls, drive)?.iter().any(|k| tls_stability(tls, drive, k, STABILITY_TOL).unstable))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapPoint {
    pub power_dbm: f64,
    pub omega_d: f64,
    pub unstable: bool,
    /// Bit i set when transition i of the input list is unstable.
    pub which: u32,
    pub hole: Option<String>,
}

pub fn map_point(transitions: &[TransitionTls], omega_d: f64, power_dbm: f64, atten_product: f64) -> MapPoint {
    let drive = TlsDrive { omega_d, epsilon: drive_amplitude(power_dbm, omega_d, atten_product) };
    let mut which = 0u32;
    let mut hole = None;
    for (i, t) in transitions.iter().enumerate() {
        match transition_unstable(t, &drive) {
            Ok(true) => which |= 1 << i,
            Ok(false) => {}
            Err(e) => hole = Some(format!("{}: {e}", t.label.name())),
        }
    }
    MapPoint { power_dbm, omega_d, unstable: which != 0, which, hole }
}

/// Union of the per-transition instability regions on a power × frequency
/// grid, row-major in power.
pub fn union_instability_map(transitions: &[TransitionTls], powers_dbm: &[f64], omega_ds: &[f64], atten_product: f64) -> Vec<MapPoint> {
    powers_dbm
        .iter()
        .flat_map(|&p| omega_ds.iter().map(move |&w| map_point(transitions, w, p, atten_product)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lobe {
    /// Union of the attribution bits over the lobe.
    pub which: u32,
    pub onset_dbm: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    pub n_points: usize,
}

/// Connected unstable regions (4-neighbour) of a map produced by
/// [`union_instability_map`] with `n_freq` frequencies per power row,
/// ordered by onset power.
pub fn lobes(map: &[MapPoint], n_freq: usize) -> Vec<Lobe> {
    let n = map.len();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if seen[start] || !map[start].unstable {
            continue;
        }
        let mut lobe = Lobe { which: 0, onset_dbm: f64::INFINITY, omega_min: f64::INFINITY, omega_max: f64::NEG_INFINITY, n_points: 0 };
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            let pt = &map[i];
            lobe.which |= pt.which;
            lobe.onset_dbm = lobe.onset_dbm.min(pt.power_dbm);
            lobe.omega_min = lobe.omega_min.min(pt.omega_d);
            lobe.omega_max = lobe.omega_max.max(pt.omega_d);
            lobe.n_points += 1;
            let (r, c) = (i / n_freq, i % n_freq);
            let mut nb = Vec::with_capacity(4);
            if c > 0 {
                nb.push(i - 1);
            }
            if c + 1 < n_freq {
                nb.push(i + 1);
            }
            if r > 0 {
                nb.push(i - n_freq);
            }
            if i + n_freq < n {
                nb.push(i + n_freq);
            }
            for j in nb {
                if !seen[j] && map[j].unstable {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        out.push(lobe);
    }
    out.sort_by(|a, b| a.onset_dbm.total_cmp(&b.onset_dbm));
    out
}
