//! Device parameters, transmon tuning, the two-excitation transmon–cavity
//! Hamiltonian and quantities derived from its spectrum.

mod kerr;
mod lindblad;

pub use kerr::{kerr_estimate, kerr_estimate_at, kerr_from_hamiltonian, kerr_ladder, ladder_hamiltonian, Branch, KerrEstimate, KERR_DIM};
pub use lindblad::{
    cavity_expectation, hermitian_eigenvalues, lindblad_steady_state, lindblad_transmission,
    lindblad_transmission_at, LindbladConfig,
};

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix3, SMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{hz, to_hz, HBAR};

/// Magnetic flux quantum h/2e in Wb.
pub const FLUX_QUANTUM: f64 = 2.067_833_848e-15;

/// Relative tolerance for κ_0 + κ_in + κ_e against κ_b.
pub const KAPPA_SPLIT_TOL: f64 = 0.05;

pub type Hamiltonian6 = SMatrix<f64, 6, 6>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    pub omega_c: f64,
    pub kappa_b: f64,
    pub kappa_in: Option<f64>,
    pub kappa_e: Option<f64>,
    pub kappa_0: Option<f64>,
    pub omega_q_max: f64,
    pub j: f64,
    /// Anharmonicity magnitude, stored positive.
    pub alpha_t: f64,
    pub omega_m: f64,
    pub gamma_m: f64,
    /// kg
    pub mass: f64,
    /// m
    pub length_l: f64,
    /// Input attenuation times 1/κ_in, opaque calibration constant.
    pub atten_product: f64,
    pub gain_db: f64,
    pub xi: f64,
}

impl DeviceParams {
    /// First sample: cavity-like upper polariton, J/2π = 72 MHz.
    pub fn device1() -> Self {
        Self {
            omega_c: hz(5.846e9),
            kappa_b: hz(8e6),
            kappa_in: None,
            kappa_e: Some(hz(6.2e6)),
            kappa_0: None,
            omega_q_max: hz(7.38e9),
            j: hz(72e6),
            alpha_t: hz(284e6),
            omega_m: hz(3.97e6),
            gamma_m: hz(6.0),
            mass: 0.75e-15,
            length_l: 40e-6,
            atten_product: 17444.0,
            gain_db: 58.5,
            xi: 1.0,
        }
    }

    /// Second sample: J/2π = 193 MHz.
    pub fn device2() -> Self {
        Self {
            omega_c: hz(5.744e9),
            omega_q_max: hz(8.26e9),
            j: hz(193e6),
            alpha_t: hz(300e6),
            atten_product: 1647.0,
            gain_db: 64.3,
            ..Self::device1()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("omega_c", self.omega_c),
            ("kappa_b", self.kappa_b),
            ("omega_q_max", self.omega_q_max),
            ("J", self.j),
            ("alpha_T", self.alpha_t),
            ("omega_m", self.omega_m),
            ("gamma_m", self.gamma_m),
            ("mass", self.mass),
            ("length_l", self.length_l),
            ("atten_product", self.atten_product),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be positive and finite, got {v}")));
            }
        }
        for (name, v) in [("kappa_in", self.kappa_in), ("kappa_e", self.kappa_e), ("kappa_0", self.kappa_0)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
                }
            }
        }
        if !(self.xi > 0.0 && self.xi <= 1.0) {
            return Err(Error::InvalidParams(format!("xi must lie in (0, 1], got {}", self.xi)));
        }
        if !self.gain_db.is_finite() {
            return Err(Error::InvalidParams("gain_dB must be finite".into()));
        }
        if let (Some(a), Some(b), Some(c)) = (self.kappa_in, self.kappa_e, self.kappa_0) {
            let sum = a + b + c;
            if (sum - self.kappa_b).abs() > KAPPA_SPLIT_TOL * self.kappa_b {
                return Err(Error::InvalidParams(format!(
                    "kappa_0 + kappa_in + kappa_e = {:.4e} Hz differs from kappa_b = {:.4e} Hz",
                    to_hz(sum),
                    to_hz(self.kappa_b)
                )));
            }
        }
        Ok(())
    }

    /// Zero-point displacement √(ħ/2mω_m) in m.
    pub fn x_zpf(&self) -> f64 {
        (HBAR / (2.0 * self.mass * self.omega_m)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxPoint {
    /// Φ/Φ₀
    pub phi_ratio: f64,
    /// Axial field B∥ in T.
    pub b_par: f64,
    /// Normal field B⊥ in T.
    pub b_perp: f64,
}

impl FluxPoint {
    pub fn new(phi_ratio: f64, b_par: f64) -> Self {
        Self { phi_ratio, b_par, b_perp: 0.0 }
    }
}

/// Symmetric-SQUID transmon frequency (ω_q,max + α_T)√|cos πΦ/Φ₀| − α_T.
///
/// At Φ/Φ₀ = 0.5 this returns −α_T: the transmon is tuned out of the band and
/// callers should treat that point as unusable.
pub fn transmon_frequency(params: &DeviceParams, phi_ratio: f64) -> f64 {
    (params.omega_q_max + params.alpha_t) * (PI * phi_ratio).cos().abs().sqrt() - params.alpha_t
}

/// d ω_q / d(Φ/Φ₀), analytic, on the branch |Φ/Φ₀| < 0.5.
pub fn transmon_slope(params: &DeviceParams, phi_ratio: f64) -> f64 {
    let c = (PI * phi_ratio).cos();
    let s = (PI * phi_ratio).sin();
    -(params.omega_q_max + params.alpha_t) * PI * s * c.signum() / (2.0 * c.abs().sqrt())
}

/// Flux on the monotone branch [0, 0.5) giving the requested transmon frequency.
pub fn flux_for_qubit_frequency(params: &DeviceParams, omega_q: f64) -> Result<f64> {
    if omega_q > params.omega_q_max || omega_q <= -params.alpha_t {
        return Err(Error::InvalidParams(format!(
            "qubit frequency {:.6e} Hz is outside the tuning range",
            to_hz(omega_q)
        )));
    }
    let c = ((omega_q + params.alpha_t) / (params.omega_q_max + params.alpha_t)).powi(2);
    Ok(c.clamp(-1.0, 1.0).acos() / PI)
}

/// Two-excitation transmon–cavity Hamiltonian in the basis
/// |0⟩, |q⟩, |c⟩, |qq⟩, |cq⟩, |cc⟩ (q: transmon, c: cavity).
pub fn build_hamiltonian_at(omega_q: f64, omega_c: f64, j: f64, alpha_t: f64) -> Hamiltonian6 {
    let s2j = std::f64::consts::SQRT_2 * j;
    let mut h = Hamiltonian6::zeros();
    h[(1, 1)] = omega_q;
    h[(2, 2)] = omega_c;
    h[(1, 2)] = j;
    h[(2, 1)] = j;
    h[(3, 3)] = 2.0 * omega_q - alpha_t;
    h[(4, 4)] = omega_c + omega_q;
    h[(5, 5)] = 2.0 * omega_c;
    h[(3, 4)] = s2j;
    h[(4, 3)] = s2j;
    h[(4, 5)] = s2j;
    h[(5, 4)] = s2j;
    h
}

pub fn build_hamiltonian(params: &DeviceParams, flux: &FluxPoint) -> Hamiltonian6 {
    build_hamiltonian_at(
        transmon_frequency(params, flux.phi_ratio),
        params.omega_c,
        params.j,
        params.alpha_t,
    )
}

/// Diagonalized two-excitation manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigensystem {
    /// E₀ … E₅, ground subtracted; ascending within each block.
    pub energies: [f64; 6],
    /// Columns are eigenvectors in the bare basis, same order as `energies`.
    pub vectors: Hamiltonian6,
}

const BLOCKS: [(usize, usize); 3] = [(0, 1), (1, 3), (3, 6)];

/// Diagonalize block by block. Input must be symmetric and must not couple
/// different excitation numbers.
pub fn diagonalize(h: &Hamiltonian6) -> Result<Eigensystem> {
    let scale = h.amax().max(1.0);
    let asym = (h - h.transpose()).amax();
    if asym > 1e-12 * scale {
        return Err(Error::NonSymmetric(asym));
    }
    for (bi, &(a0, a1)) in BLOCKS.iter().enumerate() {
        for &(b0, b1) in &BLOCKS[bi + 1..] {
            for i in a0..a1 {
                for k in b0..b1 {
                    if h[(i, k)] != 0.0 {
                        return Err(Error::InvalidParams(
                            "Hamiltonian couples different excitation numbers".into(),
                        ));
                    }
                }
            }
        }
    }
    let mut energies = [0.0; 6];
    let mut vectors = Hamiltonian6::zeros();
    let e0 = h[(0, 0)];
    vectors[(0, 0)] = 1.0;

    let b1 = Matrix2::new(h[(1, 1)], h[(1, 2)], h[(2, 1)], h[(2, 2)]);
    let eig1 = SymmetricEigen::new(b1);
    let mut idx1 = [0usize, 1];
    idx1.sort_by(|&a, &b| eig1.eigenvalues[a].total_cmp(&eig1.eigenvalues[b]));
    for (slot, &k) in idx1.iter().enumerate() {
        energies[1 + slot] = eig1.eigenvalues[k] - e0;
        let v = eig1.eigenvectors.column(k);
        let sign = canonical_sign(v.iter().copied());
        for r in 0..2 {
            vectors[(1 + r, 1 + slot)] = sign * v[r];
        }
    }

    let b2 = Matrix3::from_fn(|r, c| h[(3 + r, 3 + c)]);
    let eig2 = SymmetricEigen::new(b2);
    let mut idx2 = [0usize, 1, 2];
    idx2.sort_by(|&a, &b| eig2.eigenvalues[a].total_cmp(&eig2.eigenvalues[b]));
    for (slot, &k) in idx2.iter().enumerate() {
        energies[3 + slot] = eig2.eigenvalues[k] - e0;
        let v = eig2.eigenvectors.column(k);
        let sign = canonical_sign(v.iter().copied());
        for r in 0..3 {
            vectors[(3 + r, 3 + slot)] = sign * v[r];
        }
    }
    Ok(Eigensystem { energies, vectors })
}

/// Sign making the largest-magnitude component positive.
fn canonical_sign(v: impl Iterator<Item = f64>) -> f64 {
    let big = v.fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
    if big < 0.0 {
        -1.0
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionLabel {
    /// |g⟩ → |−⟩
    Minus,
    /// |g⟩ → |+⟩
    Plus,
    /// |−⟩ → |α⟩
    MinusAlpha,
    /// |−⟩ → |β⟩
    MinusBeta,
    /// |+⟩ → |γ⟩
    PlusGamma,
    /// Two-photon |g⟩ → |γ⟩, at half its energy.
    GammaHalf,
    /// |−⟩ → |γ⟩
    MinusGamma,
    /// |+⟩ → |α⟩
    PlusAlpha,
    /// |+⟩ → |β⟩
    PlusBeta,
}

impl TransitionLabel {
    /// The transitions listed in a [`PolaritonSpectrum`].
    pub const PRIMARY: [TransitionLabel; 6] = [
        Self::Minus,
        Self::Plus,
        Self::MinusAlpha,
        Self::MinusBeta,
        Self::PlusGamma,
        Self::GammaHalf,
    ];

    /// Every one-to-two-excitation transition.
    pub const HIGHER: [TransitionLabel; 6] = [
        Self::MinusAlpha,
        Self::MinusBeta,
        Self::MinusGamma,
        Self::PlusAlpha,
        Self::PlusBeta,
        Self::PlusGamma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Minus => "minus",
            Self::Plus => "plus",
            Self::MinusAlpha => "minus_alpha",
            Self::MinusBeta => "minus_beta",
            Self::PlusGamma => "plus_gamma",
            Self::GammaHalf => "gamma_half",
            Self::MinusGamma => "minus_gamma",
            Self::PlusAlpha => "plus_alpha",
            Self::PlusBeta => "plus_beta",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let all = [Self::PRIMARY.as_slice(), &[Self::MinusGamma, Self::PlusAlpha, Self::PlusBeta]].concat();
        all.into_iter().find(|l| l.name() == s)
    }

    /// Frequency from energies E₀ … E₅ = g, −, +, α, β, γ.
    pub fn frequency(self, e: &[f64; 6]) -> f64 {
        match self {
            Self::Minus => e[1] - e[0],
            Self::Plus => e[2] - e[0],
            Self::MinusAlpha => e[3] - e[1],
            Self::MinusBeta => e[4] - e[1],
            Self::MinusGamma => e[5] - e[1],
            Self::PlusAlpha => e[3] - e[2],
            Self::PlusBeta => e[4] - e[2],
            Self::PlusGamma => e[5] - e[2],
            Self::GammaHalf => (e[5] - e[0]) / 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PolaritonSpectrum {
    pub eigen_energies: [f64; 6],
    pub transitions: Vec<(TransitionLabel, f64)>,
    /// G_i in rad/s per Φ₀, same order as `transitions`.
    pub responsivities: Vec<f64>,
    pub kerr_plus: Option<f64>,
    /// g_i in rad/s, same order as `transitions`.
    pub couplings: Vec<f64>,
}

impl PolaritonSpectrum {
    pub fn from_energies(energies: [f64; 6]) -> Self {
        let mut s = Self { eigen_energies: energies, ..Default::default() };
        s.transitions = transition_frequencies(&s);
        s
    }

    pub fn frequency(&self, label: TransitionLabel) -> f64 {
        label.frequency(&self.eigen_energies)
    }

    pub fn coupling(&self, label: TransitionLabel) -> Option<f64> {
        let i = self.transitions.iter().position(|(l, _)| *l == label)?;
        self.couplings.get(i).copied()
    }
}

pub fn transition_frequencies(spec: &PolaritonSpectrum) -> Vec<(TransitionLabel, f64)> {
    TransitionLabel::PRIMARY
        .iter()
        .map(|&l| (l, l.frequency(&spec.eigen_energies)))
        .collect()
}

fn energies_at(params: &DeviceParams, phi: f64) -> [f64; 6] {
    let h = build_hamiltonian(params, &FluxPoint::new(phi, 0.0));
    diagonalize(&h).expect("constructed Hamiltonian is block symmetric").energies
}

/// Everything derivable at one flux point: energies, transitions, G_i, g_i and K₊.
pub fn polariton_spectrum(params: &DeviceParams, flux: &FluxPoint) -> Result<PolaritonSpectrum> {
    let eig = diagonalize(&build_hamiltonian(params, flux))?;
    let mut spec = PolaritonSpectrum::from_energies(eig.energies);
    let mut gs = Vec::new();
    let mut cs = Vec::new();
    for &(label, _) in &spec.transitions {
        let g = flux_responsivity(params, flux, label)?;
        gs.push(g);
        cs.push(coupling_from_responsivity(params, flux, g));
    }
    spec.responsivities = gs;
    spec.couplings = cs;
    spec.kerr_plus = Some(kerr_estimate(params, flux, Branch::Upper)?.kerr);
    Ok(spec)
}

const FD_STEP: f64 = 1e-4;
const FD_RTOL: f64 = 1e-6;

/// Central difference of any scalar function of Φ/Φ₀ with Richardson
/// refinement, halving the step until two successive estimates agree.
pub fn flux_derivative<F: Fn(f64) -> f64>(f: F, phi: f64, abs_floor: f64) -> Result<f64> {
    let central = |h: f64| (f(phi + h) - f(phi - h)) / (2.0 * h);
    let richardson = |h: f64| (4.0 * central(h / 2.0) - central(h)) / 3.0;
    let mut h = FD_STEP;
    let mut prev = richardson(h);
    for _ in 0..12 {
        h /= 2.0;
        let next = richardson(h);
        if !next.is_finite() {
            break;
        }
        if (next - prev).abs() <= FD_RTOL * next.abs().max(abs_floor) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::FluxSingular { phi })
}

/// G_i = dω_i/dΦ in rad/s per Φ₀.
pub fn flux_responsivity(params: &DeviceParams, flux: &FluxPoint, label: TransitionLabel) -> Result<f64> {
    let phi = flux.phi_ratio;
    if (phi.abs() - 0.5).abs() < 2.0 * FD_STEP {
        return Err(Error::FluxSingular { phi });
    }
    flux_derivative(|p| label.frequency(&energies_at(params, p)), phi, 1e-9 * params.omega_q_max)
}

/// g = ξ G B∥ l x_zpf / Φ₀ for a responsivity G in rad/s per Φ₀.
pub fn coupling_from_responsivity(params: &DeviceParams, flux: &FluxPoint, g_resp: f64) -> f64 {
    params.xi * g_resp * flux.b_par * params.length_l * params.x_zpf() / FLUX_QUANTUM
}

pub fn coupling_g(params: &DeviceParams, flux: &FluxPoint, label: TransitionLabel) -> Result<f64> {
    if flux.b_par == 0.0 {
        return Ok(0.0);
    }
    if flux.b_par < 0.0 {
        return Err(Error::InvalidParams("B_par must be non-negative".into()));
    }
    Ok(coupling_from_responsivity(params, flux, flux_responsivity(params, flux, label)?))
}

/// Rescale a known coupling by the ratio of responsivities.
pub fn scale_known_g(g_ref: f64, g_resp_ref: f64, g_resp_new: f64) -> f64 {
    g_ref * g_resp_new / g_resp_ref
}

/// Flux on the monotone branch at which the upper polariton sits at `omega_plus`.
pub fn flux_for_upper_polariton(params: &DeviceParams, omega_plus: f64) -> Result<f64> {
    let f = |phi: f64| TransitionLabel::Plus.frequency(&energies_at(params, phi)) - omega_plus;
    crate::roots::bisect(f, 0.0, 0.5 - 1e-9, 1e-13)
}

/// Flux on the monotone branch at which the lower polariton sits at `omega_minus`.
pub fn flux_for_lower_polariton(params: &DeviceParams, omega_minus: f64) -> Result<f64> {
    let f = |phi: f64| TransitionLabel::Minus.frequency(&energies_at(params, phi)) - omega_minus;
    crate::roots::bisect(f, 0.0, 0.5 - 1e-9, 1e-13)
}

/// Energies along a flux sweep with labels carried by maximum eigenvector
/// overlap with the previous point rather than by energy order.
pub fn tracked_sweep(params: &DeviceParams, phis: &[f64]) -> Result<Vec<[f64; 6]>> {
    let mut out = Vec::with_capacity(phis.len());
    let mut prev: Option<Hamiltonian6> = None;
    for &phi in phis {
        let eig = diagonalize(&build_hamiltonian(params, &FluxPoint::new(phi, 0.0)))?;
        let (energies, vectors) = match &prev {
            None => (eig.energies, eig.vectors),
            Some(pv) => relabel(&eig, pv),
        };
        out.push(energies);
        prev = Some(vectors);
    }
    Ok(out)
}

fn relabel(eig: &Eigensystem, prev: &Hamiltonian6) -> ([f64; 6], Hamiltonian6) {
    let mut energies = eig.energies;
    let mut vectors = eig.vectors;
    for &(lo, hi) in &BLOCKS[1..] {
        let mut taken = vec![false; hi - lo];
        for slot in lo..hi {
            let pcol = prev.column(slot);
            let mut best = (0.0, lo);
            for (k, t) in taken.iter().enumerate() {
                if *t {
                    continue;
                }
                let ov = pcol.dot(&eig.vectors.column(lo + k)).abs();
                if ov >= best.0 {
                    best = (ov, lo + k);
                }
            }
            taken[best.1 - lo] = true;
            energies[slot] = eig.energies[best.1];
            let col = eig.vectors.column(best.1);
            let sign = if pcol.dot(&col) < 0.0 { -1.0 } else { 1.0 };
            vectors.set_column(slot, &(col * sign));
        }
    }
    (energies, vectors)
}

#[cfg(test)]
mod tests;
