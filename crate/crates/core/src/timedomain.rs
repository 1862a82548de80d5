//! Direct integration of the mean-field equations of motion in the frame
//! rotating at the drive, output spectra and frequency-comb detection.

use num_complex::Complex64;
use ode_solvers::{Dop853, OutputType, SVector, System};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kerr_backaction::{steady_state_at, KerrModeConfig};
use crate::semiclassical3::{find_fixed_points, flows, ScanOptions, ThreeModeDrive, ThreeModeParams, ThreeModeState};
use crate::units::to_hz;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    /// State (Re α, Im α, Re β, Im β).
    Kerr { cfg: KerrModeConfig, detuning: f64, epsilon: f64 },
    /// State (x, y, p, q, u, v) as in [`ThreeModeState`].
    ThreeMode { params: ThreeModeParams, drive: ThreeModeDrive },
}

impl Model {
    pub fn kerr(cfg: &KerrModeConfig, detuning: f64, epsilon: f64) -> Self {
        Model::Kerr { cfg: cfg.clone(), detuning, epsilon }
    }

    pub fn dim(&self) -> usize {
        match self {
            Model::Kerr { .. } => 4,
            Model::ThreeMode { .. } => 6,
        }
    }

    /// Index of Re β in the state vector.
    pub fn mech_index(&self) -> usize {
        self.dim() - 2
    }

    pub fn omega_m(&self) -> f64 {
        match self {
            Model::Kerr { cfg, .. } => cfg.omega_m,
            Model::ThreeMode { params, .. } => params.omega_m,
        }
    }

    /// √κ_e of the measured port; the output field proxy is √κ_e times the
    /// first complex amplitude.
    pub fn output_coupling(&self) -> f64 {
        match self {
            Model::Kerr { cfg, .. } => cfg.kappa_ex.unwrap_or(cfg.kappa).sqrt(),
            Model::ThreeMode { params, .. } => params.kappa_b.sqrt(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Model::Kerr { cfg, detuning, epsilon } => {
                cfg.validate()?;
                if !detuning.is_finite() || !epsilon.is_finite() {
                    return Err(Error::InvalidParams("non-finite drive".into()));
                }
                Ok(())
            }
            Model::ThreeMode { params, drive } => {
                params.validate()?;
                if !drive.omega_d.is_finite() || !drive.epsilon.is_finite() {
                    return Err(Error::InvalidParams("non-finite drive".into()));
                }
                Ok(())
            }
        }
    }

    pub fn rhs(&self, y: &[f64], dy: &mut [f64]) {
        match self {
            Model::Kerr { cfg, detuning, epsilon } => {
                let (ar, ai, u, v) = (y[0], y[1], y[2], y[3]);
                let n = ar * ar + ai * ai;
                let d_eff = detuning + cfg.kerr_plus * n - 2.0 * cfg.g_plus * u;
                let k = cfg.kappa / 2.0;
                let m = cfg.gamma_m / 2.0;
                dy[0] = -k * ar - d_eff * ai + epsilon;
                dy[1] = d_eff * ar - k * ai;
                dy[2] = -m * u + cfg.omega_m * v;
                dy[3] = -cfg.omega_m * u - m * v - cfg.g_plus * n;
            }
            Model::ThreeMode { params, drive } => {
                let s = ThreeModeState { x: y[0], y: y[1], p: y[2], q: y[3], u: y[4], v: y[5] };
                let f = flows(params, drive, &s);
                dy.copy_from_slice(f.as_slice());
            }
        }
    }

    /// Mean-field fixed points as state vectors, lowest occupation first.
    pub fn fixed_points(&self) -> Result<Vec<Vec<f64>>> {
        match self {
            Model::Kerr { cfg, detuning, epsilon } => Ok(steady_state_at(cfg, *detuning, *epsilon)
                .into_iter()
                .map(|s| vec![s.alpha.re, s.alpha.im, s.beta.re, s.beta.im])
                .collect()),
            Model::ThreeMode { params, drive } => Ok(find_fixed_points(params, drive, &ScanOptions::default())?
                .into_iter()
                .map(|s| s.to_vector().as_slice().to_vec())
                .collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegrationConfig {
    pub t_start: f64,
    pub t_end: f64,
    /// Samples are kept from here on; earlier output is skipped.
    pub record_from: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Output sampling rate, Hz.
    pub sample_rate: f64,
    pub max_steps: u32,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self { t_start: 0.0, t_end: 1e-4, record_from: 0.0, rtol: 1e-9, atol: 1e-12, sample_rate: 64e6, max_steps: 200_000_000 }
    }
}

impl IntegrationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > self.t_start) || !self.t_start.is_finite() || !self.t_end.is_finite() {
            return Err(Error::InvalidParams("t_end must exceed t_start".into()));
        }
        if !(self.rtol >= 0.0) || !(self.atol >= 0.0) || self.rtol + self.atol == 0.0 {
            return Err(Error::InvalidParams("tolerances must be non-negative and not both zero".into()));
        }
        if !(self.sample_rate > 0.0) {
            return Err(Error::InvalidParams("sample_rate must be positive".into()));
        }
        Ok(())
    }

    /// Duration and sampling checks for a spectrum run of `model`: at least
    /// 200 mechanical periods, and 8 samples per period of the highest
    /// retained sideband `k_max`·ω_m.
    pub fn check_for_psd(&self, model: &Model, k_max: u32) -> Result<()> {
        let f_m = to_hz(model.omega_m());
        if (self.t_end - self.t_start.max(self.record_from)) * f_m < 200.0 {
            return Err(Error::InvalidParams("a spectrum run needs at least 200 mechanical periods".into()));
        }
        if self.sample_rate < 8.0 * k_max as f64 * f_m {
            return Err(Error::InvalidParams(format!("sample_rate must be at least 8 x {k_max} x f_m")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub t: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl TimeSeries {
    /// Complex amplitude stored in components (2k, 2k + 1).
    pub fn amplitude(&self, k: usize) -> Vec<Complex64> {
        self.states.iter().map(|y| Complex64::new(y[2 * k], y[2 * k + 1])).collect()
    }

    pub fn output_field(&self, model: &Model) -> Vec<Complex64> {
        let c = model.output_coupling();
        self.amplitude(0).into_iter().map(|a| a * c).collect()
    }

    pub fn mechanics(&self, model: &Model) -> Vec<Complex64> {
        self.amplitude(model.mech_index() / 2)
    }

    pub fn sample_rate(&self) -> f64 {
        if self.t.len() < 2 {
            return f64::NAN;
        }
        (self.t.len() - 1) as f64 / (self.t[self.t.len() - 1] - self.t[0])
    }
}

struct Flow<'a>(&'a Model);

impl<const N: usize> System<f64, SVector<f64, N>> for Flow<'_> {
    fn system(&self, _t: f64, y: &SVector<f64, N>, dy: &mut SVector<f64, N>) {
        self.0.rhs(y.as_slice(), dy.as_mut_slice());
    }
}

fn map_error(e: ode_solvers::dop_shared::IntegrationError) -> Error {
    use ode_solvers::dop_shared::IntegrationError as E;
    match e {
        E::StepSizeUnderflow { x } => Error::StepUnderflow { t: x },
        E::StiffnessDetected { x } => Error::StepUnderflow { t: x },
        E::MaxNumStepReached { n_step, .. } => Error::NoConvergence { what: "time integration", iterations: n_step as usize },
    }
}

fn solver<'a, const N: usize>(model: &'a Model, y0: &[f64], t0: f64, t1: f64, dx: f64, cfg: &IntegrationConfig, out: OutputType) -> Dop853<f64, SVector<f64, N>, Flow<'a>> {
    Dop853::from_param(
        Flow(model),
        t0,
        t1,
        dx,
        SVector::<f64, N>::from_column_slice(y0),
        cfg.rtol,
        cfg.atol,
        0.9,
        0.0,
        0.333,
        6.0,
        t1 - t0,
        0.0,
        cfg.max_steps,
        // Oscillatory flows trip the stiffness heuristic without being stiff.
        u32::MAX,
        out,
    )
}

fn check_finite(t: &[f64], states: &[Vec<f64>]) -> Result<()> {
    match states.iter().position(|s| s.iter().any(|v| !v.is_finite())) {
        Some(i) => Err(Error::StepUnderflow { t: t[i] }),
        None => Ok(()),
    }
}

// The solver's dense output is unreliable on the sample that lands on the
// end point, so the run is extended by one sample and trimmed.
fn sample_n<const N: usize>(model: &Model, y0: &[f64], t0: f64, t1: f64, dx: f64, cfg: &IntegrationConfig) -> Result<TimeSeries> {
    let n = ((t1 - t0) / dx * (1.0 + 1e-12)).floor() as usize + 1;
    let mut s = solver::<N>(model, y0, t0, t0 + n as f64 * dx, dx, cfg, OutputType::Dense);
    s.integrate().map_err(map_error)?;
    let (xs, ys) = (s.x_out(), s.y_out());
    let t: Vec<f64> = (0..n.min(xs.len())).map(|i| t0 + i as f64 * dx).collect();
    let states: Vec<Vec<f64>> = ys.iter().take(t.len()).map(|v| v.as_slice().to_vec()).collect();
    check_finite(&t, &states)?;
    Ok(TimeSeries { t, states })
}

fn advance_n<const N: usize>(model: &Model, y0: &[f64], t0: f64, t1: f64, cfg: &IntegrationConfig) -> Result<Vec<f64>> {
    let mut s = solver::<N>(model, y0, t0, t1, t1 - t0, cfg, OutputType::Sparse);
    s.integrate().map_err(map_error)?;
    let y = s.y_out().last().map(|v| v.as_slice().to_vec()).unwrap_or_else(|| y0.to_vec());
    check_finite(&[t1], std::slice::from_ref(&y))?;
    Ok(y)
}

/// Samples every `dx` on [t0, t1].
fn propagate(model: &Model, y0: &[f64], t0: f64, t1: f64, dx: f64, cfg: &IntegrationConfig) -> Result<TimeSeries> {
    match model.dim() {
        4 => sample_n::<4>(model, y0, t0, t1, dx, cfg),
        6 => sample_n::<6>(model, y0, t0, t1, dx, cfg),
        d => Err(Error::InvalidParams(format!("unsupported state dimension {d}"))),
    }
}

/// End state only.
fn advance(model: &Model, y0: &[f64], t0: f64, t1: f64, cfg: &IntegrationConfig) -> Result<Vec<f64>> {
    if t1 <= t0 {
        return Ok(y0.to_vec());
    }
    match model.dim() {
        4 => advance_n::<4>(model, y0, t0, t1, cfg),
        6 => advance_n::<6>(model, y0, t0, t1, cfg),
        d => Err(Error::InvalidParams(format!("unsupported state dimension {d}"))),
    }
}

/// Adaptive DOP853 integration of the model's mean-field flow, sampled at
/// `cfg.sample_rate`.
pub fn integrate(model: &Model, y0: &[f64], cfg: &IntegrationConfig) -> Result<TimeSeries> {
    model.validate()?;
    cfg.validate()?;
    if y0.len() != model.dim() {
        return Err(Error::InvalidParams(format!("initial state has {} components, expected {}", y0.len(), model.dim())));
    }
    let t_rec = cfg.record_from.clamp(cfg.t_start, cfg.t_end);
    let y = advance(model, y0, cfg.t_start, t_rec, cfg)?;
    propagate(model, &y, t_rec, cfg.t_end, 1.0 / cfg.sample_rate, cfg)
}

/// `fixed_point` with `phonons` added to the mechanical occupation along Re β.
pub fn seeded(model: &Model, fixed_point: &[f64], phonons: f64) -> Vec<f64> {
    let mut y = fixed_point.to_vec();
    y[model.mech_index()] += phonons.sqrt();
    y
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrowthOptions {
    pub seed_phonons: f64,
    /// Settling time before the first window, in mechanical periods.
    pub settle_periods: f64,
    pub duration_periods: f64,
    pub window_periods: u32,
    pub samples_per_period: u32,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for GrowthOptions {
    fn default() -> Self {
        Self {
            seed_phonons: 0.01,
            settle_periods: 50.0,
            duration_periods: 4000.0,
            window_periods: 20,
            samples_per_period: 16,
            rtol: 1e-10,
            atol: 1e-13,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthEstimate {
    /// d ln E / dt of the mechanical deviation energy |β − β̄|², 1/s.
    pub rate: f64,
    pub energy_start: f64,
    pub energy_end: f64,
}

impl GrowthEstimate {
    pub fn unstable(&self) -> bool {
        self.rate > 0.0
    }
}

fn window_energy(model: &Model, ts: &TimeSeries, reference: &[f64]) -> f64 {
    let i = model.mech_index();
    // Drop the duplicated end sample so the window spans whole periods.
    let n = ts.states.len().saturating_sub(1).max(1);
    ts.states[..n]
        .iter()
        .map(|y| (y[i] - reference[i]).powi(2) + (y[i + 1] - reference[i + 1]).powi(2))
        .sum::<f64>()
        / n as f64
}

/// Growth rate of a small mechanical perturbation about `fixed_point`,
/// from the period-averaged deviation energy in a window after settling
/// and a window at the end of the run.
pub fn mechanical_growth(model: &Model, fixed_point: &[f64], opts: &GrowthOptions) -> Result<GrowthEstimate> {
    model.validate()?;
    let period = 2.0 * std::f64::consts::PI / model.omega_m();
    let cfg = IntegrationConfig { rtol: opts.rtol, atol: opts.atol, ..IntegrationConfig::default() };
    let w = opts.window_periods as f64 * period;
    let dx = period / opts.samples_per_period as f64;
    let t_a = opts.settle_periods * period;
    let t_b = (opts.duration_periods * period).max(t_a + 2.0 * w);
    let y0 = seeded(model, fixed_point, opts.seed_phonons);
    let y_a = advance(model, &y0, 0.0, t_a, &cfg)?;
    let first = propagate(model, &y_a, t_a, t_a + w, dx, &cfg)?;
    let y_b = advance(model, &y_a, t_a, t_b - w, &cfg)?;
    let last = propagate(model, &y_b, t_b - w, t_b, dx, &cfg)?;
    let e1 = window_energy(model, &first, fixed_point);
    let e2 = window_energy(model, &last, fixed_point);
    Ok(GrowthEstimate { rate: (e2 / e1).ln() / (t_b - t_a - w), energy_start: e1, energy_end: e2 })
}

/// Time-domain instability verdict on the lowest fixed point. A step-size
/// underflow counts as unstable.
pub fn unstable_in_time_domain(model: &Model, opts: &GrowthOptions) -> Result<bool> {
    let fps = model.fixed_points()?;
    let fp = fps.first().ok_or(Error::NoBracket { lo: 0.0, hi: 0.0 })?;
    match mechanical_growth(model, fp, opts) {
        Ok(g) => Ok(g.unstable()),
        Err(Error::StepUnderflow { .. }) => Ok(true),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Decaying,
    LimitCycle,
    UnstableUnsaturated,
}

/// Classifies a run from its period-averaged mechanical energy envelope:
/// a limit cycle has grown and then levelled off within `flat` relative
/// change over the last two windows.
pub fn classify_envelope(model: &Model, ts: &TimeSeries, window_periods: u32, flat: f64) -> Outcome {
    let env = energy_envelope(model, ts, window_periods);
    if env.len() < 3 {
        return Outcome::UnstableUnsaturated;
    }
    let (first, prev, last) = (env[0], env[env.len() - 2], env[env.len() - 1]);
    let levelled = ((last - prev) / prev).abs() < flat;
    if last < first {
        Outcome::Decaying
    } else if levelled {
        Outcome::LimitCycle
    } else {
        Outcome::UnstableUnsaturated
    }
}

/// Mean |β|² over consecutive windows of whole mechanical periods.
pub fn energy_envelope(model: &Model, ts: &TimeSeries, window_periods: u32) -> Vec<f64> {
    let fs = ts.sample_rate();
    let per_window = ((window_periods as f64) * fs * 2.0 * std::f64::consts::PI / model.omega_m()).round() as usize;
    if per_window == 0 {
        return Vec::new();
    }
    let b = ts.mechanics(model);
    b.chunks_exact(per_window).map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>() / c.len() as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Hann,
    Rectangular,
}

impl Window {
    fn weights(self, n: usize) -> Vec<f64> {
        match self {
            // Periodic Hann.
            Window::Hann => (0..n).map(|i| (std::f64::consts::PI * i as f64 / n as f64).sin().powi(2)).collect(),
            Window::Rectangular => vec![1.0; n],
        }
    }

    /// Half-width of the main lobe in bins.
    fn lobe(self) -> usize {
        match self {
            Window::Hann => 2,
            Window::Rectangular => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsdOptions {
    /// Requested bin spacing, Hz.
    pub resolution: f64,
    pub discard_fraction: f64,
    pub overlap: f64,
    pub window: Window,
    pub remove_mean: bool,
    /// Peak threshold relative to the noise floor.
    pub prominence: f64,
    /// The floor is never below this fraction of the PSD maximum.
    pub dynamic_range: f64,
}

impl Default for PsdOptions {
    fn default() -> Self {
        Self {
            resolution: 5e3,
            discard_fraction: 0.3,
            overlap: 0.75,
            window: Window::Hann,
            remove_mean: false,
            prominence: 10.0,
            dynamic_range: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    pub freq: f64,
    /// Power integrated over the main lobe.
    pub power: f64,
    /// PSD at the peak bin.
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsdResult {
    /// Frequencies relative to the drive, Hz, ascending.
    pub freq: Vec<f64>,
    pub psd: Vec<f64>,
    pub peaks: Vec<Peak>,
    pub comb_detected: bool,
    pub comb_spacing: Option<f64>,
    pub resolution: f64,
    pub floor: f64,
    /// Mean |x|² of the analysed segment after optional mean removal.
    pub variance: f64,
    n_lobe: usize,
}

impl PsdResult {
    pub fn integrated_power(&self) -> f64 {
        self.psd.iter().sum::<f64>() * self.resolution
    }

    fn bin_of(&self, f: f64) -> Option<usize> {
        let i = ((f - self.freq[0]) / self.resolution).round();
        (i >= 0.0 && (i as usize) < self.freq.len()).then_some(i as usize)
    }

    /// Largest PSD value within the main lobe around `f`.
    pub fn density_near(&self, f: f64) -> f64 {
        let Some(i) = self.bin_of(f) else { return 0.0 };
        let lo = i.saturating_sub(self.n_lobe);
        let hi = (i + self.n_lobe).min(self.psd.len() - 1);
        self.psd[lo..=hi].iter().copied().fold(0.0, f64::max)
    }

    pub fn with_comb(mut self, omega_m: f64, opts: &CombOptions) -> Self {
        let c = comb_detect(&self, omega_m, opts);
        self.comb_detected = c.detected;
        self.comb_spacing = c.spacing;
        self
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s[s.len() / 2]
}

/// Welch averaged periodogram of a complex series sampled at `fs` Hz,
/// two-sided, normalised so that Σ psd·Δf equals the mean power.
pub fn psd(series: &[Complex64], fs: f64, opts: &PsdOptions) -> Result<PsdResult> {
    if !(fs > 0.0) || !(opts.resolution > 0.0) || !(0.0..1.0).contains(&opts.discard_fraction) || !(0.0..1.0).contains(&opts.overlap) {
        return Err(Error::InvalidParams("invalid PSD options".into()));
    }
    let nseg = ((fs / opts.resolution).ceil() as usize).next_power_of_two().max(8);
    let start = (series.len() as f64 * opts.discard_fraction).floor() as usize;
    let mut x: Vec<Complex64> = series[start..].to_vec();
    if x.len() < nseg {
        return Err(Error::SegmentTooShort(format!("{} samples after discard, {} needed for {} Hz", x.len(), nseg, opts.resolution)));
    }
    if opts.remove_mean {
        let m = x.iter().sum::<Complex64>() / x.len() as f64;
        x.iter_mut().for_each(|v| *v -= m);
    }
    let w = opts.window.weights(nseg);
    let u: f64 = w.iter().map(|v| v * v).sum();
    let step = ((nseg as f64 * (1.0 - opts.overlap)).round() as usize).max(1);
    let n_avg = (x.len() - nseg) / step + 1;
    let fft = FftPlanner::new().plan_fft_forward(nseg);
    let mut acc = vec![0.0; nseg];
    let mut buf = vec![Complex64::new(0.0, 0.0); nseg];
    for s in 0..n_avg {
        let seg = &x[s * step..s * step + nseg];
        for ((b, v), wi) in buf.iter_mut().zip(seg).zip(&w) {
            *b = v * wi;
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
    }
    let df = fs / nseg as f64;
    let scale = 1.0 / (fs * u * n_avg as f64);
    let half = nseg / 2;
    let freq: Vec<f64> = (0..nseg).map(|k| (k as f64 - half as f64) * df).collect();
    let psd: Vec<f64> = (0..nseg).map(|k| acc[(k + half) % nseg] * scale).collect();
    let used = &x[..(n_avg - 1) * step + nseg];
    let variance = used.iter().map(|v| v.norm_sqr()).sum::<f64>() / used.len() as f64;
    let peak_max = psd.iter().copied().fold(0.0, f64::max);
    let floor = median(&psd).max(opts.dynamic_range * peak_max);
    let n_lobe = opts.window.lobe();
    let peaks = find_peaks(&freq, &psd, df, n_lobe, opts.prominence * floor);
    Ok(PsdResult { freq, psd, peaks, comb_detected: false, comb_spacing: None, resolution: df, floor, variance, n_lobe })
}

fn find_peaks(freq: &[f64], psd: &[f64], df: f64, lobe: usize, threshold: f64) -> Vec<Peak> {
    let n = psd.len();
    let mut out = Vec::new();
    for i in 1..n - 1 {
        let c = psd[i];
        if c <= threshold {
            continue;
        }
        let lo = i.saturating_sub(lobe);
        let hi = (i + lobe).min(n - 1);
        // Ties go to the leftmost bin.
        if (lo..i).any(|j| psd[j] >= c) || (i + 1..=hi).any(|j| psd[j] > c) {
            continue;
        }
        let (l, r) = (psd[i - 1].max(f64::MIN_POSITIVE).ln(), psd[i + 1].max(f64::MIN_POSITIVE).ln());
        let cl = c.ln();
        let denom = l - 2.0 * cl + r;
        let shift = if denom < 0.0 { (0.5 * (l - r) / denom).clamp(-0.5, 0.5) } else { 0.0 };
        let wide = lobe + 1;
        let plo = i.saturating_sub(wide);
        let phi = (i + wide).min(n - 1);
        let power = psd[plo..=phi].iter().sum::<f64>() * df;
        out.push(Peak { freq: freq[i] + shift * df, power, density: c });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CombOptions {
    /// Allowed relative offset of the spacing from f_m.
    pub spacing_tolerance: f64,
    /// Required ratio of the ±2-tooth PSD to the noise floor.
    pub sideband_factor: f64,
    pub min_teeth: usize,
}

impl Default for CombOptions {
    fn default() -> Self {
        Self { spacing_tolerance: 0.05, sideband_factor: 10.0, min_teeth: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comb {
    pub detected: bool,
    pub spacing: Option<f64>,
    /// (order k, frequency) of the teeth used.
    pub teeth: Vec<(i32, f64)>,
    /// PSD at the stronger of the ±2 teeth over the floor.
    pub sideband_ratio: f64,
}

/// Looks for teeth at k·s around the drive with s within tolerance of
/// ω_m/2π, plus the practical condition on the second-order sidebands.
pub fn comb_detect(psd: &PsdResult, omega_m: f64, opts: &CombOptions) -> Comb {
    let f_m = to_hz(omega_m);
    let none = Comb { detected: false, spacing: None, teeth: Vec::new(), sideband_ratio: 0.0 };
    if !(psd.resolution < f_m / 10.0) || psd.peaks.is_empty() {
        return none;
    }
    let df = psd.resolution;
    let k_max = (psd.freq[psd.freq.len() - 1] / (f_m * (1.0 - opts.spacing_tolerance))).floor() as i32;
    let mut teeth: Vec<(i32, Peak)> = Vec::new();
    for k in -k_max..=k_max {
        let best = psd
            .peaks
            .iter()
            .filter(|p| {
                if k == 0 {
                    p.freq.abs() <= 2.0 * df
                } else {
                    let s = p.freq / k as f64;
                    (s - f_m).abs() <= opts.spacing_tolerance * f_m
                }
            })
            .max_by(|a, b| a.density.total_cmp(&b.density));
        if let Some(p) = best {
            teeth.push((k, *p));
        }
    }
    let sideband_teeth: Vec<&(i32, Peak)> = teeth.iter().filter(|(k, _)| *k != 0).collect();
    if sideband_teeth.is_empty() {
        return none;
    }
    let num: f64 = sideband_teeth.iter().map(|(k, p)| *k as f64 * p.freq).sum();
    let den: f64 = sideband_teeth.iter().map(|(k, _)| (*k as f64).powi(2)).sum();
    let s = num / den;
    let consistent: Vec<(i32, f64)> = teeth
        .iter()
        .filter(|(k, p)| (p.freq - *k as f64 * s).abs() <= 2.0 * df)
        .map(|(k, p)| (*k, p.freq))
        .collect();
    let sideband_ratio = psd.density_near(2.0 * s).max(psd.density_near(-2.0 * s)) / psd.floor;
    let detected = consistent.len() >= opts.min_teeth
        && (s - f_m).abs() <= opts.spacing_tolerance * f_m
        && sideband_ratio > opts.sideband_factor;
    Comb { detected, spacing: Some(s), teeth: consistent, sideband_ratio }
}

#[cfg(test)]
mod tests;
