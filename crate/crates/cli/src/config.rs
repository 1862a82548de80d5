//! Run configuration: TOML parsing, validation with field paths, device
//! resolution and the numerics hash.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use flumech::kerr_backaction::KerrModeConfig;
use flumech::polariton_tls::{ThermalWeights, TlsRates};
use flumech::semiclassical3::{ScanOptions, ThreeModeParams};
use flumech::units::{hz, to_hz};
use flumech::DeviceParams;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Spectrum,
    Backaction,
    InstabilityMap,
    Ceqa,
    Fit,
    FixedPoints,
    PolaritonMap,
    Timedomain,
    Calibrate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Backaction => "backaction",
            Command::InstabilityMap => "instability-map",
            Command::Ceqa => "ceqa",
            Command::Fit => "fit",
            Command::FixedPoints => "fixed-points",
            Command::PolaritonMap => "polariton-map",
            Command::Timedomain => "timedomain",
            Command::Calibrate => "calibrate",
        }
    }
}

/// Inclusive range with `n` points; log spacing needs same-sign ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub n: usize,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub log: bool,
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.start];
        }
        let t = |i: usize| i as f64 / (self.n - 1) as f64;
        if self.log {
            let (a, b) = (self.start.abs().ln(), self.stop.abs().ln());
            (0..self.n).map(|i| self.start.signum() * (a + (b - a) * t(i)).exp()).collect()
        } else {
            (0..self.n).map(|i| self.start + (self.stop - self.start) * t(i)).collect()
        }
    }

    fn validate(&self, field: &str) -> Result<(), CliError> {
        if self.n == 0 {
            return Err(CliError::config(format!("{field}.n"), "grid is empty"));
        }
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(CliError::config(field, "range ends must be finite"));
        }
        if self.log && !(self.start * self.stop > 0.0) {
            return Err(CliError::config(field, "log range needs non-zero ends of one sign"));
        }
        Ok(())
    }
}

/// Grid axes. Frequencies and rates are in Hz, flux in units of Φ₀.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_dbm: Option<Range>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freq_hz: Option<Range>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flux: Option<Range>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_hz: Option<Range>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning_hz: Option<Range>,
}

impl Grid {
    fn axes(&self) -> [(&'static str, &Option<Range>); 5] {
        [
            ("power_dbm", &self.power_dbm),
            ("freq_hz", &self.freq_hz),
            ("flux", &self.flux),
            ("epsilon_hz", &self.epsilon_hz),
            ("detuning_hz", &self.detuning_hz),
        ]
    }

    pub fn require(&self, axis: &str) -> Result<&Range, CliError> {
        self.axes()
            .into_iter()
            .find(|(n, _)| *n == axis)
            .and_then(|(_, r)| r.as_ref())
            .ok_or_else(|| CliError::config(format!("grid.{axis}"), "required for this command"))
    }
}

/// Built-in sample or a TOML file of device parameters in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeviceRef {
    Builtin(String),
    File { file: PathBuf },
}

impl Default for DeviceRef {
    fn default() -> Self {
        DeviceRef::Builtin("device2".into())
    }
}

/// Device parameters as written in a device file: rates in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceFile {
    pub omega_c_hz: f64,
    pub kappa_b_hz: f64,
    #[serde(default)]
    pub kappa_in_hz: Option<f64>,
    #[serde(default)]
    pub kappa_e_hz: Option<f64>,
    #[serde(default)]
    pub kappa_0_hz: Option<f64>,
    pub omega_q_max_hz: f64,
    pub j_hz: f64,
    pub alpha_t_hz: f64,
    pub omega_m_hz: f64,
    pub gamma_m_hz: f64,
    pub mass_kg: f64,
    pub length_m: f64,
    pub atten_product: f64,
    pub gain_db: f64,
    #[serde(default = "one")]
    pub xi: f64,
}

fn one() -> f64 {
    1.0
}

impl From<&DeviceFile> for DeviceParams {
    fn from(d: &DeviceFile) -> Self {
        DeviceParams {
            omega_c: hz(d.omega_c_hz),
            kappa_b: hz(d.kappa_b_hz),
            kappa_in: d.kappa_in_hz.map(hz),
            kappa_e: d.kappa_e_hz.map(hz),
            kappa_0: d.kappa_0_hz.map(hz),
            omega_q_max: hz(d.omega_q_max_hz),
            j: hz(d.j_hz),
            alpha_t: hz(d.alpha_t_hz),
            omega_m: hz(d.omega_m_hz),
            gamma_m: hz(d.gamma_m_hz),
            mass: d.mass_kg,
            length_l: d.length_m,
            atten_product: d.atten_product,
            gain_db: d.gain_db,
            xi: d.xi,
        }
    }
}

/// Reduced Kerr mode, Hz. Defaults to the second sample's upper polariton.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KerrBlock {
    pub omega_plus_hz: f64,
    pub kerr_hz: f64,
    pub kappa_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_ex_hz: Option<f64>,
    pub g_hz: f64,
    pub omega_m_hz: f64,
    pub gamma_m_hz: f64,
}

impl Default for KerrBlock {
    fn default() -> Self {
        let c = KerrModeConfig::device2_kerr_mode();
        Self {
            omega_plus_hz: to_hz(c.omega_plus),
            kerr_hz: to_hz(c.kerr_plus),
            kappa_hz: to_hz(c.kappa),
            kappa_ex_hz: c.kappa_ex.map(to_hz),
            g_hz: to_hz(c.g_plus),
            omega_m_hz: to_hz(c.omega_m),
            gamma_m_hz: to_hz(c.gamma_m),
        }
    }
}

impl KerrBlock {
    pub fn to_core(&self) -> KerrModeConfig {
        KerrModeConfig {
            omega_plus: hz(self.omega_plus_hz),
            kerr_plus: hz(self.kerr_hz),
            kappa: hz(self.kappa_hz),
            kappa_ex: self.kappa_ex_hz.map(hz),
            kappa_0: None,
            g_plus: hz(self.g_hz),
            omega_m: hz(self.omega_m_hz),
            gamma_m: hz(self.gamma_m_hz),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LindbladBlock {
    pub dim_cavity: usize,
    pub dim_transmon: usize,
    pub n_th_cavity: f64,
    pub n_th_transmon: f64,
    pub gamma_q_hz: f64,
    pub drive_amp_hz: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumBlock {
    /// In-plane field, T.
    #[serde(default)]
    pub b_par: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lindblad: Option<LindbladBlock>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineModelKind {
    /// Weak-Kerr absorption line of the first sample.
    WeakKerr,
    /// Driven two-level line of the second sample.
    Tls,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CeqaBlock {
    pub model: LineModelKind,
    pub trials: usize,
    /// Relative Gaussian noise on |S21|.
    pub noise: f64,
    #[serde(default)]
    pub free_background: bool,
}

impl Default for CeqaBlock {
    fn default() -> Self {
        Self { model: LineModelKind::WeakKerr, trials: 50, noise: 0.01, free_background: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitBlock {
    /// CSV with columns delta_hz, mag; `#` lines are comments.
    pub trace: PathBuf,
    pub model: LineModelKind,
    #[serde(default)]
    pub free_background: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThreeModeBlock {
    pub omega_c_hz: f64,
    pub omega_q_hz: f64,
    pub j_hz: f64,
    pub alpha_t_hz: f64,
    pub kappa_b_hz: f64,
    pub gamma_hz: f64,
    pub g0_hz: f64,
    pub omega_m_hz: f64,
    pub gamma_m_hz: f64,
    #[serde(default = "default_scan")]
    pub n_scan: usize,
}

fn default_scan() -> usize {
    ScanOptions::default().n_linear
}

impl Default for ThreeModeBlock {
    fn default() -> Self {
        let p = ThreeModeParams::fig6c();
        Self {
            omega_c_hz: to_hz(p.omega_c),
            omega_q_hz: to_hz(p.omega_q),
            j_hz: to_hz(p.j),
            alpha_t_hz: to_hz(p.alpha_t),
            kappa_b_hz: to_hz(p.kappa_b),
            gamma_hz: to_hz(p.gamma),
            g0_hz: to_hz(p.g0),
            omega_m_hz: to_hz(p.omega_m),
            gamma_m_hz: to_hz(p.gamma_m),
            n_scan: default_scan(),
        }
    }
}

impl ThreeModeBlock {
    pub fn to_core(&self) -> (ThreeModeParams, ScanOptions) {
        let p = ThreeModeParams {
            omega_c: hz(self.omega_c_hz),
            omega_q: hz(self.omega_q_hz),
            j: hz(self.j_hz),
            alpha_t: hz(self.alpha_t_hz),
            kappa_b: hz(self.kappa_b_hz),
            gamma: hz(self.gamma_hz),
            g0: hz(self.g0_hz),
            omega_m: hz(self.omega_m_hz),
            gamma_m: hz(self.gamma_m_hz),
        };
        (p, ScanOptions { n_linear: self.n_scan, n_log: self.n_scan, ..Default::default() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolaritonBlock {
    pub gamma_hz: [f64; 4],
    pub gamma_phi_hz: [f64; 4],
    pub weight_ground: f64,
    pub weight_minus: f64,
    pub weight_plus: f64,
}

impl Default for PolaritonBlock {
    fn default() -> Self {
        let (r, w) = (TlsRates::default(), ThermalWeights::default());
        Self {
            gamma_hz: r.gamma.map(to_hz),
            gamma_phi_hz: r.gamma_phi.map(to_hz),
            weight_ground: w.ground,
            weight_minus: w.minus,
            weight_plus: w.plus,
        }
    }
}

impl PolaritonBlock {
    pub fn to_core(&self) -> (TlsRates, ThermalWeights) {
        (
            TlsRates { gamma: self.gamma_hz.map(hz), gamma_phi: self.gamma_phi_hz.map(hz) },
            ThermalWeights { ground: self.weight_ground, minus: self.weight_minus, plus: self.weight_plus },
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimedomainBlock {
    /// s
    pub t_end: f64,
    /// Only the last `record` seconds are sampled.
    pub record: f64,
    /// Samples per mechanical period.
    pub samples_per_period: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Mechanical seed above the fixed point, phonons.
    pub seed_phonons: f64,
    pub resolution_hz: f64,
}

impl Default for TimedomainBlock {
    fn default() -> Self {
        Self { t_end: 2e-3, record: 1e-3, samples_per_period: 16.0, rtol: 1e-9, atol: 1e-12, seed_phonons: 1.0, resolution_hz: 5e3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StarkData {
    pub p_dbm: Vec<f64>,
    pub shift_hz: Vec<f64>,
    /// Qubit detuning from the cavity setting χ, Hz.
    pub qubit_detuning_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainData {
    pub n_d: Vec<f64>,
    pub p_w: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermometryData {
    pub n_d: Vec<f64>,
    /// Sideband PSD in quanta, S_VV/ħω.
    pub svv: Vec<f64>,
    pub g_hz: f64,
    pub kappa_hz: f64,
    #[serde(default = "default_n_add")]
    pub n_add: f64,
}

fn default_n_add() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReflectionData {
    /// CSV with freq_hz and either re, im or mag columns.
    pub trace: PathBuf,
    #[serde(default)]
    pub overcoupled: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stark: Option<StarkData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<GainData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thermometry: Option<ThermometryData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reflection: Option<ReflectionData>,
}

fn default_checkpoint() -> usize {
    64
}

fn default_budget() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default)]
    pub device: DeviceRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_checkpoint")]
    pub checkpoint_every: usize,
    /// Largest tolerated fraction of failed grid points.
    #[serde(default = "default_budget")]
    pub failure_budget: f64,
    #[serde(default)]
    pub plot: bool,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kerr: Option<KerrBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ceqa: Option<CeqaBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub three_mode: Option<ThreeModeBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polariton: Option<PolaritonBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timedomain: Option<TimedomainBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibrate: Option<CalibrateBlock>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| {
            let field = e.span().map(|s| {
                let line = text[..s.start.min(text.len())].matches('\n').count() + 1;
                format!("line {line}")
            });
            CliError::Config { field: field.unwrap_or_default(), message: e.message().to_string() }
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("--config", format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.rebase(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    #[cfg(test)]
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is representable in TOML")
    }

    /// Relative input paths are taken from the config file's directory.
    fn rebase(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        if let DeviceRef::File { file } = &mut self.device {
            fix(file);
        }
        if let Some(f) = &mut self.fit {
            fix(&mut f.trace);
        }
        if let Some(r) = self.calibrate.as_mut().and_then(|c| c.reflection.as_mut()) {
            fix(&mut r.trace);
        }
    }

    /// Settles the command: the config's own, the subcommand's, or an error
    /// when they disagree.
    pub fn resolve_command(&mut self, requested: Option<Command>) -> Result<Command, CliError> {
        match (self.command, requested) {
            (Some(a), Some(b)) if a != b => Err(CliError::config(
                "command",
                format!("config is for `{}` but `{}` was requested", a.name(), b.name()),
            )),
            (Some(c), _) | (None, Some(c)) => {
                self.command = Some(c);
                Ok(c)
            }
            (None, None) => Err(CliError::config("command", "no command in config; use a subcommand or set `command`")),
        }
    }

    pub fn device_params(&self) -> Result<DeviceParams, CliError> {
        let d = match &self.device {
            DeviceRef::Builtin(name) => match name.as_str() {
                "device1" => DeviceParams::device1(),
                "device2" => DeviceParams::device2(),
                other => return Err(CliError::config("device", format!("unknown built-in device `{other}`"))),
            },
            DeviceRef::File { file } => {
                let text = std::fs::read_to_string(file)
                    .map_err(|e| CliError::config("device.file", format!("{}: {e}", file.display())))?;
                let f: DeviceFile = toml::from_str(&text)
                    .map_err(|e| CliError::config("device.file", format!("{}: {}", file.display(), e.message())))?;
                DeviceParams::from(&f)
            }
        };
        d.validate().map_err(|e| CliError::config("device", e.to_string()))?;
        Ok(d)
    }

    /// Checks everything the command needs before any compute starts.
    pub fn validate(&self, cmd: Command) -> Result<(), CliError> {
        for (name, r) in self.grid.axes() {
            if let Some(r) = r {
                r.validate(&format!("grid.{name}"))?;
            }
        }
        if self.checkpoint_every == 0 {
            return Err(CliError::config("checkpoint_every", "must be at least 1"));
        }
        if self.workers == Some(0) {
            return Err(CliError::config("workers", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.failure_budget) {
            return Err(CliError::config("failure_budget", "must lie in [0, 1]"));
        }
        self.device_params()?;
        let core = |field: &str, r: flumech::Result<()>| r.map_err(|e| CliError::config(field, e.to_string()));
        match cmd {
            Command::Spectrum => {
                self.grid.require("flux")?;
                if let Some(l) = self.spectrum.as_ref().and_then(|s| s.lindblad.as_ref()) {
                    self.grid.require("freq_hz")?;
                    core("spectrum.lindblad", lindblad_config(l, 0.0).validate())?;
                    if !(l.drive_amp_hz > 0.0) {
                        return Err(CliError::config("spectrum.lindblad.drive_amp_hz", "must be positive"));
                    }
                }
            }
            Command::Backaction | Command::InstabilityMap | Command::Timedomain => {
                self.drive_axis()?;
                let d = self.grid.require("detuning_hz")?;
                if cmd == Command::InstabilityMap && d.n < 2 {
                    return Err(CliError::config("grid.detuning_hz.n", "boundary scan needs at least 2 points"));
                }
                core("kerr", self.kerr.clone().unwrap_or_default().to_core().validate())?;
                if cmd == Command::Timedomain {
                    let t = self.timedomain.clone().unwrap_or_default();
                    if !(t.t_end > 0.0 && t.record > 0.0 && t.record <= t.t_end) {
                        return Err(CliError::config("timedomain.record", "need 0 < record <= t_end"));
                    }
                    if !(t.samples_per_period >= 8.0) {
                        return Err(CliError::config("timedomain.samples_per_period", "need at least 8"));
                    }
                    if !(t.resolution_hz > 0.0 && t.seed_phonons >= 0.0 && t.rtol > 0.0 && t.atol > 0.0) {
                        return Err(CliError::config("timedomain", "tolerances, resolution and seed must be positive"));
                    }
                }
            }
            Command::Ceqa => {
                let c = self.ceqa.clone().unwrap_or_default();
                if c.trials == 0 {
                    return Err(CliError::config("ceqa.trials", "grid is empty"));
                }
                if !(c.noise >= 0.0 && c.noise.is_finite()) {
                    return Err(CliError::config("ceqa.noise", "must be non-negative"));
                }
                if let Some(f) = &self.grid.freq_hz {
                    if f.n < flumech::ceqa::MIN_FIT_SAMPLES {
                        return Err(CliError::config("grid.freq_hz.n", format!("need at least {} probe points", flumech::ceqa::MIN_FIT_SAMPLES)));
                    }
                }
            }
            Command::Fit => {
                let f = self.fit.as_ref().ok_or_else(|| CliError::config("fit", "missing [fit] block"))?;
                if !f.trace.is_file() {
                    return Err(CliError::config("fit.trace", format!("{} is not a file", f.trace.display())));
                }
            }
            Command::FixedPoints | Command::PolaritonMap => {
                self.grid.require("power_dbm")?;
                self.grid.require("freq_hz")?;
                if cmd == Command::FixedPoints {
                    let b = self.three_mode.clone().unwrap_or_default();
                    if b.n_scan < 10 {
                        return Err(CliError::config("three_mode.n_scan", "need at least 10"));
                    }
                    core("three_mode", b.to_core().0.validate())?;
                } else {
                    core("polariton", self.polariton.clone().unwrap_or_default().to_core().1.validate())?;
                }
            }
            Command::Calibrate => {
                let c = self.calibrate.as_ref().ok_or_else(|| CliError::config("calibrate", "missing [calibrate] block"))?;
                if c.stark.is_none() && c.gain.is_none() && c.thermometry.is_none() && c.reflection.is_none() {
                    return Err(CliError::config("calibrate", "no calibration data given"));
                }
                if let Some(r) = &c.reflection {
                    if !r.trace.is_file() {
                        return Err(CliError::config("calibrate.reflection.trace", format!("{} is not a file", r.trace.display())));
                    }
                }
            }
        }
        Ok(())
    }

    /// Drive axis for the Kerr commands: amplitude or power, not both.
    pub fn drive_axis(&self) -> Result<DriveAxis, CliError> {
        match (&self.grid.epsilon_hz, &self.grid.power_dbm) {
            (Some(e), None) => Ok(DriveAxis::Epsilon(e.values())),
            (None, Some(p)) => Ok(DriveAxis::Power(p.values())),
            (Some(_), Some(_)) => Err(CliError::config("grid", "give either epsilon_hz or power_dbm, not both")),
            (None, None) => Err(CliError::config("grid.epsilon_hz", "required for this command (or grid.power_dbm)")),
        }
    }

    /// Everything that affects numerics, with the device resolved and input
    /// files digested. Output location, worker count, checkpoint interval,
    /// failure budget and plotting are left out.
    pub fn numerics_view(&self, cmd: Command) -> Result<serde_json::Value, CliError> {
        let mut inputs = Vec::new();
        let mut digest_file = |p: &Path| -> Result<(), CliError> {
            let bytes = std::fs::read(p).map_err(|e| CliError::config("input", format!("{}: {e}", p.display())))?;
            inputs.push(hex(&Sha256::digest(&bytes)));
            Ok(())
        };
        if cmd == Command::Fit {
            if let Some(f) = &self.fit {
                digest_file(&f.trace)?;
            }
        }
        if cmd == Command::Calibrate {
            if let Some(r) = self.calibrate.as_ref().and_then(|c| c.reflection.as_ref()) {
                digest_file(&r.trace)?;
            }
        }
        let mut v = serde_json::json!({
            "command": cmd.name(),
            "device": self.device_params()?,
            "seed": self.seed,
            "grid": self.grid,
            "spectrum": self.spectrum,
            "kerr": self.kerr,
            "ceqa": self.ceqa,
            "three_mode": self.three_mode,
            "polariton": self.polariton,
            "timedomain": self.timedomain,
            "inputs": inputs,
        });
        // File paths are location, not numerics; their contents are in `inputs`.
        if let Some(f) = &self.fit {
            v["fit"] = serde_json::json!({ "model": f.model, "free_background": f.free_background });
        }
        if let Some(c) = &self.calibrate {
            v["calibrate"] = serde_json::json!({
                "stark": c.stark,
                "gain": c.gain,
                "thermometry": c.thermometry,
                "overcoupled": c.reflection.as_ref().map(|r| r.overcoupled),
            });
        }
        Ok(v)
    }

    pub fn config_hash(&self, cmd: Command) -> Result<String, CliError> {
        let v = self.numerics_view(cmd)?;
        Ok(hex(&Sha256::digest(serde_json::to_vec(&v).expect("json"))))
    }
}

pub enum DriveAxis {
    Epsilon(Vec<f64>),
    Power(Vec<f64>),
}

impl DriveAxis {
    pub fn len(&self) -> usize {
        match self {
            DriveAxis::Epsilon(v) | DriveAxis::Power(v) => v.len(),
        }
    }

    /// (ε in rad/s, power in dBm) at drive frequency `omega_d`.
    pub fn at(&self, i: usize, omega_d: f64, atten_product: f64) -> (f64, f64) {
        use flumech::units::{drive_amplitude, drive_power_dbm};
        match self {
            DriveAxis::Epsilon(v) => {
                let e = hz(v[i]);
                (e, drive_power_dbm(e, omega_d, atten_product))
            }
            DriveAxis::Power(v) => (drive_amplitude(v[i], omega_d, atten_product), v[i]),
        }
    }
}

pub fn lindblad_config(l: &LindbladBlock, drive_freq: f64) -> flumech::LindbladConfig {
    flumech::LindbladConfig {
        dim_cavity: l.dim_cavity,
        dim_transmon: l.dim_transmon,
        n_th_cavity: l.n_th_cavity,
        n_th_transmon: l.n_th_transmon,
        gamma_q: hz(l.gamma_q_hz),
        drive_amp: hz(l.drive_amp_hz),
        drive_freq,
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
