//! One [`Job`] per subcommand, built from a validated config.

use std::path::Path;

use flumech::calibration::{
    dispersive_shift_checked, fit_atten_product, output_gain, reflection_fit, sideband_thermometry, ReflectionTrace,
    ThermometryParams,
};
use flumech::ceqa::{default_grid, device1_absorption_model, device2_tls_model, fit_g, aggregate, FitParams, FitSetup, LineModel};
use flumech::device_model::{build_hamiltonian, diagonalize, lindblad_transmission, transmon_frequency, TransitionLabel};
use flumech::kerr_backaction::{backaction_point, instability_boundary, min_threshold_photons, steady_state_at, KerrModeConfig};
use flumech::polariton_tls::{fig6b_transitions, lobes, map_point, MapPoint, TransitionTls};
use flumech::semiclassical3::{region_label, ScanOptions, ThreeModeParams};
use flumech::timedomain::{classify_envelope, comb_detect, integrate, psd, seeded, CombOptions, IntegrationConfig, Model, PsdOptions};
use flumech::units::{hz, to_hz};
use flumech::{Complex64, DeviceParams, FluxPoint, PolaritonSpectrum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::json;

use crate::config::{lindblad_config, Command, DriveAxis, LindbladBlock, LineModelKind, RunConfig, TimedomainBlock};
use crate::error::CliError;
use crate::output::{num, nums, Row, TableSpec};
use crate::sweep::{Job, PointRows};

pub fn build(cfg: &RunConfig, cmd: Command) -> Result<Box<dyn Job>, CliError> {
    let dev = cfg.device_params()?;
    let grid = &cfg.grid;
    Ok(match cmd {
        Command::Spectrum => {
            let s = cfg.spectrum.clone().unwrap_or_default();
            let lindblad = s.lindblad.map(|l| (l, grid.freq_hz.as_ref().map(|r| r.values()).unwrap_or_default()));
            Box::new(Spectrum { dev, b_par: s.b_par, phis: grid.require("flux")?.values(), lindblad })
        }
        Command::Backaction | Command::InstabilityMap | Command::Timedomain => {
            let kerr = cfg.kerr.clone().unwrap_or_default().to_core();
            let drive = cfg.drive_axis()?;
            let det = grid.require("detuning_hz")?;
            let atten = dev.atten_product;
            match cmd {
                Command::Backaction => Box::new(Backaction { cfg: kerr, drive, detunings: det.values(), atten }),
                Command::InstabilityMap => Box::new(Instability { cfg: kerr, drive, lo: hz(det.start), hi: hz(det.stop), n_scan: det.n, atten }),
                _ => Box::new(TimeDomain { cfg: kerr, drive, detunings: det.values(), atten, td: cfg.timedomain.clone().unwrap_or_default() }),
            }
        }
        Command::Ceqa => {
            let c = cfg.ceqa.clone().unwrap_or_default();
            let model = line_model(c.model);
            let delta = match &grid.freq_hz {
                Some(r) => r.values().into_iter().map(hz).collect(),
                None => default_grid(0.0, model.gamma_m()),
            };
            let clean = model.magnitude(&truth(&model), &delta).map_err(|e| CliError::config("ceqa", e.to_string()))?;
            Box::new(Ceqa { model, delta, clean, trials: c.trials, noise: c.noise, seed: cfg.seed, setup: FitSetup { init: None, free_background: c.free_background } })
        }
        Command::Fit => {
            let f = cfg.fit.as_ref().ok_or_else(|| CliError::config("fit", "missing [fit] block"))?;
            let cols = read_columns(&f.trace, "fit.trace")?;
            let delta = column(&cols, "delta_hz", "fit.trace")?.into_iter().map(hz).collect();
            let mag = column(&cols, "mag", "fit.trace")?;
            Box::new(Fit { model: line_model(f.model), delta, mag, setup: FitSetup { init: None, free_background: f.free_background } })
        }
        Command::FixedPoints => {
            let (params, opts) = cfg.three_mode.clone().unwrap_or_default().to_core();
            Box::new(FixedPoints { params, opts, powers: grid.require("power_dbm")?.values(), freqs: grid.require("freq_hz")?.values(), atten: dev.atten_product })
        }
        Command::PolaritonMap => {
            let (rates, weights) = cfg.polariton.clone().unwrap_or_default().to_core();
            let transitions = fig6b_transitions(&rates, &weights).map_err(|e| CliError::config("polariton", e.to_string()))?;
            Box::new(Polariton { transitions, powers: grid.require("power_dbm")?.values(), freqs: grid.require("freq_hz")?.values(), atten: dev.atten_product })
        }
        Command::Calibrate => Box::new(Calibrate::new(cfg, dev)?),
    })
}

fn line_model(kind: LineModelKind) -> LineModel {
    match kind {
        LineModelKind::WeakKerr => device1_absorption_model(),
        LineModelKind::Tls => device2_tls_model(),
    }
}

fn truth(model: &LineModel) -> FitParams {
    FitParams { g: model.coupling(), gamma_m: model.gamma_m(), omega_offset: 0.0, amplitude: 1.0, background: 0.0 }
}

fn finite(xs: &[f64]) -> Result<(), String> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err("non-finite result".into())
    }
}

/// Named numeric columns of a small CSV; `#` lines are comments and the
/// first remaining line holds the names.
pub fn read_columns(path: &Path, field: &str) -> Result<Vec<(String, Vec<f64>)>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config(field, format!("{}: {e}", path.display())))?;
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| CliError::config(field, "empty trace"))?;
    let mut cols: Vec<(String, Vec<f64>)> = header.split(',').map(|h| (h.trim().to_string(), Vec::new())).collect();
    for (k, l) in lines.enumerate() {
        let cells: Vec<&str> = l.split(',').collect();
        if cells.len() != cols.len() {
            return Err(CliError::config(field, format!("data row {} has {} cells, expected {}", k + 1, cells.len(), cols.len())));
        }
        for (c, s) in cols.iter_mut().zip(cells) {
            let v = s.trim().parse().map_err(|_| CliError::config(field, format!("data row {}: `{s}` is not a number", k + 1)))?;
            c.1.push(v);
        }
    }
    Ok(cols)
}

fn column(cols: &[(String, Vec<f64>)], name: &str, field: &str) -> Result<Vec<f64>, CliError> {
    cols.iter()
        .find(|(n, _)| n == name)
        .map(|(_, v)| v.clone())
        .ok_or_else(|| CliError::config(field, format!("missing column `{name}`")))
}

struct Spectrum {
    dev: DeviceParams,
    b_par: f64,
    phis: Vec<f64>,
    lindblad: Option<(LindbladBlock, Vec<f64>)>,
}

impl Job for Spectrum {
    fn tables(&self) -> Vec<TableSpec> {
        let mut cols = vec!["flux", "omega_q_hz"];
        cols.extend(TransitionLabel::PRIMARY.iter().map(|l| match l {
            TransitionLabel::Minus => "minus_hz",
            TransitionLabel::Plus => "plus_hz",
            TransitionLabel::MinusAlpha => "minus_alpha_hz",
            TransitionLabel::MinusBeta => "minus_beta_hz",
            TransitionLabel::PlusGamma => "plus_gamma_hz",
            _ => "gamma_half_hz",
        }));
        cols.push("splitting_hz");
        let mut t = vec![TableSpec::new("transitions", &cols)];
        if self.lindblad.is_some() {
            t.push(TableSpec::new("s21", &["flux", "freq_hz", "s21"]).with_plot("flux", "freq_hz", "s21"));
        }
        t
    }

    fn n_points(&self) -> usize {
        self.phis.len()
    }

    fn point(&self, i: usize) -> Result<PointRows, String> {
        let phi = self.phis[i];
        let flux = FluxPoint::new(phi, self.b_par);
        let eig = diagonalize(&build_hamiltonian(&self.dev, &flux)).map_err(|e| e.to_string())?;
        let spec = PolaritonSpectrum::from_energies(eig.energies);
        let mut row = vec![phi, to_hz(transmon_frequency(&self.dev, phi))];
        row.extend(spec.transitions.iter().map(|(_, w)| to_hz(*w)));
        row.push(to_hz(spec.frequency(TransitionLabel::Plus) - spec.frequency(TransitionLabel::Minus)));
        finite(&row)?;
        let mut out = vec![vec![nums(&row)]];
        if let Some((l, freqs)) = &self.lindblad {
            let grid: Vec<f64> = freqs.iter().map(|&f| hz(f)).collect();
            let s = lindblad_transmission(&self.dev, &flux, &lindblad_config(l, 0.0), &grid).map_err(|e| e.to_string())?;
            finite(&s)?;
            out.push(freqs.iter().zip(&s).map(|(&f, &v)| nums(&[phi, f, v])).collect());
        }
        Ok(out)
    }

    fn describe(&self, i: usize) -> String {
        format!("flux={}", num(self.phis[i]))
    }

    fn summary(&self, results: &[Result<PointRows, String>]) -> serde_json::Value {
        let best = results
            .iter()
            .filter_map(|r| r.as_ref().ok())
            .map(|r| {
                let row = &r[0][0];
                (row[0].parse::<f64>().unwrap_or(f64::NAN), row[row.len() - 1].parse::<f64>().unwrap_or(f64::NAN))
            })
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match best {
            Some((flux, s)) => json!({ "min_splitting_hz": s, "min_splitting_flux": flux }),
            None => serde_json::Value::Null,
        }
    }
}

struct Backaction {
    cfg: KerrModeConfig,
    drive: DriveAxis,
    detunings: Vec<f64>,
    atten: f64,
}

impl Job for Backaction {
    fn tables(&self) -> Vec<TableSpec> {
        let y = if matches!(self.drive, DriveAxis::Power(_)) { "power_dbm" } else { "epsilon_hz" };
        vec![TableSpec::new(
            "backaction",
            &["epsilon_hz", "power_dbm", "detuning_hz", "photons", "gamma_eff_hz", "delta_omega_hz", "n_branches", "stable"],
        )
        .with_plot("detuning_hz", y, "gamma_eff_hz")]
    }

    fn n_points(&self) -> usize {
        self.drive.len() * self.detunings.len()
    }

    fn point(&self, i: usize) -> Result<PointRows, String> {
        let (a, b) = (i / self.detunings.len(), i % self.detunings.len());
        let d = hz(self.detunings[b]);
        let (eps, p) = self.drive.at(a, self.cfg.omega_plus + d, self.atten);
        let bp = backaction_point(&self.cfg, d, eps);
        let vals = [to_hz(eps), p, self.detunings[b], bp.photons, to_hz(bp.gamma_eff), to_hz(bp.delta_omega)];
        finite(&vals)?;
        let mut row = nums(&vals);
        row.push(bp.n_branches.to_string());
        row.push(bp.stable.to_string());
        Ok(vec![vec![row]])
    }

    fn describe(&self, i: usize) -> String {
        format!("drive_index={} detuning_hz={}", i / self.detunings.len(), num(self.detunings[i % self.detunings.len()]))
    }
}

struct Instability {
    cfg: KerrModeConfig,
    drive: DriveAxis,
    lo: f64,
    hi: f64,
    n_scan: usize,
    atten: f64,
}

impl Job for Instability {
    fn tables(&self) -> Vec<TableSpec> {
        vec![TableSpec::new("boundary", &["epsilon_hz", "power_dbm", "detuning_hz", "photons"])]
    }

    fn n_points(&self) -> usize {
        self.drive.len()
    }

    fn point(&self, i: usize) -> Result<PointRows, String> {
        let (eps, p) = self.drive.at(i, self.cfg.omega_plus, self.atten);
        let row = &instability_boundary(&self.cfg, &[eps], self.lo, self.hi, self.n_scan)[0];
        let mut rows = Vec::new();
        for &d in &row.detunings {
            let n = steady_state_at(&self.cfg, d, eps)[0].photons();
            let vals = [to_hz(eps), p, to_hz(d), n];
            finite(&vals)?;
            rows.push(nums(&vals));
        }
        Ok(vec![rows])
    }

    fn describe(&self, i: usize) -> String {
        format!("drive_index={i}")
    }

    fn summary(&self, _results: &[Result<PointRows, String>]) -> serde_json::Value {
        let eps_max = (0..self.drive.len()).map(|i| self.drive.at(i, self.cfg.omega_plus, self.atten).0).fold(0.0, f64::max);
        match min_threshold_photons(&self.cfg, self.lo, self.hi, self.n_scan, eps_max) {
            Some(t) => json!({ "min_threshold_photons": t.photons, "at_detuning_hz": to_hz(t.detuning), "at_epsilon_hz": to_hz(t.epsilon) }),
            None => json!({ "min_threshold_photons": null }),
        }
    }
}

struct TimeDomain {
    cfg: KerrModeConfig,
    drive: DriveAxis,
    detunings: Vec<f64>,
    atten: f64,
    td: TimedomainBlock,
}

impl Job for TimeDomain {
    fn tables(&self) -> Vec<TableSpec> {
        let y = if matches!(self.drive, DriveAxis::Power(_)) { "power_dbm" } else { "epsilon_hz" };
        vec![TableSpec::new(
            "timedomain",
            &["epsilon_hz", "power_dbm", "detuning_hz", "comb", "comb_spacing_hz", "n_teeth", "sideband_ratio", "outcome", "kerr_unstable"],
        )
        .with_plot("detuning_hz", y, "comb")]
    }

    fn n_points(&self) -> usize {
        self.drive.len() * self.detunings.len()
    }

    fn point(&self, i: usize) -> Result<PointRows, String> {
        let (a, b) = (i / self.detunings.len(), i % self.detunings.len());
        let d = hz(self.detunings[b]);
        let (eps, p) = self.drive.at(a, self.cfg.omega_plus + d, self.atten);
        let m = Model::kerr(&self.cfg, d, eps);
        let fps = m.fixed_points().map_err(|e| e.to_string())?;
        let y0 = seeded(&m, &fps[0], self.td.seed_phonons);
        let ic = IntegrationConfig {
            t_end: self.td.t_end,
            record_from: self.td.t_end - self.td.record,
            sample_rate: self.td.samples_per_period * to_hz(self.cfg.omega_m),
            rtol: self.td.rtol,
            atol: self.td.atol,
            ..Default::default()
        };
        let ts = integrate(&m, &y0, &ic).map_err(|e| e.to_string())?;
        let opts = PsdOptions { resolution: self.td.resolution_hz, discard_fraction: 0.0, ..Default::default() };
        let spectrum = psd(&ts.output_field(&m), ts.sample_rate(), &opts).map_err(|e| e.to_string())?;
        let comb = comb_detect(&spectrum, self.cfg.omega_m, &CombOptions::default());
        let outcome = classify_envelope(&m, &ts, 20, 0.05);
        let kerr_unstable = backaction_point(&self.cfg, d, eps).gamma_eff < 0.0;
        let mut row = nums(&[to_hz(eps), p, self.detunings[b]]);
        row.push(comb.detected.to_string());
        row.push(comb.spacing.map(num).unwrap_or_else(|| "NaN".into()));
        row.push(comb.teeth.len().to_string());
        row.push(num(comb.sideband_ratio));
        row.push(serde_json::to_value(outcome).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default());
        row.push(kerr_unstable.to_string());
        Ok(vec![vec![row]])
    }

    fn describe(&self, i: usize) -> String {
        format!("drive_index={} detuning_hz={}", i / self.detunings.len(), num(self.detunings[i % self.detunings.len()]))
    }
}

struct Ceqa {
    model: LineModel,
    delta: Vec<f64>,
    clean: Vec<f64>,
    trials: usize,
    noise: f64,
    seed: u64,
    setup: FitSetup,
}

const FIT_COLUMNS: [&str; 10] =
    ["g_hz", "sigma_g_hz", "gamma_m_hz", "sigma_gamma_m_hz", "offset_hz", "sigma_offset_hz", "amplitude", "background", "residual_norm", "iterations"];

fn fit_row(r: &flumech::ceqa::FitReport) -> Row {
    let (p, s) = (&r.params, &r.sigma);
    let mut row = nums(&[to_hz(p.g), to_hz(s.g), to_hz(p.gamma_m), to_hz(s.gamma_m), to_hz(p.omega_offset), to_hz(s.omega_offset), p.amplitude, p.background, r.residual_norm]);
    row.push(r.iterations.to_string());
    row
}

impl Job for Ceqa {
    fn tables(&self) -> Vec<TableSpec> {
        let mut cols = vec!["trial"];
        cols.extend(FIT_COLUMNS);
        vec![TableSpec::new("fits", &cols)]
    }

    fn n_points(&self) -> usize {
        self.trials
    }

    /// Trial `i` draws from its own stream, so results do not depend on
    /// which worker runs it.
    fn point(&self, i: usize) -> Result<PointRows, String> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(i as u64);
        let n = Normal::new(0.0, self.noise).map_err(|e| e.to_string())?;
        let mag: Vec<f64> = self.clean.iter().map(|v| v * (1.0 + n.sample(&mut rng))).collect();
        let rep = fit_g(&self.model, &self.delta, &mag, &self.setup).map_err(|e| e.to_string())?;
        let mut row = vec![i.to_string()];
        row.extend(fit_row(&rep));
        Ok(vec![vec![row]])
    }

    fn describe(&self, i: usize) -> String {
        format!("trial={i}")
    }

    fn finalize(&self, _results: &[Result<PointRows, String>]) -> Vec<(TableSpec, Vec<Row>)> {
        let resp = self.model.normalized(&self.delta).unwrap_or_default();
        let rows = self
            .delta
            .iter()
            .zip(&resp)
            .zip(&self.clean)
            .map(|((&d, z), &m): ((&f64, &Complex64), &f64)| nums(&[to_hz(d), m, z.re, z.im]))
            .collect();
        vec![(TableSpec::new("response", &["delta_hz", "mag", "re", "im"]), rows)]
    }

    fn summary(&self, results: &[Result<PointRows, String>]) -> serde_json::Value {
        let est: Vec<(f64, f64)> = results
            .iter()
            .filter_map(|r| r.as_ref().ok())
            .filter_map(|r| Some((r[0][0][1].parse().ok()?, r[0][0][2].parse().ok()?)))
            .collect();
        if est.is_empty() {
            return serde_json::Value::Null;
        }
        let (mean, spread) = aggregate(&est);
        let sigma = est.iter().map(|e| e.1).sum::<f64>() / est.len() as f64;
        let g = to_hz(self.model.coupling());
        json!({ "g_true_hz": g, "g_mean_hz": mean, "g_spread_hz": spread, "mean_reported_sigma_hz": sigma, "bias": mean / g - 1.0, "fits": est.len() })
    }
}

struct Fit {
    model: LineModel,
    delta: Vec<f64>,
    mag: Vec<f64>,
    setup: FitSetup,
}

impl Job for Fit {
    fn tables(&self) -> Vec<TableSpec> {
        vec![TableSpec::new("fit", &FIT_COLUMNS), TableSpec::new("residuals", &["delta_hz", "data", "model"])]
    }

    fn n_points(&self) -> usize {
        1
    }

    fn point(&self, _i: usize) -> Result<PointRows, String> {
        let rep = fit_g(&self.model, &self.delta, &self.mag, &self.setup).map_err(|e| e.to_string())?;
        let fitted = self.model.magnitude(&rep.params, &self.delta).map_err(|e| e.to_string())?;
        let res = self.delta.iter().zip(&self.mag).zip(&fitted).map(|((&d, &y), &m)| nums(&[to_hz(d), y, m])).collect();
        Ok(vec![vec![fit_row(&rep)], res])
    }

    fn describe(&self, _i: usize) -> String {
        "trace".into()
    }
}

struct FixedPoints {
    params: ThreeModeParams,
    opts: ScanOptions,
    powers: Vec<f64>,
    freqs: Vec<f64>,
    atten: f64,
}

impl Job for FixedPoints {
    fn tables(&self) -> Vec<TableSpec> {
        vec![TableSpec::new("regions", &["power_dbm", "freq_hz", "n_fixed_points", "n_stable", "mech_unstable"]).with_plot("freq_hz", "power_dbm", "n_stable")]
    }

    fn n_points(&self) -> usize {
        self.powers.len() * self.freqs.len()
    }

    fn point(&self, i: usize) -> Result<PointRows, String> {
        let (p, f) = (self.powers[i / self.freqs.len()], self.freqs[i % self.freqs.len()]);
        let l = region_label(&self.params, hz(f), p, self.atten, &self.opts);
        if let Some(h) = l.hole {
            return Err(h);
        }
        let mut row = nums(&[p, f]);
        row.extend([l.n_fixed_points.to_string(), l.n_stable.to_string(), l.mech_unstable_any.to_string()]);
        Ok(vec![vec![row]])
    }

    fn describe(&self, i: usize) -> String {
        format!("power_dbm={} freq_hz={}", num(self.powers[i / self.freqs.len()]), num(self.freqs[i % self.freqs.len()]))
    }
}

struct Polariton {
    transitions: Vec<TransitionTls>,
    powers: Vec<f64>,
    freqs: Vec<f64>,
    atten: f64,
}

impl Job for Polariton {
    fn tables(&self) -> Vec<TableSpec> {
        vec![TableSpec::new("map", &["power_dbm", "freq_hz", "unstable", "which"]).with_plot("freq_hz", "power_dbm", "which")]
    }

    fn n_points(&self) -> usize {
        self.powers.len() * self.freqs.len()
    }

    fn point(&self, i: usize) -> Result<PointRows, String> {
        let (p, f) = (self.powers[i / self.freqs.len()], self.freqs[i % self.freqs.len()]);
        let mp = map_point(&self.transitions, hz(f), p, self.atten);
        if let Some(h) = mp.hole {
            return Err(h);
        }
        let mut row = nums(&[p, f]);
        row.extend([mp.unstable.to_string(), mp.which.to_string()]);
        Ok(vec![vec![row]])
    }

    fn describe(&self, i: usize) -> String {
        format!("power_dbm={} freq_hz={}", num(self.powers[i / self.freqs.len()]), num(self.freqs[i % self.freqs.len()]))
    }

    /// Holes count as stable when grouping lobes.
    fn finalize(&self, results: &[Result<PointRows, String>]) -> Vec<(TableSpec, Vec<Row>)> {
        let map: Vec<MapPoint> = results
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let (p, f) = (self.powers[i / self.freqs.len()], self.freqs[i % self.freqs.len()]);
                let which = r.as_ref().ok().and_then(|r| r[0][0][3].parse().ok()).unwrap_or(0u32);
                MapPoint { power_dbm: p, omega_d: hz(f), unstable: which != 0, which, hole: r.as_ref().err().cloned() }
            })
            .collect();
        let rows = lobes(&map, self.freqs.len())
            .iter()
            .map(|l| {
                let mut row = vec![l.which.to_string()];
                row.extend(nums(&[l.onset_dbm, to_hz(l.omega_min), to_hz(l.omega_max)]));
                row.push(l.n_points.to_string());
                row
            })
            .collect();
        vec![(TableSpec::new("lobes", &["which", "onset_dbm", "freq_min_hz", "freq_max_hz", "n_points"]), rows)]
    }
}

/// Each calibration present in the config is one point.
struct Calibrate {
    dev: DeviceParams,
    block: crate::config::CalibrateBlock,
    sections: Vec<&'static str>,
    reflection: Option<(Vec<f64>, ReflectionTrace)>,
}

impl Calibrate {
    fn new(cfg: &RunConfig, dev: DeviceParams) -> Result<Self, CliError> {
        let block = cfg.calibrate.clone().ok_or_else(|| CliError::config("calibrate", "missing [calibrate] block"))?;
        let mut sections = Vec::new();
        if block.stark.is_some() {
            sections.push("stark");
        }
        if block.gain.is_some() {
            sections.push("gain");
        }
        if block.thermometry.is_some() {
            sections.push("thermometry");
        }
        let mut reflection = None;
        if let Some(r) = &block.reflection {
            let field = "calibrate.reflection.trace";
            let cols = read_columns(&r.trace, field)?;
            let omega = column(&cols, "freq_hz", field)?.into_iter().map(hz).collect();
            let trace = match (column(&cols, "re", field), column(&cols, "im", field)) {
                (Ok(re), Ok(im)) => ReflectionTrace::Complex(re.into_iter().zip(im).map(|(a, b)| Complex64::new(a, b)).collect()),
                _ => ReflectionTrace::Magnitude { mag: column(&cols, "mag", field)?, overcoupled: r.overcoupled },
            };
            reflection = Some((omega, trace));
            sections.push("reflection");
        }
        Ok(Self { dev, block, sections, reflection })
    }

    fn kappa_e(&self) -> f64 {
        self.dev.kappa_e.unwrap_or(self.dev.kappa_b)
    }

    fn section(&self, name: &str) -> flumech::Result<Vec<(&'static str, f64, f64, &'static str)>> {
        let b = &self.block;
        Ok(match name {
            "stark" => {
                let s = b.stark.as_ref().expect("present");
                let chi = dispersive_shift_checked(self.dev.j, hz(s.qubit_detuning_hz), self.dev.alpha_t, self.dev.kappa_b)?;
                let shifts: Vec<f64> = s.shift_hz.iter().map(|&x| hz(x)).collect();
                let a = fit_atten_product(&s.p_dbm, &shifts, chi, self.dev.omega_c, self.dev.kappa_b)?;
                vec![("chi", to_hz(chi), f64::NAN, "Hz"), ("atten_product", a, f64::NAN, "")]
            }
            "gain" => {
                let g = b.gain.as_ref().expect("present");
                vec![("gain_db", output_gain(&g.p_w, &g.n_d, self.kappa_e(), self.dev.omega_c)?, f64::NAN, "dB")]
            }
            "thermometry" => {
                let t = b.thermometry.as_ref().expect("present");
                let gain_db = match &b.gain {
                    Some(g) => output_gain(&g.p_w, &g.n_d, self.kappa_e(), self.dev.omega_c)?,
                    None => self.dev.gain_db,
                };
                let params = ThermometryParams {
                    g_plus: hz(t.g_hz),
                    kappa: hz(t.kappa_hz),
                    kappa_e: self.kappa_e(),
                    gamma_m: self.dev.gamma_m,
                    omega_m: self.dev.omega_m,
                    gain_db,
                    n_add: t.n_add,
                };
                let r = sideband_thermometry(&t.svv, &t.n_d, &params)?;
                vec![("n_m", r.n_m, f64::NAN, "quanta"), ("t_mode", r.t_mode, f64::NAN, "K"), ("slope", r.slope, f64::NAN, ""), ("intercept", r.intercept, f64::NAN, "")]
            }
            _ => {
                let (omega, trace) = self.reflection.as_ref().expect("present");
                let r = reflection_fit(omega, trace)?;
                vec![
                    ("kappa_e", to_hz(r.params.kappa_e), to_hz(r.sigma[0]), "Hz"),
                    ("kappa_loss", to_hz(r.params.kappa_loss), to_hz(r.sigma[1]), "Hz"),
                    ("omega_c", to_hz(r.params.omega_c), to_hz(r.sigma[2]), "Hz"),
                ]
            }
        })
    }
}

impl Job for Calibrate {
    fn tables(&self) -> Vec<TableSpec> {
        vec![TableSpec::new("calibration", &["section", "quantity", "value", "sigma", "unit"])]
    }

    fn n_points(&self) -> usize {
        self.sections.len()
    }

    fn point(&self, i: usize) -> Result<PointRows, String> {
        let name = self.sections[i];
        let rows = self.section(name).map_err(|e| e.to_string())?;
        Ok(vec![rows
            .into_iter()
            .map(|(q, v, s, u)| vec![name.to_string(), q.to_string(), num(v), num(s), u.to_string()])
            .collect()])
    }

    fn describe(&self, i: usize) -> String {
        self.sections[i].to_string()
    }
}
