use super::*;
use crate::units::{hz, khz, mhz};
use nalgebra::{Matrix5, Vector5};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn weak_parts(model: &LineModel) -> (KerrModeConfig, PumpProbeConfig) {
    match model {
        LineModel::WeakKerr { cfg, pp } => (cfg.clone(), *pp),
        _ => unreachable!(),
    }
}

fn tls_parts(model: &LineModel) -> (TlsConfig, PumpProbeConfig) {
    match model {
        LineModel::Tls { tls, pp, .. } => (tls.clone(), *pp),
        _ => unreachable!(),
    }
}

fn truth(model: &LineModel) -> FitParams {
    FitParams { g: model.coupling(), gamma_m: model.gamma_m(), omega_offset: 0.0, amplitude: 1.0, background: 0.0 }
}

fn noisy(model: &LineModel, grid: &[f64], level: f64, seed: u64) -> Vec<f64> {
    let clean = model.magnitude(&truth(model), grid).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, level).unwrap();
    clean.iter().map(|v| v * (1.0 + n.sample(&mut rng))).collect()
}

fn dip_min(grid: &[f64], mag: &[f64]) -> f64 {
    let i = mag.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    grid[i]
}

/// Linear OMIT: ε_p/(κ/2 − iδ + G²/(γ_m/2 − iδ)).
fn textbook_omit(kappa: f64, gamma_m: f64, big_g: f64, delta: f64) -> Complex64 {
    1.0 / (Complex64::new(kappa / 2.0, -delta) + big_g * big_g / Complex64::new(gamma_m / 2.0, -delta))
}

/// First-order probe response of the driven two-level system from the
/// five coupled amplitude equations, solved directly.
fn tls_direct(tls: &TlsConfig, pp: &PumpProbeConfig, delta: f64) -> Complex64 {
    let ss = tls_steady_state(tls, pp, true);
    let dp = pp.probe_offset(delta);
    let (gq, ed, ep, g, wm, gm) = (tls.gamma_q, pp.epsilon_d, pp.epsilon_p, tls.g_0, tls.omega_m, tls.gamma_m);
    let dt = ss.delta_eff;
    let z = Complex64::new(0.0, 0.0);
    // Unknowns (X, P, σ⁺, σ⁻, σᶻ) at e^{−iδ_p t}.
    let m = Matrix5::new(
        I * dp, -I * wm, z, z, z,
        I * wm, Complex64::new(gm, -dp), z, z, I * g,
        I * g * ss.sigma_plus, z, Complex64::new(-gq / 2.0, dp - dt), z, -I * ed,
        -I * g * ss.sigma_minus, z, z, Complex64::new(-gq / 2.0, dp + dt), I * ed,
        z, z, -2.0 * I * ed, 2.0 * I * ed, Complex64::new(-gq, dp),
    );
    let rhs = Vector5::new(z, z, z, -I * ep * ss.sigma_z, 2.0 * I * ep * ss.sigma_plus);
    m.lu().solve(&rhs).unwrap()[3]
}

#[test]
fn weak_no_coupling_has_no_feature() {
    let (cfg, pp) = weak_parts(&device1_absorption_model());
    let cfg = KerrModeConfig { g_plus: 0.0, ..cfg };
    let grid = default_grid(0.0, cfg.gamma_m);
    let r = weak_kerr_response(&cfg, &pp, &grid);
    let mag: Vec<f64> = r.response.iter().map(|z| z.norm()).collect();
    // Straight line between the ends to within curvature of a κ-wide Lorentzian.
    let (a, b) = (mag[0], mag[500]);
    let dev = (0..501).map(|i| (mag[i] - (a + (b - a) * i as f64 / 500.0)).abs() / a).fold(0.0, f64::max);
    assert!(dev < 1e-6, "{dev}");
}

#[test]
fn weak_vanishing_pump_is_bare_lorentzian() {
    let (cfg, _) = weak_parts(&device1_absorption_model());
    let pp = PumpProbeConfig { epsilon_d: 0.0, epsilon_p: 1.0, detuning: -cfg.omega_m, max_probe_ratio: f64::INFINITY };
    for d in [mhz(-3.0), 0.0, mhz(5.0)] {
        let a = weak_kerr_response(&cfg, &pp, &[d]).response[0];
        let want = -I / Complex64::new(cfg.kappa / 2.0, -d);
        assert!((a - want).norm() < 1e-12 * want.norm());
    }
}

#[test]
fn resolved_sideband_width_matches_cooperativity() {
    let base = weak_parts(&device1_absorption_model()).0;
    let cfg = KerrModeConfig { kerr_plus: 0.0, kappa: base.omega_m / 40.0, g_plus: khz(20.0), ..base };
    let pp = PumpProbeConfig::red_sideband(&cfg, pump_for_photons(&cfg, -cfg.omega_m, 0.02));
    let n = weak_kerr_photons(&cfg, &pp);
    let coop = 4.0 * cfg.g_plus.powi(2) * n / (cfg.kappa * cfg.gamma_m);
    let bare = KerrModeConfig { g_plus: 0.0, ..cfg.clone() };
    // Normalized dip 1 − |A|²/|A_bare|².
    let depth = |d: f64| {
        let a = weak_kerr_point(&cfg, &pp, n, d).norm_sqr();
        let b = weak_kerr_point(&bare, &pp, n, d).norm_sqr();
        1.0 - a / b
    };
    let centre = {
        let g = default_grid(0.0, cfg.gamma_m * (1.0 + coop));
        *g.iter().max_by(|a, b| depth(**a).total_cmp(&depth(**b))).unwrap()
    };
    let half = 0.5 * depth(centre);
    let hi = crate::roots::bisect(|d| depth(d) - half, centre, centre + 40.0 * cfg.gamma_m * (1.0 + coop), 1e-6).unwrap();
    let lo = crate::roots::bisect(|d| depth(d) - half, centre - 40.0 * cfg.gamma_m * (1.0 + coop), centre, 1e-6).unwrap();
    let want = cfg.gamma_m * (1.0 + coop);
    assert!(((hi - lo) - want).abs() < 0.01 * want, "{} vs {}", hi - lo, want);

    // Shape against the textbook form, each normalized to its window edge.
    let big_g = cfg.g_plus * n.sqrt();
    let grid = default_grid(0.0, cfg.gamma_m);
    let ours: Vec<f64> = grid.iter().map(|&d| weak_kerr_point(&cfg, &pp, n, d).norm()).collect();
    let text: Vec<f64> = grid.iter().map(|&d| textbook_omit(cfg.kappa, cfg.gamma_m, big_g, d).norm()).collect();
    for (a, b) in ours.iter().zip(&text) {
        assert!((a / ours[0] - b / text[0]).abs() < 0.01, "{} {}", a / ours[0], b / text[0]);
    }
}

#[test]
fn sideband_form_agrees_near_feature() {
    let (cfg, pp) = weak_parts(&device1_absorption_model());
    let n = weak_kerr_photons(&cfg, &pp);
    for d in default_grid(0.0, cfg.gamma_m) {
        let a = weak_kerr_point(&cfg, &pp, n, d);
        let b = weak_kerr_sideband_form(&cfg, pp.epsilon_p, n, d);
        assert!((a.norm() - b.norm()).abs() < 1e-4 * a.norm());
    }
}

#[test]
fn probe_linearity() {
    let (cfg, pp) = weak_parts(&device1_absorption_model());
    let grid = default_grid(0.0, cfg.gamma_m);
    let pp2 = PumpProbeConfig { epsilon_p: 2.0 * pp.epsilon_p, max_probe_ratio: 1.0, ..pp };
    let a = weak_kerr_response(&cfg, &pp, &grid).response;
    let b = weak_kerr_response(&cfg, &pp2, &grid).response;
    for (x, y) in a.iter().zip(&b) {
        assert!((2.0 * x - y).norm() <= 1e-10 * y.norm());
    }
    let (tls, pp) = tls_parts(&device2_tls_model());
    let pp2 = PumpProbeConfig { epsilon_p: 2.0 * pp.epsilon_p, max_probe_ratio: 1.0, ..pp };
    let one = Complex64::new(1.0, 0.0);
    for opts in [TlsOptions::default(), TlsOptions::exact()] {
        let a = tls_response(&tls, &pp, &opts, one, &grid).unwrap().response;
        let b = tls_response(&tls, &pp2, &opts, one, &grid).unwrap().response;
        for (x, y) in a.iter().zip(&b) {
            assert!((2.0 * x - y).norm() <= 1e-10 * y.norm());
        }
    }
}

#[test]
fn probe_ratio_warning() {
    let (cfg, pp) = weak_parts(&device1_absorption_model());
    assert!(!weak_kerr_response(&cfg, &pp, &[0.0]).probe_ratio_warning);
    let loud = PumpProbeConfig { epsilon_p: pp.epsilon_d, ..pp };
    assert!(weak_kerr_response(&cfg, &loud, &[0.0]).probe_ratio_warning);
}

#[test]
fn feature_sits_at_zero_offset() {
    for model in [device1_absorption_model(), device2_tls_model()] {
        let grid = default_grid(0.0, model.gamma_m());
        let mag = model.magnitude(&truth(&model), &grid).unwrap();
        let at = dip_min(&grid, &mag);
        assert!(at.abs() <= model.gamma_m(), "{model:?}: {at}");
        assert!(mag.iter().cloned().fold(f64::INFINITY, f64::min) < 0.9 * mag[0]);
    }
}

#[test]
fn tls_no_coupling_has_no_feature() {
    let (tls, pp) = tls_parts(&device2_tls_model());
    let tls = TlsConfig { g_0: 0.0, ..tls };
    let grid = default_grid(0.0, tls.gamma_m);
    let r = tls_response(&tls, &pp, &TlsOptions::default(), Complex64::new(1.0, 0.0), &grid).unwrap();
    let mag: Vec<f64> = r.response.iter().map(|z| z.norm()).collect();
    let (a, b) = (mag[0], mag[500]);
    let dev = (0..501).map(|i| (mag[i] - (a + (b - a) * i as f64 / 500.0)).abs() / a).fold(0.0, f64::max);
    assert!(dev < 1e-6, "{dev}");
}

#[test]
fn tls_population_ground_limit() {
    let (tls, pp) = tls_parts(&device2_tls_model());
    let sz: Vec<f64> = [mhz(2.0), mhz(0.5), khz(10.0), 1.0, 0.0]
        .iter()
        .map(|&ed| tls_steady_state(&tls, &PumpProbeConfig { epsilon_d: ed, ..pp }, true).sigma_z)
        .collect();
    assert!(sz.windows(2).all(|w| w[1] < w[0]), "{sz:?}");
    assert!((sz[3] + 1.0).abs() < 1e-12);
    assert_eq!(sz[4], -1.0);
}

#[test]
fn tls_vanishing_pump_is_bare_susceptibility() {
    let (tls, pp) = tls_parts(&device2_tls_model());
    let pp = PumpProbeConfig { epsilon_d: 0.0, epsilon_p: 1.0, max_probe_ratio: f64::INFINITY, ..pp };
    let ss = tls_steady_state(&tls, &pp, false);
    for d in [mhz(-3.0), 0.0, mhz(5.0)] {
        let z = tls_point(&tls, &pp, &ss, &TlsOptions::default(), d).unwrap();
        let want = -I / Complex64::new(tls.gamma_q / 2.0, -(pp.detuning + pp.probe_offset(d)));
        assert!((z - want).norm() < 1e-12 * want.norm());
    }
}

#[test]
fn tls_exact_options_match_direct_solve() {
    let (tls, pp) = tls_parts(&device2_tls_model());
    let ss = tls_steady_state(&tls, &pp, true);
    for d in default_grid(0.0, tls.gamma_m).into_iter().step_by(10).chain([mhz(-2.0), mhz(4.0)]) {
        let ours = tls_point(&tls, &pp, &ss, &TlsOptions::exact(), d).unwrap();
        let want = tls_direct(&tls, &pp, d);
        assert!((ours - want).norm() < 1e-9 * want.norm(), "δ {d}: {ours} {want}");
    }
}

#[test]
fn tls_quoted_form_close_to_direct_solve() {
    let (tls, pp) = tls_parts(&device2_tls_model());
    let ss = tls_steady_state(&tls, &pp, false);
    for d in default_grid(0.0, tls.gamma_m).into_iter().step_by(10) {
        let ours = tls_point(&tls, &pp, &ss, &TlsOptions::default(), d).unwrap().norm();
        let want = tls_direct(&tls, &pp, d).norm();
        assert!((ours - want).abs() < 0.05 * want, "δ {d}: {ours} {want}");
    }
}

#[test]
fn tls_self_consistent_shift_is_small_and_converged() {
    let (tls, pp) = tls_parts(&device2_tls_model());
    let s = tls_steady_state(&tls, &pp, true);
    assert!((s.delta_eff - (pp.detuning - tls.g_0 * s.x0)).abs() < 1e-9);
    assert!((s.delta_eff - pp.detuning).abs() < 1e-6 * tls.gamma_q);
    // X₀ = −g(σᶻ₀ + 1)/ω_m
    assert!((s.x0 + tls.g_0 * (s.sigma_z + 1.0) / tls.omega_m).abs() < 1e-15);
}

#[test]
fn pole_guard_reports_regime() {
    let (tls, pp) = tls_parts(&device2_tls_model());
    let ss = tls_steady_state(&tls, &pp, false);
    let err = tls_point(&tls, &pp, &ss, &TlsOptions::default(), f64::NAN).unwrap_err();
    assert!(matches!(err, Error::Pole(_)));
    let bad = TlsConfig { gamma_q: 0.0, ..tls };
    assert!(tls_response(&bad, &pp, &TlsOptions::default(), Complex64::new(1.0, 0.0), &[0.0]).is_err());
}

#[test]
fn dressed_frequency_pushes_away_from_cavity() {
    let w = TlsConfig::dressed_frequency(mhz(6120.0), mhz(6000.0), mhz(193.0));
    let want = mhz(6120.0 + 193.0 * 193.0 / 120.0);
    assert!((w - want).abs() < 1e-12 * want);
}

#[test]
fn pump_for_photons_inverts_cubic() {
    let (cfg, _) = weak_parts(&device1_absorption_model());
    for n in [1e-3, 0.058, 0.3] {
        let pp = PumpProbeConfig::red_sideband(&cfg, pump_for_photons(&cfg, -cfg.omega_m, n));
        assert!((weak_kerr_photons(&cfg, &pp) - n).abs() < 1e-10 * n);
    }
}

#[test]
fn noiseless_fits_are_exact() {
    for model in [device1_absorption_model(), device2_tls_model()] {
        let grid = default_grid(0.0, model.gamma_m());
        let mag = model.magnitude(&truth(&model), &grid).unwrap();
        let rep = fit_g(&model, &grid, &mag, &FitSetup::default()).unwrap();
        let rel = (rep.params.g - model.coupling()).abs() / model.coupling();
        assert!(rel < 1e-6, "{model:?}: {rel}");
    }
}

#[test]
fn absorption_fit_with_noise_brackets_truth() {
    let model = device1_absorption_model();
    let grid = default_grid(0.0, model.gamma_m());
    let mag = noisy(&model, &grid, 0.01, 7);
    let rep = fit_g(&model, &grid, &mag, &FitSetup::default()).unwrap();
    assert!((rep.params.g - khz(40.0)).abs() < khz(5.5), "{}", rep.params.g / khz(1.0));
    assert!(rep.sigma.g > 0.0 && rep.sigma.g < khz(5.5));
}

#[test]
fn tls_fit_recovers_coupling() {
    let model = device2_tls_model();
    let grid = default_grid(0.0, model.gamma_m());
    let mag = noisy(&model, &grid, 0.01, 11);
    let rep = fit_g(&model, &grid, &mag, &FitSetup::default()).unwrap();
    assert!((rep.params.g / model.coupling() - 1.0).abs() < 0.05, "{}", rep.params.g / khz(1.0));
}

#[test]
fn coupling_tracks_axial_field() {
    let base = device1_absorption_model();
    let (cfg, pp) = weak_parts(&base);
    let mut ratios = Vec::new();
    for (i, b) in [18.0, 27.0, 36.0].into_iter().enumerate() {
        let g = khz(40.0) * b / 27.0;
        let m = LineModel::WeakKerr { cfg: KerrModeConfig { g_plus: g, ..cfg.clone() }, pp };
        let grid = default_grid(0.0, m.gamma_m() * 3.0);
        let mag = noisy(&m, &grid, 0.01, 100 + i as u64);
        let rep = fit_g(&m, &grid, &mag, &FitSetup::default()).unwrap();
        ratios.push(rep.params.g / b);
    }
    let mean = ratios.iter().sum::<f64>() / 3.0;
    assert!(ratios.iter().all(|r| (r / mean - 1.0).abs() < 0.05), "{ratios:?}");
}

#[test]
fn fit_rejects_short_traces() {
    let model = device1_absorption_model();
    let grid: Vec<f64> = (0..20).map(|i| i as f64).collect();
    assert!(matches!(fit_g(&model, &grid, &grid, &FitSetup::default()), Err(Error::Fit(_))));
}

#[test]
fn aggregate_weights_by_variance() {
    let (m, s) = aggregate(&[(1.0, 1.0), (3.0, 1.0)]);
    assert!((m - 2.0).abs() < 1e-15 && (s - 2f64.sqrt()).abs() < 1e-15);
    let (m, _) = aggregate(&[(1.0, 0.1), (3.0, 10.0)]);
    assert!((m - 1.0).abs() < 1e-3);
}

#[test]
fn low_occupation_kerr_and_two_level_agree() {
    let (tls, pp) = tls_parts(&device2_tls_model());
    let pp = PumpProbeConfig { epsilon_d: mhz(0.3), epsilon_p: mhz(0.15), ..pp };
    let grid = default_grid(0.0, tls.gamma_m);
    let one = Complex64::new(1.0, 0.0);
    let rt: Vec<f64> = tls_response(&tls, &pp, &TlsOptions::default(), one, &grid).unwrap().response.iter().map(|z| z.norm()).collect();
    let cfg = KerrModeConfig {
        omega_plus: tls.tilde_omega_q,
        kerr_plus: 0.1 * tls.gamma_q,
        kappa: tls.gamma_q,
        kappa_ex: None,
        kappa_0: None,
        g_plus: tls.g_0,
        omega_m: tls.omega_m,
        gamma_m: tls.gamma_m,
    };
    let rw: Vec<f64> = weak_kerr_response(&cfg, &pp, &grid).response.iter().map(|z| z.norm()).collect();
    let dev = rw.iter().zip(&rt).map(|(a, b)| (a / rw[0] - b / rt[0]).abs()).fold(0.0, f64::max);
    assert!(dev < 5e-3, "{dev}");
}

#[test]
#[ignore = "mean-field Kerr line shape moves away from the two-level one as K/κ grows"]
fn kerr_approaches_two_level_with_anharmonicity() {
    let (tls, pp) = tls_parts(&device2_tls_model());
    let grid = default_grid(0.0, tls.gamma_m);
    let one = Complex64::new(1.0, 0.0);
    let rt: Vec<f64> = tls_response(&tls, &pp, &TlsOptions::default(), one, &grid).unwrap().response.iter().map(|z| z.norm()).collect();
    let devs: Vec<f64> = [1.0, 3.0, 10.0]
        .iter()
        .map(|r| {
            let cfg = KerrModeConfig {
                omega_plus: tls.tilde_omega_q,
                kerr_plus: r * tls.gamma_q,
                kappa: tls.gamma_q,
                kappa_ex: None,
                kappa_0: None,
                g_plus: tls.g_0,
                omega_m: tls.omega_m,
                gamma_m: tls.gamma_m,
            };
            let rw: Vec<f64> = weak_kerr_response(&cfg, &pp, &grid).response.iter().map(|z| z.norm()).collect();
            rw.iter().zip(&rt).map(|(a, b)| (a / rw[0] - b / rt[0]).abs()).fold(0.0, f64::max)
        })
        .collect();
    assert!(devs.windows(2).all(|w| w[1] < w[0]), "{devs:?}");
}

#[test]
fn grid_default_spans_forty_linewidths() {
    let g = default_grid(hz(5.0), hz(13.0));
    assert_eq!(g.len(), 501);
    assert!((g[0] - hz(5.0 - 520.0)).abs() < 1e-9 && (g[500] - hz(5.0 + 520.0)).abs() < 1e-9);
}
