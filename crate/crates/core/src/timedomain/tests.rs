use super::*;
use crate::kerr_backaction::{backaction_point, max_growth_rate, steady_state_at, threshold_epsilon};
use crate::units::{hz, mhz};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::PI;

/// Strongly coupled, fast mechanics so limit cycles form within a few
/// thousand periods.
fn fast() -> KerrModeConfig {
    KerrModeConfig {
        omega_plus: hz(5e9),
        kerr_plus: mhz(0.2),
        kappa: mhz(9.0),
        kappa_ex: None,
        kappa_0: None,
        g_plus: hz(400e3),
        omega_m: mhz(4.0),
        gamma_m: hz(10e3),
    }
}

fn period(cfg: &KerrModeConfig) -> f64 {
    2.0 * PI / cfg.omega_m
}

fn noise(rng: &mut ChaCha8Rng, n: usize, sigma: f64) -> Vec<Complex64> {
    let d = Normal::new(0.0, sigma / 2f64.sqrt()).unwrap();
    (0..n).map(|_| Complex64::new(d.sample(rng), d.sample(rng))).collect()
}

fn comb_signal(n: usize, fs: f64, spacing: f64, amps: &[(i32, f64)], noise_sigma: f64, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = noise(&mut rng, n, noise_sigma);
    for (i, v) in x.iter_mut().enumerate() {
        let t = i as f64 / fs;
        for &(k, a) in amps {
            *v += Complex64::from_polar(a, 2.0 * PI * k as f64 * spacing * t + 0.3 * k as f64);
        }
    }
    x
}

#[test]
fn free_decay_follows_linear_law() {
    let cfg = fast();
    let m = Model::kerr(&cfg, mhz(3.0), 0.0);
    let t_end = 5.0 / cfg.kappa;
    let ic = IntegrationConfig { t_end, rtol: 1e-12, atol: 1e-15, sample_rate: 200.0 / t_end, ..Default::default() };
    let ts = integrate(&m, &[1.0, 0.0, 0.0, 0.0], &ic).unwrap();
    for (t, a) in ts.t.iter().zip(ts.amplitude(0)) {
        let want = (-cfg.kappa * t / 2.0).exp();
        assert!((a.norm() - want).abs() <= 1e-6 * want, "t {t}: {} vs {want}", a.norm());
    }
}

#[test]
fn detached_cavity_decays_at_its_own_rate() {
    let mut params = ThreeModeParams::fig6c();
    params.j = 0.0;
    let drive = ThreeModeDrive { omega_d: params.omega_c, epsilon: 0.0 };
    let m = Model::ThreeMode { params: params.clone(), drive };
    let t_end = 5.0 / params.kappa_b;
    let ic = IntegrationConfig { t_end, rtol: 1e-12, atol: 1e-15, sample_rate: 50.0 / t_end, ..Default::default() };
    let ts = integrate(&m, &[0.6, 0.8, 0.0, 0.0, 0.0, 0.0], &ic).unwrap();
    let last = ts.amplitude(0)[ts.t.len() - 1];
    let want = (-params.kappa_b * ts.t[ts.t.len() - 1] / 2.0).exp();
    assert!((last.norm() - want).abs() <= 1e-6 * want);
}

#[test]
fn tighter_tolerance_reduces_error() {
    let mut cfg = fast();
    cfg.kerr_plus = 0.0;
    cfg.g_plus = 0.0;
    let det = mhz(3.0);
    let m = Model::kerr(&cfg, det, 0.0);
    let t_end = 1e-6;
    let exact = Complex64::new(-cfg.kappa / 2.0, det).scale(t_end).exp();
    let errors: Vec<f64> = [1e-5, 1e-7, 1e-9]
        .iter()
        .map(|&tol| {
            let ic = IntegrationConfig { t_end, rtol: tol, atol: tol * 1e-3, sample_rate: 1.0 / t_end, ..Default::default() };
            let ts = integrate(&m, &[1.0, 0.0, 0.0, 0.0], &ic).unwrap();
            (ts.amplitude(0)[ts.t.len() - 1] - exact).norm()
        })
        .collect();
    for w in errors.windows(2) {
        assert!(w[1] < w[0] / 10.0, "{errors:?}");
    }
}

#[test]
fn ring_down_settles_at_static_displacement() {
    let cfg = fast();
    let (det, eps) = (mhz(-4.0), mhz(2.0));
    let bp = backaction_point(&cfg, det, eps);
    assert!(bp.gamma_eff > 0.0);
    let m = Model::kerr(&cfg, det, eps);
    let ss = steady_state_at(&cfg, det, eps)[0];
    let t_end = 40.0 / bp.gamma_eff;
    let ic = IntegrationConfig { t_end, rtol: 1e-10, atol: 1e-13, sample_rate: 20.0 / t_end, ..Default::default() };
    let ts = integrate(&m, &[ss.alpha.re, ss.alpha.im, 0.0, 0.0], &ic).unwrap();
    let y = &ts.states[ts.t.len() - 1];
    let n = y[0] * y[0] + y[1] * y[1];
    let u0 = -cfg.g_plus * n / cfg.omega_m;
    assert!((y[2] - u0).abs() <= 1e-4 * u0.abs(), "{} vs {u0}", y[2]);
    let v0 = u0 * cfg.gamma_m / (2.0 * cfg.omega_m);
    assert!((y[3] - v0).abs() <= 1e-3 * v0.abs(), "{} vs {v0}", y[3]);
}

#[test]
fn growth_rate_matches_linearization() {
    let cfg = fast();
    let det = mhz(4.0);
    let th = threshold_epsilon(&cfg, det, mhz(200.0)).unwrap();
    for f in [0.8, 1.2, 1.5] {
        let m = Model::kerr(&cfg, det, th * f);
        let ss = steady_state_at(&cfg, det, th * f)[0];
        let fp = &m.fixed_points().unwrap()[0];
        let g = mechanical_growth(&m, fp, &GrowthOptions { duration_periods: 400.0, seed_phonons: 1e-6, ..Default::default() }).unwrap();
        let lam = 2.0 * max_growth_rate(&cfg, det, &ss);
        assert_eq!(g.unstable(), f > 1.0);
        assert!((g.rate - lam).abs() <= 2e-3 * lam.abs(), "f {f}: {} vs {lam}", g.rate);
    }
}

#[test]
fn three_mode_fixed_point_is_stationary() {
    let params = ThreeModeParams::fig6c();
    let drive = ThreeModeDrive::from_power(params.omega_c - mhz(215.0), -20.0, 1647.0);
    let m = Model::ThreeMode { params: params.clone(), drive };
    let fp = m.fixed_points().unwrap()[0].clone();
    let t_end = 100.0 * 2.0 * PI / params.omega_m;
    let ic = IntegrationConfig { t_end, rtol: 1e-11, atol: 1e-14, sample_rate: 10.0 / t_end, ..Default::default() };
    let ts = integrate(&m, &fp, &ic).unwrap();
    let scale = fp.iter().map(|v| v * v).sum::<f64>().sqrt();
    for y in &ts.states {
        let d = y.iter().zip(&fp).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(d <= 1e-7 * scale, "{d}");
    }
}

#[test]
fn limit_cycle_saturates_into_a_comb() {
    let cfg = fast();
    let det = mhz(4.0);
    let eps = 1.2 * threshold_epsilon(&cfg, det, mhz(200.0)).unwrap();
    let m = Model::kerr(&cfg, det, eps);
    let y0 = seeded(&m, &m.fixed_points().unwrap()[0], 1.0);
    let t_end = 2000.0 * period(&cfg);
    let ic = IntegrationConfig { t_end, sample_rate: 16.0 * to_hz(cfg.omega_m), ..Default::default() };
    ic.check_for_psd(&m, 2).unwrap();
    let ts = integrate(&m, &y0, &ic).unwrap();
    assert_eq!(classify_envelope(&m, &ts, 20, 0.02), Outcome::LimitCycle);
    let opts = PsdOptions { resolution: 20e3, discard_fraction: 0.5, ..Default::default() };
    let p = psd(&ts.output_field(&m), ts.sample_rate(), &opts).unwrap().with_comb(cfg.omega_m, &CombOptions::default());
    assert!(p.comb_detected);
    let shifted = to_hz(cfg.omega_m + backaction_point(&cfg, det, eps).delta_omega);
    let s = p.comb_spacing.unwrap();
    assert!((s - shifted).abs() <= 0.01 * shifted, "{s} vs {shifted}");
}

#[test]
fn below_threshold_run_shows_no_comb() {
    let cfg = fast();
    let det = mhz(4.0);
    let eps = 0.8 * threshold_epsilon(&cfg, det, mhz(200.0)).unwrap();
    let m = Model::kerr(&cfg, det, eps);
    let y0 = seeded(&m, &m.fixed_points().unwrap()[0], 1.0);
    let ic = IntegrationConfig { t_end: 2000.0 * period(&cfg), sample_rate: 16.0 * to_hz(cfg.omega_m), ..Default::default() };
    let ts = integrate(&m, &y0, &ic).unwrap();
    assert_eq!(classify_envelope(&m, &ts, 20, 0.02), Outcome::Decaying);
    let opts = PsdOptions { resolution: 20e3, ..Default::default() };
    let p = psd(&ts.output_field(&m), ts.sample_rate(), &opts).unwrap();
    assert!(!comb_detect(&p, cfg.omega_m, &CombOptions::default()).detected);
}

#[test]
fn device_comb_appears_above_threshold_only() {
    let cfg = KerrModeConfig::device2_kerr_mode();
    let det = 0.0;
    let th = threshold_epsilon(&cfg, det, mhz(100.0)).unwrap();
    let f_m = to_hz(cfg.omega_m);
    let run = |eps: f64, seed: f64, t_end: f64| {
        let m = Model::kerr(&cfg, det, eps);
        let y0 = seeded(&m, &m.fixed_points().unwrap()[0], seed);
        let ic = IntegrationConfig { t_end, record_from: t_end - 1e-3, sample_rate: 16.0 * f_m, ..Default::default() };
        let ts = integrate(&m, &y0, &ic).unwrap();
        let opts = PsdOptions { resolution: 5e3, discard_fraction: 0.0, ..Default::default() };
        psd(&ts.output_field(&m), ts.sample_rate(), &opts).unwrap().with_comb(cfg.omega_m, &CombOptions::default())
    };
    // Seeded with the thermal occupation, the instability saturates within
    // a few tens of milliseconds.
    let above = run(3.0 * th, 365.0, 30e-3);
    assert!(above.comb_detected);
    let below = run(0.5 * th, 1.0, 2e-3);
    assert!(!below.comb_detected);
}

#[test]
fn onset_matches_backaction_boundary_on_one_column() {
    let cfg = KerrModeConfig::device2_kerr_mode();
    let det = mhz(4.0);
    let eps: Vec<f64> = (0..12).map(|i| mhz(0.3) * (10f64).powf(i as f64 / 11.0)).collect();
    let opts = GrowthOptions { duration_periods: 4000.0, ..Default::default() };
    let kerr = eps.iter().position(|&e| backaction_point(&cfg, det, e).gamma_eff < 0.0).unwrap();
    let td = eps.iter().position(|&e| unstable_in_time_domain(&Model::kerr(&cfg, det, e), &opts).unwrap()).unwrap();
    assert!(kerr.abs_diff(td) <= 1, "kerr {kerr} td {td}");
}

#[test]
fn step_underflow_reports_failure_time() {
    let cfg = fast();
    let m = Model::kerr(&cfg, mhz(3.0), mhz(1.0));
    let ic = IntegrationConfig { t_start: 1e7, t_end: 1e7 + 1e-6, rtol: 1e-10, atol: 1e-13, sample_rate: 1e8, ..Default::default() };
    match integrate(&m, &[0.0; 4], &ic) {
        Err(Error::StepUnderflow { t }) => assert!((t - 1e7).abs() < 1.0),
        other => panic!("expected underflow, got {other:?}"),
    }
}

#[test]
fn replay_is_bitwise_identical() {
    let cfg = fast();
    let m = Model::kerr(&cfg, mhz(4.0), mhz(3.0));
    let y0 = seeded(&m, &m.fixed_points().unwrap()[0], 1.0);
    let ic = IntegrationConfig { t_end: 50.0 * period(&cfg), ..Default::default() };
    let a = integrate(&m, &y0, &ic).unwrap();
    let b = integrate(&m, &y0, &ic).unwrap();
    assert_eq!(a, b);
}

#[test]
fn rejects_bad_configs() {
    let cfg = fast();
    let m = Model::kerr(&cfg, 0.0, 0.0);
    let bad = IntegrationConfig { t_end: -1.0, ..Default::default() };
    assert!(integrate(&m, &[0.0; 4], &bad).is_err());
    assert!(integrate(&m, &[0.0; 3], &IntegrationConfig::default()).is_err());
    let short = IntegrationConfig { t_end: 10.0 * period(&cfg), ..Default::default() };
    assert!(short.check_for_psd(&m, 2).is_err());
    let slow = IntegrationConfig { t_end: 1e-3, sample_rate: to_hz(cfg.omega_m), ..Default::default() };
    assert!(slow.check_for_psd(&m, 2).is_err());
}

#[test]
fn sinusoid_gives_one_peak_with_its_power() {
    let (fs, f0, a) = (1e6, 123_456.7, 2.0);
    let x: Vec<Complex64> = (0..1 << 16).map(|i| Complex64::from_polar(a, 2.0 * PI * f0 * i as f64 / fs)).collect();
    let p = psd(&x, fs, &PsdOptions { resolution: 1e3, ..Default::default() }).unwrap();
    assert_eq!(p.peaks.len(), 1, "{:?}", p.peaks);
    let pk = p.peaks[0];
    assert!((pk.freq - f0).abs() <= 0.1 * p.resolution);
    assert!((pk.power - a * a).abs() <= 0.01 * a * a, "{}", pk.power);
}

#[test]
fn integrated_psd_equals_variance() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let fs = 1e6;
    for _ in 0..20 {
        let sigma = 10f64.powf(rng.random_range(-3.0..3.0));
        let mut x = noise(&mut rng, 1 << 16, sigma);
        let (f, a) = (rng.random_range(-4e5..4e5), sigma * rng.random_range(0.0..3.0));
        let offset = Complex64::new(rng.random_range(-1.0..1.0), 0.0) * sigma;
        for (i, v) in x.iter_mut().enumerate() {
            *v += Complex64::from_polar(a, 2.0 * PI * f * i as f64 / fs) + offset;
        }
        let opts = PsdOptions { resolution: 1e3, remove_mean: true, ..Default::default() };
        let p = psd(&x, fs, &opts).unwrap();
        let tail = &x[(x.len() as f64 * opts.discard_fraction) as usize..];
        let mean = tail.iter().sum::<Complex64>() / tail.len() as f64;
        let var = tail.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / tail.len() as f64;
        assert!((p.integrated_power() - var).abs() <= 0.01 * var, "{} vs {var}", p.integrated_power());
    }
}

#[test]
fn short_series_is_rejected() {
    let x = vec![Complex64::new(1.0, 0.0); 1000];
    assert!(matches!(psd(&x, 1e6, &PsdOptions { resolution: 1e3, ..Default::default() }), Err(Error::SegmentTooShort(_))));
}

#[test]
fn flat_noise_is_not_a_comb() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = noise(&mut rng, 1 << 17, 1.0);
    let p = psd(&x, 64e6, &PsdOptions { resolution: 20e3, ..Default::default() }).unwrap();
    assert!(!comb_detect(&p, mhz(4.0), &CombOptions::default()).detected);
}

#[test]
fn synthetic_comb_is_found_with_its_spacing() {
    let (fs, s) = (64e6, 4.0123e6);
    let teeth = [(-2, 0.05), (-1, 0.3), (0, 1.0), (1, 0.3), (2, 0.05)];
    let x = comb_signal(1 << 17, fs, s, &teeth, 1e-3, 3);
    let p = psd(&x, fs, &PsdOptions { resolution: 5e3, ..Default::default() }).unwrap();
    let c = comb_detect(&p, hz(3.95e6), &CombOptions::default());
    assert!(c.detected);
    assert_eq!(c.teeth.len(), 5);
    assert!((c.spacing.unwrap() - s).abs() <= 1e-3 * s);
}

#[test]
fn comb_needs_fine_resolution() {
    let fs = 64e6;
    let x = comb_signal(1 << 14, fs, 4e6, &[(-2, 0.1), (-1, 0.3), (0, 1.0), (1, 0.3), (2, 0.1)], 1e-3, 5);
    let p = psd(&x, fs, &PsdOptions { resolution: 500e3, ..Default::default() }).unwrap();
    assert!(!comb_detect(&p, mhz(4.0), &CombOptions::default()).detected);
}

#[test]
fn weak_second_sideband_fails_the_practical_criterion() {
    let fs = 64e6;
    let x = comb_signal(1 << 17, fs, 4e6, &[(-1, 0.3), (0, 1.0), (1, 0.3)], 1e-2, 9);
    let p = psd(&x, fs, &PsdOptions { resolution: 5e3, ..Default::default() }).unwrap();
    let c = comb_detect(&p, mhz(4.0), &CombOptions::default());
    assert_eq!(c.teeth.len(), 3);
    assert!(!c.detected);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn comb_verdict_is_scale_invariant(scale in -6.0..6.0f64, a2 in 0.001..0.2f64, seed in 0u64..1000) {
        let fs = 64e6;
        let x = comb_signal(1 << 15, fs, 4e6, &[(-2, a2), (-1, 0.3), (0, 1.0), (1, 0.3), (2, a2)], 1e-3, seed);
        let k = 10f64.powf(scale);
        let y: Vec<Complex64> = x.iter().map(|v| v * k).collect();
        let opts = PsdOptions { resolution: 5e3, ..Default::default() };
        let cx = comb_detect(&psd(&x, fs, &opts).unwrap(), mhz(4.0), &CombOptions::default());
        let cy = comb_detect(&psd(&y, fs, &opts).unwrap(), mhz(4.0), &CombOptions::default());
        prop_assert_eq!(cx.detected, cy.detected);
        prop_assert_eq!(cx.teeth.len(), cy.teeth.len());
    }
}
