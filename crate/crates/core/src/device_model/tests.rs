use super::*;
use crate::units::{ghz, khz, mhz, to_hz};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Independent bisection for ω_q(Φ) = target on [0, 0.5).
fn bisect_flux(p: &DeviceParams, target: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 0.5);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if transmon_frequency(p, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Roots of a symmetric 2×2 block by the quadratic formula.
fn quad_oracle(a: f64, b: f64, d: f64) -> (f64, f64) {
    let m = 0.5 * (a + d);
    let r = (0.25 * (a - d).powi(2) + b * b).sqrt();
    (m - r, m + r)
}

/// Eigenvalues of a symmetric 3×3 via the trigonometric cubic solution.
fn cubic_oracle(m: [[f64; 3]; 3]) -> [f64; 3] {
    let q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
    let p1 = m[0][1].powi(2) + m[0][2].powi(2) + m[1][2].powi(2);
    let p2 = (m[0][0] - q).powi(2) + (m[1][1] - q).powi(2) + (m[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let mut b = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            b[i][j] = (m[i][j] - if i == j { q } else { 0.0 }) / p;
        }
    }
    let det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let phi = (det / 2.0).clamp(-1.0, 1.0).acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let e2 = 3.0 * q - e1 - e3;
    let mut e = [e1, e2, e3];
    e.sort_by(f64::total_cmp);
    e
}

#[test]
fn transmon_frequency_limits() {
    let p = DeviceParams::device1();
    assert_eq!(transmon_frequency(&p, 0.0), p.omega_q_max);
    assert!((transmon_frequency(&p, 0.5) + p.alpha_t).abs() < 1e-6 * p.alpha_t);
}

#[test]
fn transmon_frequency_monotone_on_branch() {
    let p = DeviceParams::device1();
    let mut last = f64::INFINITY;
    for i in 0..500 {
        let w = transmon_frequency(&p, i as f64 * 0.001);
        assert!(w < last);
        last = w;
    }
}

#[test]
fn device1_flux_for_5325_round_trip() {
    let p = DeviceParams::device1();
    let target = ghz(5.325);
    let phi = flux_for_qubit_frequency(&p, target).unwrap();
    let oracle = bisect_flux(&p, target);
    assert!((phi - oracle).abs() < 1e-12);
    assert!((to_hz(transmon_frequency(&p, phi)) - 5.325e9).abs() < 1.0);
}

#[test]
fn uncoupled_hamiltonian_is_diagonal() {
    let (wq, wc, a) = (ghz(6.1), ghz(5.8), mhz(284.0));
    let h = build_hamiltonian_at(wq, wc, 0.0, a);
    let want = [0.0, wq, wc, 2.0 * wq - a, wc + wq, 2.0 * wc];
    for i in 0..6 {
        for j in 0..6 {
            let w = if i == j { want[i] } else { 0.0 };
            assert_eq!(h[(i, j)], w);
        }
    }
}

#[test]
fn device2_resonant_splitting() {
    let p = DeviceParams::device2();
    let h = build_hamiltonian_at(p.omega_c, p.omega_c, p.j, p.alpha_t);
    let e = diagonalize(&h).unwrap().energies;
    assert!(rel(e[2] - e[1], mhz(386.0)) < 1e-3);
    assert!(rel(e[1], p.omega_c - p.j) < 1e-12);
}

#[test]
fn device1_resonant_splitting() {
    let p = DeviceParams::device1();
    let phi = flux_for_qubit_frequency(&p, p.omega_c).unwrap();
    let spec = PolaritonSpectrum::from_energies(diagonalize(&build_hamiltonian(&p, &FluxPoint::new(phi, 0.0))).unwrap().energies);
    let split = spec.frequency(TransitionLabel::Plus) - spec.frequency(TransitionLabel::Minus);
    assert!(rel(split, mhz(144.0)) < 1e-3);
}

#[test]
fn diagonal_input_returns_diagonal() {
    let mut h = Hamiltonian6::zeros();
    let d = [0.5, 3.0, 1.0, 7.0, 5.0, 6.0];
    for i in 0..6 {
        h[(i, i)] = d[i];
    }
    let e = diagonalize(&h).unwrap().energies;
    assert_eq!(e, [0.0, 0.5, 2.5, 4.5, 5.5, 6.5]);
}

#[test]
fn asymmetric_input_rejected() {
    let mut h = build_hamiltonian_at(1.0, 1.1, 0.1, 0.2);
    h[(1, 2)] += 0.01;
    assert!(matches!(diagonalize(&h), Err(Error::NonSymmetric(_))));
}

#[test]
fn uncoupled_transitions() {
    let (wq, wc) = (ghz(7.0), ghz(5.8));
    let e = diagonalize(&build_hamiltonian_at(wq, wc, 0.0, mhz(300.0))).unwrap().energies;
    let spec = PolaritonSpectrum::from_energies(e);
    assert_eq!(spec.frequency(TransitionLabel::Minus), wc);
    assert_eq!(spec.frequency(TransitionLabel::Plus), wq);
}

#[test]
fn harmonic_ladder_at_resonance() {
    let (w, j) = (ghz(5.7), mhz(150.0));
    let e = diagonalize(&build_hamiltonian_at(w, w, j, 0.0)).unwrap().energies;
    let want = [0.0, w - j, w + j, 2.0 * w - 2.0 * j, 2.0 * w, 2.0 * w + 2.0 * j];
    for (a, b) in e.iter().zip(want) {
        assert!((a - b).abs() < 1e-6 * w, "{a} vs {b}");
    }
    // Harmonic ladder: one-to-two excitation steps repeat the first-manifold lines.
    let spec = PolaritonSpectrum::from_energies(e);
    let upper_step = spec.frequency(TransitionLabel::PlusGamma) - spec.frequency(TransitionLabel::Plus);
    let lower_step = spec.frequency(TransitionLabel::Minus) - spec.frequency(TransitionLabel::MinusAlpha);
    assert!((upper_step - 0.0).abs() < 1e-6 * w);
    assert!((lower_step - 0.0).abs() < 1e-6 * w);
}

#[test]
fn large_anharmonicity_limit() {
    // With α → ∞ the |qq⟩ state drops far below and the rest splits by ±√2 J around 2ω.
    let (w, j) = (ghz(5.7), mhz(150.0));
    let e = diagonalize(&build_hamiltonian_at(w, w, j, ghz(1e5))).unwrap().energies;
    let s = std::f64::consts::SQRT_2 * j;
    assert!(rel(e[4], 2.0 * w - s) < 1e-6);
    assert!(rel(e[5], 2.0 * w + s) < 1e-6);
}

#[test]
fn device2_240mhz_detuning_labels() {
    let p = DeviceParams::device2();
    let e = diagonalize(&build_hamiltonian_at(p.omega_c + mhz(240.0), p.omega_c, p.j, p.alpha_t))
        .unwrap()
        .energies;
    let spec = PolaritonSpectrum::from_energies(e);
    let labels: Vec<_> = spec.transitions.iter().map(|t| t.0).collect();
    assert!(labels.contains(&TransitionLabel::MinusBeta));
    assert!(labels.contains(&TransitionLabel::PlusGamma));
    // Both lie between the two polaritons.
    let (lo, hi) = (spec.frequency(TransitionLabel::Minus), spec.frequency(TransitionLabel::Plus));
    for l in [TransitionLabel::MinusBeta, TransitionLabel::PlusGamma] {
        let f = spec.frequency(l);
        assert!(f > lo && f < hi, "{l:?} at {}", to_hz(f));
    }
}

#[test]
fn ordering_within_manifolds() {
    let p = DeviceParams::device2();
    for i in 1..49 {
        let e = diagonalize(&build_hamiltonian(&p, &FluxPoint::new(i as f64 * 0.01, 0.0))).unwrap().energies;
        assert!(e[1] < e[2]);
        assert!(e[3] < e[4] && e[4] < e[5]);
        assert_eq!(e[0], 0.0);
    }
}

#[test]
fn responsivity_zero_at_sweet_spot() {
    let p = DeviceParams::device1();
    for l in TransitionLabel::PRIMARY {
        let g = flux_responsivity(&p, &FluxPoint::new(0.0, 0.0), l).unwrap();
        assert!(g.abs() < 1e-3, "{l:?}: {g}");
    }
}

#[test]
fn responsivity_singular_near_half_flux() {
    let p = DeviceParams::device1();
    let r = flux_responsivity(&p, &FluxPoint::new(0.49995, 0.0), TransitionLabel::Plus);
    assert!(matches!(r, Err(Error::FluxSingular { .. })));
}

/// ∂E_i/∂Φ = ⟨i|∂H/∂Φ|i⟩ with ∂H/∂Φ = ω_q'(Φ) diag(0, 1, 0, 2, 1, 0).
fn hellmann_feynman(p: &DeviceParams, phi: f64) -> [f64; 6] {
    let eig = diagonalize(&build_hamiltonian(p, &FluxPoint::new(phi, 0.0))).unwrap();
    let dq = transmon_slope(p, phi);
    let n_q = [0.0, 1.0, 0.0, 2.0, 1.0, 0.0];
    let mut out = [0.0; 6];
    for (i, o) in out.iter_mut().enumerate() {
        *o = (0..6).map(|k| eig.vectors[(k, i)].powi(2) * n_q[k]).sum::<f64>() * dq;
    }
    out
}

#[test]
fn upper_polariton_slope_sign() {
    // Small flux: transmon above the cavity, so the upper polariton is
    // transmon-like and follows the falling ω_q.
    let p = DeviceParams::device1();
    let flux = FluxPoint::new(0.1, 0.0);
    let g = flux_responsivity(&p, &flux, TransitionLabel::Plus).unwrap();
    let hf = hellmann_feynman(&p, 0.1)[2];
    assert!(g < 0.0);
    assert!(rel(g, hf) < 1e-6);
}

#[test]
fn coupling_zero_without_field() {
    let p = DeviceParams::device1();
    assert_eq!(coupling_g(&p, &FluxPoint::new(0.3, 0.0), TransitionLabel::Plus).unwrap(), 0.0);
}

#[test]
fn zero_point_displacement() {
    let p = DeviceParams::device1();
    let x = (1.054_571_817e-34 / (2.0 * 0.75e-15 * std::f64::consts::TAU * 3.97e6)).sqrt();
    assert!(rel(p.x_zpf(), x) < 1e-14);
    assert!((p.x_zpf() - 5.3e-14).abs() < 0.05e-14);
}

fn upper_responsivity_at(p: &DeviceParams, omega_plus: f64) -> f64 {
    let phi = flux_for_upper_polariton(p, omega_plus).unwrap();
    flux_responsivity(p, &FluxPoint::new(phi, 0.0), TransitionLabel::Plus).unwrap()
}

#[test]
fn rescaled_coupling_matches_reported_value() {
    // 23.1 kHz known at ω₊/2π = 5.884 GHz, rescaled to 5.873 GHz.
    let p = DeviceParams::device1();
    let g_ref = upper_responsivity_at(&p, ghz(5.884));
    let g_new = upper_responsivity_at(&p, ghz(5.873));
    let g = scale_known_g(khz(23.1), g_ref, g_new);
    assert!((to_hz(g) - 13.4e3).abs() < 0.8e3, "got {} Hz", to_hz(g));
}

#[test]
fn upper_responsivity_device1_pinned() {
    // Pinned against the Hellmann–Feynman oracle; the symmetric-SQUID model
    // gives about −1.52 GHz/Φ₀ here.
    let p = DeviceParams::device1();
    let phi = flux_for_upper_polariton(&p, ghz(5.873)).unwrap();
    let g = flux_responsivity(&p, &FluxPoint::new(phi, 0.0), TransitionLabel::Plus).unwrap();
    let hf = hellmann_feynman(&p, phi)[2];
    assert!(rel(g, hf) < 1e-6);
    assert!((to_hz(g) / 1e9 + 1.517).abs() < 0.01, "{}", to_hz(g));
}

#[test]
#[ignore = "symmetric-SQUID tuning gives |G+| about 1.52 GHz/flux quantum, 31% above the reported 1.16"]
fn upper_responsivity_device1_reported() {
    let p = DeviceParams::device1();
    let g = upper_responsivity_at(&p, ghz(5.873));
    assert!(rel(to_hz(g).abs(), 1.16e9) < 0.15);
}

#[test]
fn kerr_uncoupled_branches() {
    let (wq, wc, a) = (ghz(6.5), ghz(5.8), mhz(290.0));
    let k = kerr_ladder(wc, wq, 0.0, a, 4, Branch::Upper).unwrap();
    assert!((k - a).abs() < 1e-12 * wq);
    let k = kerr_ladder(wc, wq, 0.0, a, 4, Branch::Lower).unwrap();
    assert!(k.abs() < 1e-12 * wq);
}

#[test]
fn kerr_truncation_converged() {
    let p = DeviceParams::device1();
    let phi = flux_for_upper_polariton(&p, ghz(5.873)).unwrap();
    let k = kerr_estimate(&p, &FluxPoint::new(phi, 0.0), Branch::Upper).unwrap();
    assert!(!k.truncation_warning);
    assert!(k.kerr > 0.0);
    // Two-level truncation misses |qq⟩ and |cc⟩ and must disagree.
    let k2 = kerr_ladder(p.omega_c, transmon_frequency(&p, phi), p.j, p.alpha_t, 2, Branch::Upper).unwrap();
    assert!((k2 - k.kerr).abs() > 0.01 * k.kerr);
}

#[test]
fn kerr_matches_two_excitation_block() {
    // The 4-level truncation contains the full two-excitation block, so K must
    // equal 2E(+) minus the matching eigenvalue of the 3×3 block.
    let p = DeviceParams::device2();
    let wq = p.omega_c + mhz(240.0);
    let eig = diagonalize(&build_hamiltonian_at(wq, p.omega_c, p.j, p.alpha_t)).unwrap();
    let k = kerr_ladder(p.omega_c, wq, p.j, p.alpha_t, 4, Branch::Upper).unwrap();
    let e = eig.energies;
    let candidates = [2.0 * e[2] - e[3], 2.0 * e[2] - e[4], 2.0 * e[2] - e[5]];
    assert!(candidates.iter().any(|c| (c - k).abs() < 1e-3 * k.abs()), "{k} vs {candidates:?}");
}

#[test]
fn kerr_device1_pinned() {
    let p = DeviceParams::device1();
    let phi = flux_for_upper_polariton(&p, ghz(5.873)).unwrap();
    let k = kerr_estimate(&p, &FluxPoint::new(phi, 0.0), Branch::Upper).unwrap().kerr;
    assert!((to_hz(k) / 1e6 - 2.42).abs() < 0.05, "{}", to_hz(k));
}

#[test]
#[ignore = "the physical ladder gives K+ about 2.4 MHz at 5.873 GHz, below the reported 5.1 MHz by more than 20%"]
fn kerr_device1_reported() {
    let p = DeviceParams::device1();
    let phi = flux_for_upper_polariton(&p, ghz(5.873)).unwrap();
    let k = kerr_estimate(&p, &FluxPoint::new(phi, 0.0), Branch::Upper).unwrap().kerr;
    assert!(rel(to_hz(k), 5.1e6) < 0.2);
}

#[test]
fn kerr_offset_invariant() {
    let p = DeviceParams::device1();
    let wq = ghz(6.0);
    let h = ladder_hamiltonian(p.omega_c, wq, p.j, p.alpha_t, 4);
    let shifted = &h + DMatrix::identity(16, 16) * ghz(3.3);
    let a = kerr_from_hamiltonian(h, 4, Branch::Upper).unwrap();
    let b = kerr_from_hamiltonian(shifted, 4, Branch::Upper).unwrap();
    assert!((a - b).abs() < 1e-6 * a.abs());
}

#[test]
fn spectrum_offset_invariant() {
    let h = build_hamiltonian_at(ghz(6.0), ghz(5.8), mhz(100.0), mhz(300.0));
    let shifted = h + Hamiltonian6::identity() * ghz(2.0);
    let a = diagonalize(&h).unwrap().energies;
    let b = diagonalize(&shifted).unwrap().energies;
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() < 1e-3);
    }
}

#[test]
fn tracked_sweep_follows_bare_states_through_crossing() {
    // J = 0: energies cross; tracking keeps following the same bare state.
    let mut p = DeviceParams::device1();
    p.j = 0.0;
    let phis: Vec<f64> = (0..100).map(|i| 0.2 + 0.002 * i as f64).collect();
    let tracked = tracked_sweep(&p, &phis).unwrap();
    // Slot 1 starts as the cavity (below the transmon at small flux)...
    assert!((tracked[0][1] - p.omega_c).abs() < 1.0);
    // ...and stays the cavity after ω_q falls below ω_c.
    assert!(transmon_frequency(&p, phis[99]) < p.omega_c);
    assert!((tracked[99][1] - p.omega_c).abs() < 1.0);
    // Energy ordering, by contrast, swaps.
    let sorted = diagonalize(&build_hamiltonian(&p, &FluxPoint::new(phis[99], 0.0))).unwrap().energies;
    assert!((sorted[1] - p.omega_c).abs() > 1.0);
}

#[test]
fn params_validation() {
    let mut p = DeviceParams::device1();
    assert!(p.validate().is_ok());
    p.xi = 1.5;
    assert!(p.validate().is_err());
    let mut p = DeviceParams::device1();
    p.kappa_in = Some(mhz(1.0));
    p.kappa_0 = Some(mhz(0.2));
    assert!(p.validate().is_err());
    p.kappa_0 = Some(mhz(0.8));
    assert!(p.validate().is_ok());
}

fn lind_cfg(n_th: f64, eps: f64, wd: f64) -> LindbladConfig {
    LindbladConfig {
        dim_cavity: 3,
        dim_transmon: 3,
        n_th_cavity: n_th,
        n_th_transmon: n_th,
        gamma_q: mhz(8.0),
        drive_amp: eps,
        drive_freq: wd,
    }
}

#[test]
fn lindblad_empty_cavity_lorentzian() {
    let p = DeviceParams::device1();
    let wq = ghz(8.0);
    let k = p.kappa_b;
    let eps = 1e-3 * k;
    let grid = [p.omega_c, p.omega_c + k / 2.0, p.omega_c - k / 2.0];
    let t = lindblad_transmission_at(p.omega_c, wq, 0.0, p.alpha_t, k, &lind_cfg(0.0, eps, 0.0), &grid).unwrap();
    assert!((t[0] - 1.0).abs() < 1e-5);
    assert!((t[1] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-5);
    assert!((t[2] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-5);
}

#[test]
fn lindblad_vacuum_without_drive() {
    let p = DeviceParams::device2();
    let cfg = lind_cfg(0.0, 0.0, p.omega_c);
    let rho = lindblad_steady_state(p.omega_c, p.omega_c, p.j, p.alpha_t, p.kappa_b, &cfg).unwrap();
    for i in 0..9 {
        for j in 0..9 {
            let want = if i == 0 && j == 0 { 1.0 } else { 0.0 };
            assert!((rho[(i, j)] - Complex64::new(want, 0.0)).norm() < 1e-10);
        }
    }
}

#[test]
fn lindblad_thermal_cavity_populations() {
    // Undriven, uncoupled cavity relaxes to a truncated thermal state with
    // detailed balance p(n+1)/p(n) = n_th/(n_th+1).
    let p = DeviceParams::device1();
    let cfg = lind_cfg(0.1, 0.0, p.omega_c);
    let rho = lindblad_steady_state(p.omega_c, ghz(8.0), 0.0, p.alpha_t, p.kappa_b, &cfg).unwrap();
    let pc = |n: usize| (0..3).map(|q| rho[(n * 3 + q, n * 3 + q)].re).sum::<f64>();
    let ratio = 0.1 / 1.1;
    assert!((pc(1) / pc(0) - ratio).abs() < 1e-9);
    assert!((pc(2) / pc(1) - ratio).abs() < 1e-9);
}

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn lindblad_density_matrix_axioms() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let wc = ghz(rng.random_range(5.0..6.0));
        let wq = wc + mhz(rng.random_range(-400.0..400.0));
        let j = mhz(rng.random_range(10.0..200.0));
        let alpha = mhz(rng.random_range(100.0..400.0));
        let k = mhz(rng.random_range(2.0..20.0));
        let cfg = LindbladConfig {
            dim_cavity: rng.random_range(2..=4),
            dim_transmon: rng.random_range(2..=4),
            n_th_cavity: rng.random_range(0.0..0.3),
            n_th_transmon: rng.random_range(0.0..0.3),
            gamma_q: mhz(rng.random_range(2.0..20.0)),
            drive_amp: mhz(rng.random_range(0.0..5.0)),
            drive_freq: wc + mhz(rng.random_range(-300.0..300.0)),
        };
        let rho = lindblad_steady_state(wc, wq, j, alpha, k, &cfg).unwrap();
        let tr = rho.trace();
        assert!((tr.re - 1.0).abs() < 1e-10 && tr.im.abs() < 1e-10);
        assert!((&rho - rho.adjoint()).iter().all(|z| z.norm() < 1e-12));
        for ev in hermitian_eigenvalues(&rho) {
            assert!(ev >= -1e-10, "{ev}");
        }
    }
}

#[test]
fn lindblad_dimension_limits() {
    let mut cfg = lind_cfg(0.0, 1.0, 0.0);
    cfg.dim_cavity = 5;
    cfg.dim_transmon = 4;
    assert!(cfg.validate().is_err());
    cfg.dim_cavity = 1;
    assert!(cfg.validate().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn rabi_splitting_equals_2j(j_mhz in 10.0..500.0f64, wc_ghz in 4.0..8.0f64, a_mhz in 100.0..400.0f64) {
        let (w, j) = (ghz(wc_ghz), mhz(j_mhz));
        let e = diagonalize(&build_hamiltonian_at(w, w, j, mhz(a_mhz))).unwrap().energies;
        prop_assert!(rel(e[2] - e[1], 2.0 * j) < 1e-3);
    }

    #[test]
    fn blocks_match_closed_forms(wq in 4.0..8.0f64, wc in 4.0..8.0f64, j in 0.0..0.5f64, a in 0.05..0.5f64) {
        let (wq, wc, j, a) = (ghz(wq), ghz(wc), ghz(j), ghz(a));
        let e = diagonalize(&build_hamiltonian_at(wq, wc, j, a)).unwrap().energies;
        let (l, u) = quad_oracle(wq, j, wc);
        prop_assert!(rel(e[1], l) < 1e-12 && rel(e[2], u) < 1e-12);
        let s = std::f64::consts::SQRT_2 * j;
        let c = cubic_oracle([[2.0 * wq - a, s, 0.0], [s, wq + wc, s], [0.0, s, 2.0 * wc]]);
        for k in 0..3 {
            prop_assert!(rel(e[3 + k], c[k]) < 1e-11);
        }
    }

    #[test]
    fn hamiltonian_symmetric(phi in -0.49..0.49f64, j in 1.0..300.0f64) {
        let mut p = DeviceParams::device2();
        p.j = mhz(j);
        let h = build_hamiltonian(&p, &FluxPoint::new(phi, 0.0));
        prop_assert_eq!(h, h.transpose());
    }

    #[test]
    fn hellmann_feynman_agrees(phi in 0.02..0.45f64, j in 20.0..250.0f64, a in 150.0..350.0f64) {
        let mut p = DeviceParams::device2();
        p.j = mhz(j);
        p.alpha_t = mhz(a);
        let hf = hellmann_feynman(&p, phi);
        let flux = FluxPoint::new(phi, 0.0);
        for (label, idx) in [(TransitionLabel::Minus, 1), (TransitionLabel::Plus, 2)] {
            let fd = flux_responsivity(&p, &flux, label).unwrap();
            prop_assert!(rel(fd, hf[idx]) < 1e-6, "{:?}: {} vs {}", label, fd, hf[idx]);
        }
        let fd = flux_responsivity(&p, &flux, TransitionLabel::PlusGamma).unwrap();
        prop_assert!(rel(fd, hf[5] - hf[2]) < 1e-6);
    }

    #[test]
    fn coupling_linear_in_field(phi in 0.05..0.45f64, b in 1e-3..0.05f64) {
        let p = DeviceParams::device1();
        for l in TransitionLabel::PRIMARY {
            let g1 = coupling_g(&p, &FluxPoint::new(phi, b), l).unwrap();
            let g2 = coupling_g(&p, &FluxPoint::new(phi, 2.0 * b), l).unwrap();
            prop_assert!((g2 - 2.0 * g1).abs() <= 1e-12 * g1.abs().max(1e-300));
        }
    }
}
