mod common;

use monodrift_core::framework::{
    admissible_report, audit_condition, fit_c_rho1, hemicontinuity_probe, self_consistent_eps0, thresholds, Condition,
    FrameworkConstants,
};
use monodrift_core::models::{build_linear, build_noise, build_ns_2d, NoiseParams};
use monodrift_core::spectral::{sample_state, GalerkinSpace, StateVec};
use monodrift_core::Error;

use common::*;

fn unit_constants() -> FrameworkConstants {
    FrameworkConstants {
        lambda1: 1.0,
        gamma0: 1.0,
        beta: 0.0,
        c_rho1: 1.0,
        c_rho2: 0.0,
        c_b: 1.0,
        l_b: 0.0,
        a0_sq: 0.0,
    }
}

#[test]
fn thresholds_on_unit_constants() {
    let t = unit_constants().thresholds_with(0.0);
    assert!(t.gamma_tilde0.abs() < 1e-12);
    // min(1/32, 2/18)
    assert!((t.eps_tilde - 0.03125).abs() < 1e-12);
    assert!(t.d1 && t.d2);
}

#[test]
fn delta_and_coercivity_constant() {
    let c = unit_constants();
    assert!((c.delta_eps(0.1).unwrap() - 0.4).abs() < 1e-12);
    assert!((c.delta_eps(0.0).unwrap() - 0.5).abs() < 1e-12);
    assert!((c.c_a_rho_eps(0.1).unwrap() - 0.1).abs() < 1e-12);
    assert_eq!(c.c_a_rho_eps(0.0).unwrap(), 0.0);
    let boundary = c.eps_cap();
    assert!((boundary - 0.5).abs() < 1e-15);
    assert!(matches!(c.delta_eps(boundary), Err(Error::Inadmissible { .. })));
}

#[test]
fn coercivity_constant_with_forcing() {
    // δ = 1/2 at ε = 0: max{1/(4δ), δ·(1/(4δ²))} = max{1/2, 1/2}
    let c = FrameworkConstants {
        a0_sq: 1.0,
        ..unit_constants()
    };
    assert!((c.c_a_rho_eps(0.0).unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn d1_fails_at_the_boundary() {
    let c = FrameworkConstants {
        c_rho2: 1.0,
        ..unit_constants()
    };
    assert!(!c.thresholds_with(0.0).d1);
}

#[test]
fn navier_stokes_satisfies_both_conditions() {
    for chi in [0.3, 1.0, 2.5] {
        let space = GalerkinSpace::fourier_2d(2, 1.0).unwrap();
        let noise = build_noise(&space, &additive(space.dim())).unwrap();
        let m = fitted(build_ns_2d(space, chi, noise, None).unwrap());
        let r = admissible_report(&m).unwrap();
        assert!(r.d1 && r.d2, "chi = {chi}");
        assert!(r.eps_tilde > 0.0);
        // the fitted reference intensity is a fixed point of the threshold map
        let again = thresholds(&m, r.eps0).unwrap();
        assert!((again.eps_tilde - r.eps0).abs() <= 1e-8 * r.eps0);
    }
}

#[test]
fn missing_c_rho1_is_reported() {
    let err = FrameworkConstants::from_model(&burgers()).unwrap_err();
    assert!(matches!(err, Error::MissingConstant(_)));
}

#[test]
fn condition_labels_round_trip() {
    for c in [Condition::A2, Condition::A3, Condition::A4, Condition::A5] {
        assert_eq!(c.to_string().parse::<Condition>().unwrap(), c);
    }
    assert!("A9".parse::<Condition>().is_err());
}

#[test]
fn linear_model_monotonicity_slack() {
    // declared γ₀ = 1/2 below the true rate 1: margin (2·1 − 2·½)‖d‖²_V ≥ 0
    let space = GalerkinSpace::sine_1d(5, 1.0).unwrap();
    let noise = build_noise(&space, &additive(3)).unwrap();
    let rates: Vec<f64> = space.weights().to_vec();
    let mut m = build_linear(space, rates, noise).unwrap();
    m.mono.gamma0 = 0.5;
    let r = audit_condition(&m, 0.1, Condition::A2, 2000, 2.0, 1).unwrap();
    assert!(r.worst_margin >= 0.0);
}

#[test]
fn presets_pass_every_audit() {
    for (m, eps) in presets_at_half_threshold() {
        for c in [Condition::A2, Condition::A3, Condition::A4, Condition::A5] {
            let r = audit_condition(&m, eps, c, 10_000, 2.0, AUDIT_SEED).unwrap();
            assert!(r.passed(1e-9), "{} {c}: {}", m.name, r.worst_margin);
        }
    }
}

#[test]
fn decaying_noise_boundedness_with_unit_constant() {
    let space = GalerkinSpace::fourier_2d(2, 1.0).unwrap();
    let noise = build_noise(
        &space,
        &NoiseParams::DecayingMult {
            sigma0: 1.0,
            columns: vec![(0, 1.0)],
        },
    )
    .unwrap();
    assert_eq!(noise.constants().c_b, 1.0);
    let m = fitted(build_ns_2d(space, 1.0, noise, None).unwrap());
    let r = audit_condition(&m, 0.5 * m.eps_cap(), Condition::A4, 10_000, 2.0, 3).unwrap();
    assert!(r.worst_margin >= 0.0);
}

#[test]
fn longer_audits_never_raise_the_worst_margin() {
    let m = fitted(burgers());
    let mut last = f64::INFINITY;
    for n in [100, 1000, 5000] {
        let r = audit_condition(&m, 0.005, Condition::A2, n, 2.0, 17).unwrap();
        assert!(r.worst_margin <= last);
        last = r.worst_margin;
    }
}

#[test]
fn fitted_constant_covers_its_samples() {
    let m = burgers();
    let fit = fit_c_rho1(&m, m.eps_cap(), 5000, 4.0, 8).unwrap();
    let m = m.with_c_rho1(fit.c_rho1);
    let r = audit_condition(&m, m.eps_cap(), Condition::A2, 5000, 4.0, 8).unwrap();
    assert!(r.passed(1e-9), "{}", r.worst_margin);
}

#[test]
fn audit_requires_c_rho1() {
    assert!(audit_condition(&burgers(), 0.01, Condition::A2, 10, 1.0, 0).is_err());
}

fn third_differences(y: &[f64]) -> f64 {
    y.windows(4)
        .map(|w| (w[3] - 3.0 * w[2] + 3.0 * w[1] - w[0]).abs())
        .fold(0.0, f64::max)
}

#[test]
fn hemicontinuity_shapes() {
    let s: Vec<f64> = (0..9).map(|i| i as f64 * 0.25).collect();
    let lin = ou(1.0);
    let y = hemicontinuity_probe(
        &lin,
        0.1,
        &StateVec(vec![0.3]),
        &StateVec(vec![1.0]),
        &StateVec(vec![0.7]),
        &s,
    )
    .unwrap();
    let second = y
        .windows(3)
        .map(|w| (w[2] - 2.0 * w[1] + w[0]).abs())
        .fold(0.0, f64::max);
    assert!(second < 1e-12);

    let b = burgers();
    let (v1, v2, v) = (
        sample_state(&b.space, 1.0, 1),
        sample_state(&b.space, 1.0, 2),
        sample_state(&b.space, 1.0, 3),
    );
    let y = hemicontinuity_probe(&b, 0.0, &v1, &v2, &v, &s).unwrap();
    assert!(third_differences(&y) < 1e-10);

    let y = hemicontinuity_probe(&b, 0.0, &v1, &b.space.zero(), &v, &s).unwrap();
    assert!(y.iter().all(|x| *x == y[0]));
}

#[test]
fn self_consistent_threshold_is_below_the_cap() {
    for (m, half) in presets_at_half_threshold() {
        let eps0 = self_consistent_eps0(&m).unwrap();
        assert!((2.0 * half - eps0).abs() < 1e-15);
        assert!(eps0 < m.eps_cap());
    }
}
