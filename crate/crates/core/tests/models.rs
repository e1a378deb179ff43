mod common;

use std::f64::consts::PI;

use monodrift_core::models::{
    build_burgers_1d, build_noise, build_ns_2d, build_semilinear_1d, KraichnanSpec, NoiseParams, ReactionSpec,
};
use monodrift_core::spectral::{
    dual_pair, h_norm_sq, sample_state, v_norm_sq, vstar_norm_sq, GalerkinSpace, ModeLabel, StateVec,
};
use monodrift_core::Error;

use common::*;

/// Midpoint rule on 512 nodes of `(0, π)`; exact for the trigonometric degrees involved.
fn quadrature(space: &GalerkinSpace, x: &StateVec, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let nodes = 512;
    let h = PI / nodes as f64;
    let ks: Vec<f64> = space
        .labels()
        .iter()
        .map(|l| match l {
            ModeLabel::Sine { k } => *k as f64,
            _ => unreachable!(),
        })
        .collect();
    let c = (2.0 / PI).sqrt();
    let mut out = vec![0.0; ks.len()];
    for j in 0..nodes {
        let s = (j as f64 + 0.5) * h;
        let u: f64 = ks.iter().zip(&x.0).map(|(k, a)| a * c * (k * s).sin()).sum();
        let ux: f64 = ks.iter().zip(&x.0).map(|(k, a)| a * c * k * (k * s).cos()).sum();
        let val = f(u, ux);
        for (o, k) in out.iter_mut().zip(&ks) {
            *o += h * val * c * (k * s).sin();
        }
    }
    out
}

fn nonlinear_part(model: &monodrift_core::models::ModelSpec, x: &StateVec) -> Vec<f64> {
    let a = model.drift(0.0, x).unwrap();
    a.0.iter()
        .zip(model.drift.dissipation())
        .zip(&x.0)
        .map(|((a, d), x)| a + d * x)
        .collect()
}

#[test]
fn burgers_first_mode_feeds_second_mode() {
    let m = burgers();
    let x = m.space.mode(0, 1.0).unwrap();
    let a = m.drift(0.0, &x).unwrap();
    assert!((a.0[0] + 1.0).abs() < 1e-14, "linear part on the first mode");
    let oracle = quadrature(&m.space, &x, |u, ux| u * ux);
    assert!((a.0[1] - oracle[1]).abs() < 1e-12);
    assert!((oracle[1] - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-12);
}

#[test]
fn burgers_convection_matches_quadrature_on_random_states() {
    let m = burgers();
    for seed in 0..20 {
        let x = sample_state(&m.space, 3.0, seed);
        let oracle = quadrature(&m.space, &x, |u, ux| u * ux);
        for (got, want) in nonlinear_part(&m, &x).iter().zip(&oracle) {
            assert!((got - want).abs() < 1e-11, "{got} vs {want}");
        }
    }
}

#[test]
fn cubic_reaction_matches_quadrature() {
    let space = GalerkinSpace::sine_1d(8, 1.0).unwrap();
    let noise = build_noise(&space, &additive(2)).unwrap();
    let g = ReactionSpec::Polynomial {
        coeffs: vec![0.0, 0.0, -1.0],
    };
    let m = build_semilinear_1d(space, 1.0, 0.0, g, noise).unwrap();
    let single = m.space.mode(0, 1.3).unwrap();
    let oracle = quadrature(&m.space, &single, |u, _| -u * u * u);
    for (got, want) in nonlinear_part(&m, &single).iter().zip(&oracle) {
        assert!((got - want).abs() < 1e-12);
    }
    let x = sample_state(&m.space, 2.0, 5);
    let oracle = quadrature(&m.space, &x, |u, _| -u * u * u);
    for (got, want) in nonlinear_part(&m, &x).iter().zip(&oracle) {
        assert!((got - want).abs() < 1e-11);
    }
}

#[test]
fn drift_vanishes_at_zero() {
    for m in [burgers(), gl(), ns_additive(), ns_decaying(), ou(1.0)] {
        let a = m.drift(0.01, &m.space.zero()).unwrap();
        assert!(a.0.iter().all(|v| *v == 0.0), "{}", m.name);
    }
}

#[test]
fn declared_constants_of_presets() {
    let b = burgers();
    assert_eq!(
        (b.mono.gamma0, b.mono.c_rho2, b.mono.beta, b.growth.kappa),
        (0.5, 0.0, 0.0, 4.0)
    );
    let n = ns_additive();
    assert_eq!(
        (n.mono.gamma0, n.mono.c_rho2, n.mono.beta, n.growth.kappa),
        (0.5, 0.0, 0.0, 2.0)
    );

    let space = GalerkinSpace::fourier_2d(2, 1.0).unwrap();
    let noise = build_noise(
        &space,
        &NoiseParams::BoundedMult {
            sigma0: 1.0,
            theta: 0.5,
            columns: vec![(0, 1.0)],
        },
    )
    .unwrap();
    let chi = 0.8;
    let mult = build_ns_2d(space, chi, noise, None).unwrap();
    assert_eq!(
        (mult.mono.gamma0, mult.mono.c_rho2, mult.mono.beta),
        (chi / 4.0, 0.0, 0.0)
    );
}

#[test]
fn linear_damping_reaction_has_no_one_sided_constant() {
    let space = GalerkinSpace::sine_1d(6, 1.0).unwrap();
    let noise = build_noise(&space, &additive(2)).unwrap();
    let g = ReactionSpec::Polynomial { coeffs: vec![-0.7] };
    let m = build_semilinear_1d(space, 1.0, 1.0, g, noise).unwrap();
    assert_eq!(m.mono.c_rho2, 0.0);
    assert_eq!(m.mono.gamma0, 0.5);
}

#[test]
fn quartic_reaction_is_rejected() {
    let space = GalerkinSpace::sine_1d(6, 1.0).unwrap();
    let noise = build_noise(&space, &additive(2)).unwrap();
    let g = ReactionSpec::Polynomial {
        coeffs: vec![0.0, 0.0, 0.0, -1.0],
    };
    let err = build_semilinear_1d(space, 1.0, 0.0, g, noise).unwrap_err();
    assert!(matches!(err, Error::UnsupportedGrowth(_)), "{err}");
}

#[test]
fn burgers_rejects_decaying_noise() {
    let space = GalerkinSpace::sine_1d(6, 1.0).unwrap();
    let noise = build_noise(
        &space,
        &NoiseParams::DecayingMult {
            sigma0: 1.0,
            columns: vec![(0, 1.0)],
        },
    )
    .unwrap();
    assert!(matches!(
        build_burgers_1d(space, 1.0, noise),
        Err(Error::Configuration(_))
    ));
}

#[test]
fn ns_needs_fourier_modes() {
    let space = GalerkinSpace::sine_1d(6, 1.0).unwrap();
    let noise = build_noise(&space, &additive(2)).unwrap();
    assert!(matches!(
        build_ns_2d(space, 1.0, noise, None),
        Err(Error::Configuration(_))
    ));
}

#[test]
fn additive_unit_columns_constants() {
    let space = GalerkinSpace::sine_1d(8, 1.0).unwrap();
    for k in 1..=5 {
        let noise = build_noise(&space, &additive(k)).unwrap();
        let c = noise.constants();
        assert_eq!((c.c_b, c.l_b, noise.beta(), c.u_dim), (k as f64, 0.0, 0.0, k));
    }
}

#[test]
fn ns_convection_conserves_energy() {
    let m = ns_additive();
    for seed in 0..100 {
        let u = sample_state(&m.space, 5.0, seed);
        let a = m.drift(0.0, &u).unwrap();
        // the linear part contributes −χ‖u‖²_V
        let energy = dual_pair(&m.space, &a, &u).unwrap() + v_norm_sq(&m.space, &u).unwrap();
        assert!(energy.abs() < 1e-10, "seed {seed}: {energy}");
    }
}

fn kraichnan_model() -> monodrift_core::models::ModelSpec {
    let space = GalerkinSpace::fourier_2d(2, 1.0).unwrap();
    let noise = build_noise(&space, &additive(2)).unwrap();
    let k = KraichnanSpec {
        fields: vec![(0, 0.3), (3, 0.2), (5, 0.1)],
    };
    build_ns_2d(space, 1.0, noise, Some(&k)).unwrap()
}

#[test]
fn kraichnan_transport_is_skew() {
    let m = kraichnan_model();
    assert_eq!(m.noise.u_dim(), 5);
    for seed in 0..100 {
        let v = sample_state(&m.space, 3.0, seed);
        let b = m.noise_matrix(&v).unwrap();
        for j in 2..5 {
            let inner: f64 = (0..m.dim()).map(|i| v.0[i] * b[(i, j)]).sum();
            assert!(inner.abs() < 1e-10, "field {j}: {inner}");
        }
    }
}

#[test]
fn stratonovich_correction_is_linear_in_eps() {
    let m = kraichnan_model();
    let v = sample_state(&m.space, 2.0, 9);
    let a0 = m.drift(0.0, &v).unwrap();
    let gap = |eps: f64| {
        let a = m.drift(eps, &v).unwrap();
        let d = monodrift_core::spectral::DualVec(a.0.iter().zip(&a0.0).map(|(x, y)| x - y).collect());
        vstar_norm_sq(&m.space, &d).unwrap().sqrt()
    };
    let (g1, g2, g3) = (gap(1e-1), gap(1e-2), gap(1e-3));
    assert!(g1 > 0.0);
    assert!((g1 / g2 - 10.0).abs() < 1e-8);
    assert!((g2 / g3 - 10.0).abs() < 1e-8);
}

#[test]
fn drift_growth_bound_holds_on_random_states() {
    for m in [burgers(), gl(), ns_additive(), ns_decaying(), kraichnan_model()] {
        let eps = 0.99 * m.eps_cap();
        for seed in 0..10_000u64 {
            let radius = 0.1 * (1 + seed % 100) as f64;
            let v = sample_state(&m.space, radius, seed);
            let a = m.drift(eps, &v).unwrap();
            let lhs = vstar_norm_sq(&m.space, &a).unwrap();
            let h = h_norm_sq(&m.space, &v).unwrap().sqrt();
            let rhs = m.growth.c_a * (1.0 + v_norm_sq(&m.space, &v).unwrap()) * (1.0 + h.powf(m.growth.kappa));
            assert!(lhs <= rhs * (1.0 + 1e-9), "{} seed {seed}: {lhs} > {rhs}", m.name);
        }
    }
}

#[test]
fn noise_lipschitz_line_holds() {
    let space = GalerkinSpace::fourier_2d(2, 1.0).unwrap();
    let bounded = {
        let n = build_noise(
            &space,
            &NoiseParams::BoundedMult {
                sigma0: 1.0,
                theta: 0.5,
                columns: NoiseParams::unit_columns(3),
            },
        )
        .unwrap();
        build_ns_2d(space.clone(), 1.0, n, None).unwrap()
    };
    for m in [bounded, ns_decaying(), kraichnan_model()] {
        let c = m.noise_consts();
        for seed in 0..2000u64 {
            let v1 = sample_state(&m.space, 3.0, 2 * seed);
            let v2 = sample_state(&m.space, 3.0, 2 * seed + 1);
            let b = m.noise_matrix(&v1).unwrap() - m.noise_matrix(&v2).unwrap();
            let d = StateVec(v1.0.iter().zip(&v2.0).map(|(a, b)| a - b).collect());
            let rhs = c.c_b * h_norm_sq(&m.space, &d).unwrap() + c.l_b * v_norm_sq(&m.space, &d).unwrap();
            assert!(b.norm_squared() <= rhs * (1.0 + 1e-9), "{} seed {seed}", m.name);
        }
    }
}
