#![allow(dead_code)]

use monodrift_core::framework::{self_consistent_eps0, with_fitted_c_rho1};
use monodrift_core::models::{
    build_burgers_1d, build_gl_1d, build_linear, build_noise, build_ns_2d, ModelSpec, NoiseParams,
};
use monodrift_core::spectral::GalerkinSpace;

pub const AUDIT_SEED: u64 = 2024;

pub fn additive(k: usize) -> NoiseParams {
    NoiseParams::Additive {
        columns: NoiseParams::unit_columns(k),
    }
}

pub fn burgers() -> ModelSpec {
    let space = GalerkinSpace::sine_1d(16, 1.0).unwrap();
    let noise = build_noise(&space, &additive(4)).unwrap();
    build_burgers_1d(space, 1.0, noise).unwrap()
}

pub fn gl() -> ModelSpec {
    let space = GalerkinSpace::sine_1d(16, 1.0).unwrap();
    let noise = build_noise(&space, &additive(4)).unwrap();
    build_gl_1d(space, 1.0, 1.0, 1.0, noise).unwrap()
}

pub fn ns_additive() -> ModelSpec {
    let space = GalerkinSpace::fourier_2d(2, 1.0).unwrap();
    let k = space.dim();
    let noise = build_noise(&space, &additive(k)).unwrap();
    build_ns_2d(space, 1.0, noise, None).unwrap()
}

pub fn ns_decaying() -> ModelSpec {
    let space = GalerkinSpace::fourier_2d(2, 1.0).unwrap();
    let noise = build_noise(
        &space,
        &NoiseParams::DecayingMult {
            sigma0: 1.0,
            columns: NoiseParams::unit_columns(4),
        },
    )
    .unwrap();
    build_ns_2d(space, 1.0, noise, None).unwrap()
}

/// Single Ornstein–Uhlenbeck mode `dx = −a x dt + √ε dW`.
pub fn ou(a: f64) -> ModelSpec {
    let space = GalerkinSpace::from_weights(vec![1.0]).unwrap();
    let noise = build_noise(&space, &additive(1)).unwrap();
    build_linear(space, vec![a], noise).unwrap()
}

pub fn fitted(model: ModelSpec) -> ModelSpec {
    with_fitted_c_rho1(model, 10_000, 2.0, AUDIT_SEED).unwrap().0
}

/// Fitted presets paired with half their self-consistent threshold.
pub fn presets_at_half_threshold() -> Vec<(ModelSpec, f64)> {
    [burgers(), gl(), ns_additive(), ns_decaying()]
        .into_iter()
        .map(|m| {
            let m = fitted(m);
            let eps0 = self_consistent_eps0(&m).unwrap();
            (m, 0.5 * eps0)
        })
        .collect()
}
