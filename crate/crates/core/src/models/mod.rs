//! Concrete drift and noise operators with their declared constants.
//!
//! Presets cover a linear (Ornstein–Uhlenbeck) test model, viscous Burgers,
//! general semilinear reaction–transport equations including
//! Ginzburg–Landau, and 2D Navier–Stokes on the torus with optional
//! Kraichnan transport noise. The constants a preset declares are claims;
//! [`crate::framework`] audits them.

mod drift;
mod noise;
pub(crate) mod tensor;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

pub use drift::{Drift, ReactionSpec};
pub use noise::{build_noise, Modulation, NoiseConstants, NoiseParams, NoiseSpec};

use crate::error::{check_dim, Error, Result};
use crate::spectral::{inv_weighted_sq, DualVec, GalerkinSpace, StateVec};
use drift::Reaction;

/// Constants of the local monotonicity condition with
/// `ρ(v) = C_{ρ1}(1 + ‖v‖^β_H)‖v‖²_V + C_{ρ2}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityConstants {
    pub gamma0: f64,
    /// `None` until declared or fitted.
    pub c_rho1: Option<f64>,
    pub c_rho2: f64,
    pub beta: f64,
}

/// Drift growth constants: `‖A^ε(v)‖²_{V*} ≤ C_A(1+‖v‖²_V)(1+‖v‖^κ_H)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthConstants {
    pub c_a: f64,
    pub kappa: f64,
}

/// Transport fields `σ_j = amplitude · e_mode` for Kraichnan noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KraichnanSpec {
    pub fields: Vec<(usize, f64)>,
}

/// A model: space, drift, noise and declared constants.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub name: String,
    pub space: GalerkinSpace,
    pub drift: Drift,
    pub noise: NoiseSpec,
    pub mono: MonotonicityConstants,
    pub growth: GrowthConstants,
    /// `‖A^ε(0)‖_{V*}`, which does not depend on `ε` for the presets.
    pub a0_dual_norm: f64,
}

impl ModelSpec {
    fn assemble(
        name: &str,
        space: GalerkinSpace,
        drift: Drift,
        noise: NoiseSpec,
        mono: MonotonicityConstants,
        kappa: f64,
    ) -> Result<Self> {
        if !(mono.gamma0 > 0.0 && mono.gamma0.is_finite()) {
            return Err(Error::Configuration(format!(
                "gamma0 = {} must be positive",
                mono.gamma0
            )));
        }
        let mut model = ModelSpec {
            name: name.to_string(),
            space,
            drift,
            noise,
            mono,
            growth: GrowthConstants { c_a: 0.0, kappa },
            a0_dual_norm: 0.0,
        };
        model.a0_dual_norm = match &model.drift.forcing {
            Some(f) => inv_weighted_sq(model.space.weights(), f).sqrt(),
            None => 0.0,
        };
        model.growth.c_a = declared_growth(&model)?;
        Ok(model)
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn noise_consts(&self) -> NoiseConstants {
        self.noise.constants()
    }

    /// `A^ε(x)`.
    pub fn drift(&self, eps: f64, x: &StateVec) -> Result<DualVec> {
        check_dim(self.dim(), x.len())?;
        let mut out = vec![0.0; self.dim()];
        self.drift.eval_into(eps, &x.0, &mut out);
        Ok(DualVec(out))
    }

    /// `B(x)` as an `N × K` array.
    pub fn noise_matrix(&self, x: &StateVec) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), x.len())?;
        Ok(self.noise.matrix(&x.0))
    }

    /// Upper end of the noise intensities for which `δ(ε) > 0`.
    pub fn eps_cap(&self) -> f64 {
        let nc = self.noise_consts();
        let l1 = self.space.lambda1();
        (l1 * self.mono.gamma0 - self.mono.c_rho2) / (2.0 * nc.c_b + l1 * nc.l_b)
    }

    /// Replaces `C_{ρ1}`, e.g. by a fitted value.
    pub fn with_c_rho1(mut self, c_rho1: f64) -> Self {
        self.mono.c_rho1 = Some(c_rho1);
        self
    }

    /// Adds a constant forcing term to the drift.
    pub fn with_forcing(self, forcing: DualVec) -> Result<Self> {
        check_dim(self.dim(), forcing.0.len())?;
        let mut drift = self.drift;
        drift.forcing = Some(forcing.0);
        ModelSpec::assemble(&self.name, self.space, drift, self.noise, self.mono, self.growth.kappa)
    }
}

fn mono_gamma(chi: f64, noise: &NoiseSpec) -> f64 {
    if noise.base_is_additive() {
        chi / 2.0
    } else {
        chi / 4.0
    }
}

fn require_beta_zero(noise: &NoiseSpec, model: &str) -> Result<()> {
    if noise.beta() != 0.0 {
        return Err(Error::Configuration(format!(
            "{model} is declared with beta = 0 but the {} noise needs beta = {}",
            noise.kind(),
            noise.beta()
        )));
    }
    Ok(())
}

fn check_chi(chi: f64) -> Result<()> {
    if !(chi > 0.0 && chi.is_finite()) {
        return Err(Error::Configuration(format!("viscosity chi = {chi} must be positive")));
    }
    Ok(())
}

/// Linear model `A(x)_k = −r_k x_k`, the multi-mode Ornstein–Uhlenbeck process.
///
/// Declares the exact rate `γ₀ = min_k r_k/w_k` (halved for multiplicative
/// noise), `C_{ρ1} = C_{ρ2} = 0` and `κ = 0`.
pub fn build_linear(space: GalerkinSpace, rates: Vec<f64>, noise: NoiseSpec) -> Result<ModelSpec> {
    check_dim(space.dim(), rates.len())?;
    if rates.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::Configuration("linear rates must be positive".into()));
    }
    let mut gamma0 = rates
        .iter()
        .zip(space.weights())
        .map(|(r, w)| r / w)
        .fold(f64::INFINITY, f64::min);
    if !noise.base_is_additive() {
        gamma0 /= 2.0;
    }
    let mono = MonotonicityConstants {
        gamma0,
        c_rho1: Some(0.0),
        c_rho2: 0.0,
        beta: noise.beta(),
    };
    ModelSpec::assemble("linear", space, Drift::linear(rates), noise, mono, 0.0)
}

/// Viscous Burgers `χ ∂ₓₓX + X ∂ₓX` on `(0, π)` with Dirichlet sine modes.
pub fn build_burgers_1d(space: GalerkinSpace, chi: f64, noise: NoiseSpec) -> Result<ModelSpec> {
    check_chi(chi)?;
    require_beta_zero(&noise, "burgers1d")?;
    if !space.is_sine() {
        return Err(Error::Configuration("burgers1d needs a 1D sine space".into()));
    }
    let mut drift = Drift::linear(space.weights().iter().map(|w| chi * w).collect());
    drift.quad = tensor::sine_convection(&space)?;
    let mono = MonotonicityConstants {
        gamma0: mono_gamma(chi, &noise),
        c_rho1: None,
        c_rho2: 0.0,
        beta: 0.0,
    };
    ModelSpec::assemble("burgers1d", space, drift, noise, mono, 4.0)
}

/// Semilinear equation `χ ∂ₓₓX + c_f X ∂ₓX + g(X)` on `(0, π)`.
///
/// Declares `C_{ρ2} = 2 C_g` with `C_g` the one-sided constant of `g`.
pub fn build_semilinear_1d(
    space: GalerkinSpace,
    chi: f64,
    transport: f64,
    g: ReactionSpec,
    noise: NoiseSpec,
) -> Result<ModelSpec> {
    build_reaction_model("semilinear1d", space, chi, transport, g, noise)
}

/// Ginzburg–Landau preset `g(u) = −α u − c u³`.
pub fn build_gl_1d(space: GalerkinSpace, chi: f64, alpha: f64, c: f64, noise: NoiseSpec) -> Result<ModelSpec> {
    if c < 0.0 {
        return Err(Error::Configuration("Ginzburg–Landau needs c ≥ 0".into()));
    }
    let g = ReactionSpec::Polynomial {
        coeffs: vec![-alpha, 0.0, -c],
    };
    build_reaction_model("gl1d", space, chi, 0.0, g, noise)
}

fn build_reaction_model(
    name: &str,
    space: GalerkinSpace,
    chi: f64,
    transport: f64,
    g: ReactionSpec,
    noise: NoiseSpec,
) -> Result<ModelSpec> {
    check_chi(chi)?;
    require_beta_zero(&noise, name)?;
    if !space.is_sine() {
        return Err(Error::Configuration(format!("{name} needs a 1D sine space")));
    }
    if !transport.is_finite() {
        return Err(Error::Configuration("transport coefficient must be finite".into()));
    }
    let c_g = g.one_sided_constant()?;
    let mut drift = Drift::linear(space.weights().iter().map(|w| chi * w).collect());
    if transport != 0.0 {
        drift.quad = tensor::sine_convection(&space)?
            .into_iter()
            .map(|(a, b, c, t)| (a, b, c, transport * t))
            .collect();
    }
    if g.degree() > 0 {
        drift.reaction = Some(Reaction::new(&space, g)?);
    }
    let mono = MonotonicityConstants {
        gamma0: mono_gamma(chi, &noise),
        c_rho1: None,
        c_rho2: 2.0 * c_g,
        beta: 0.0,
    };
    ModelSpec::assemble(name, space, drift, noise, mono, 4.0)
}

/// 2D Navier–Stokes `−χ A u − Π((u·∇)u)` on divergence-free Fourier modes.
///
/// With Kraichnan fields the noise gains transport columns `Π(σ_j·∇u)` and the
/// drift gains the correction `(ε/2) Σ_j Π(σ_j·∇Π(σ_j·∇u))`.
pub fn build_ns_2d(
    space: GalerkinSpace,
    chi: f64,
    noise: NoiseSpec,
    kraichnan: Option<&KraichnanSpec>,
) -> Result<ModelSpec> {
    check_chi(chi)?;
    if !space.is_fourier() {
        return Err(Error::Configuration("ns2d needs divergence-free Fourier modes".into()));
    }
    let mut noise = noise;
    if let Some(k) = kraichnan {
        if !noise.transport().is_empty() {
            return Err(Error::Configuration("noise already carries transport columns".into()));
        }
        noise.add_transport(&space, &k.fields)?;
    }
    let mut drift = Drift::linear(space.weights().iter().map(|w| chi * w).collect());
    drift.quad = tensor::fourier_convection(&space)?
        .into_iter()
        .map(|(a, b, c, t)| (a, b, c, -t))
        .collect();
    drift.strat = noise.transport_square_sum();
    let mono = MonotonicityConstants {
        gamma0: mono_gamma(chi, &noise),
        c_rho1: None,
        c_rho2: 0.0,
        beta: noise.beta(),
    };
    ModelSpec::assemble("ns2d", space, drift, noise, mono, 2.0)
}

/// Rigorous growth constant for the finite-dimensional drift.
///
/// Bounds `‖A^ε(x)‖_{V*} ≤ c₀ + ‖x‖_V (b₁ + b₂ r + b₃ r²)` with `r = ‖x‖_H`,
/// using `‖x‖²_H ≤ ‖x‖_H ‖x‖_V/√λ₁`, Frobenius norms of the quadratic
/// coefficients, Bessel's inequality for the quadrature-projected reaction and
/// `‖u‖_∞ ≤ √(2N/π) ‖x‖_H` for sine series, then squares.
fn declared_growth(model: &ModelSpec) -> Result<f64> {
    let space = &model.space;
    let w = space.weights();
    let n = space.dim();
    let l1 = space.lambda1();
    let drift = &model.drift;
    let eps_cap = model.eps_cap().max(0.0);

    let c0 = model.a0_dual_norm;
    let c_lin = drift.diag.iter().zip(w).map(|(d, w)| d.abs() / w).fold(0.0, f64::max);

    let mut frob = vec![0.0; n];
    for &(a, _, _, t) in &drift.quad {
        frob[a as usize] += t * t;
    }
    let c_q = frob.iter().zip(w).map(|(f, w)| f / w).sum::<f64>().sqrt();

    let s_strat = match &drift.strat {
        Some(s) => {
            let scaled = DMatrix::from_fn(n, n, |i, j| s[(i, j)] / (w[i] * w[j]).sqrt());
            SymmetricEigen::new(scaled)
                .eigenvalues
                .iter()
                .map(|e| e.abs())
                .fold(0.0, f64::max)
        }
        None => 0.0,
    };

    let [g1, g2, g3] = drift.reaction_spec().map_or([0.0; 3], |g| g.growth_coeffs());
    let sup = (2.0 * n as f64 / std::f64::consts::PI).sqrt();

    let b1 = c_lin + 0.5 * eps_cap * s_strat + g1 / l1;
    let b2 = c_q / l1.sqrt() + g2 * sup / l1;
    let b3 = g3 * sup * sup / l1;

    let terms = [c0, b1, b2, b3];
    let m = terms.iter().filter(|t| **t > 0.0).count().max(1) as f64;
    let bmax = terms.iter().fold(0.0f64, |a, t| a.max(t * t));
    let p = if b3 > 0.0 {
        2
    } else if b2 > 0.0 {
        1
    } else {
        0
    };
    let kappa = model.growth.kappa;
    let poly = if p == 0 {
        1.0
    } else if kappa == 2.0 * p as f64 {
        (p + 1) as f64
    } else if kappa > 2.0 * p as f64 {
        2.0 * (p + 1) as f64
    } else {
        return Err(Error::UnsupportedGrowth(format!(
            "drift grows like |x|^{} but the declared kappa is {kappa}",
            2 * p
        )));
    };
    let c_a = (m * bmax * poly).max(0.25 * s_strat * s_strat);
    if !(c_a > 0.0 && c_a.is_finite()) {
        return Err(Error::InvalidParameter("could not bound the drift growth".into()));
    }
    Ok(c_a)
}
