//! Derived constants, well-posedness thresholds and empirical audits of the
//! structural conditions.
//!
//! The conditions, for `d = v₁ − v₂`:
//!
//! * local monotonicity (`A2`):
//!   `2⟨A^ε(v₁)−A^ε(v₂), d⟩ + ε‖B(v₁)−B(v₂)‖²₂ ≤ −2γ₀‖d‖²_V + ρ(v₁)‖d‖²_H`
//!   with `ρ(v) = C_{ρ1}(1+‖v‖^β_H)‖v‖²_V + C_{ρ2}`;
//! * growth (`A3`): `‖B(v)‖²₂ ≤ C_B(1+‖v‖²_H) + L_B‖v‖²_V`,
//!   `‖B(v₁)−B(v₂)‖²₂ ≤ C_B‖d‖²_H + L_B‖d‖²_V`,
//!   `‖A^ε(v)‖²_{V*} ≤ C_A(1+‖v‖²_V)(1+‖v‖^κ_H)` and
//!   `‖A^ε(v)−A⁰(v)‖²_{V*} ≤ C_A ε²(1+‖v‖²_V)(1+‖v‖^κ_H)`;
//! * noise boundedness (`A4`): `max{1,‖v‖^β_H} Σ_k ⟨v, B(v)𝒰_k⟩² ≤ C_B‖v‖²_H` and
//!   `Σ_k ⟨d, (B(v₁)−B(v₂))𝒰_k⟩² ≤ C_B‖d‖⁴_H`;
//! * coercivity (`A5`):
//!   `max{1,‖v‖^β_H}(2⟨A^ε(v),v⟩ + ε‖B(v)‖²₂ + γ₀‖v‖²_V) ≤ C_{A,ρ,ε}`.
//!
//! Audits sample states with uniform direction and uniform `H`-radius; sample
//! `i` is drawn from a generator seeded by `derive_seed(seed, i)`, so every
//! witness is reproducible and longer audits extend shorter ones.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::models::ModelSpec;
use crate::rng::derive_seed;
use crate::spectral::{diff, dot, inv_weighted_sq, sample_state_with, sq, weighted_sq, DualVec, StateVec};

/// Scalar constants entering the derived quantities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameworkConstants {
    pub lambda1: f64,
    pub gamma0: f64,
    pub beta: f64,
    pub c_rho1: f64,
    pub c_rho2: f64,
    pub c_b: f64,
    pub l_b: f64,
    /// `sup_ε ‖A^ε(0)‖²_{V*}`.
    pub a0_sq: f64,
}

impl FrameworkConstants {
    /// Constants declared by a model; an undeclared `C_{ρ1}` is reported as missing.
    pub fn from_model(model: &ModelSpec) -> Result<Self> {
        let c_rho1 = model
            .mono
            .c_rho1
            .ok_or_else(|| Error::MissingConstant(model.name.clone()))?;
        Ok(Self::from_model_with(model, c_rho1))
    }

    fn from_model_with(model: &ModelSpec, c_rho1: f64) -> Self {
        let nc = model.noise_consts();
        FrameworkConstants {
            lambda1: model.space.lambda1(),
            gamma0: model.mono.gamma0,
            beta: model.mono.beta,
            c_rho1,
            c_rho2: model.mono.c_rho2,
            c_b: nc.c_b,
            l_b: nc.l_b,
            a0_sq: model.a0_dual_norm * model.a0_dual_norm,
        }
    }

    /// Largest `ε` with `δ(ε) > 0`.
    pub fn eps_cap(&self) -> f64 {
        (self.lambda1 * self.gamma0 - self.c_rho2) / (2.0 * self.c_b + self.lambda1 * self.l_b)
    }

    /// `δ(ε) = (λ₁γ₀ − C_{ρ2} − 2εC_B − ελ₁L_B)/(2λ₁)`.
    pub fn delta_eps(&self, eps: f64) -> Result<f64> {
        if !(eps >= 0.0) {
            return Err(Error::InvalidParameter(format!("eps = {eps} must be nonnegative")));
        }
        let d = (self.lambda1 * self.gamma0 - self.c_rho2 - 2.0 * eps * self.c_b - eps * self.lambda1 * self.l_b)
            / (2.0 * self.lambda1);
        if d <= 0.0 {
            return Err(Error::Inadmissible {
                eps,
                bound: self.eps_cap(),
            });
        }
        Ok(d)
    }

    /// `C_β = (2/(2+β))(β/(λ₁(2+β)))^{β/2}` for `β > 0`, and 1 for `β = 0`.
    pub fn c_beta(&self) -> f64 {
        let b = self.beta;
        if b == 0.0 {
            1.0
        } else {
            (2.0 / (2.0 + b)) * (b / (self.lambda1 * (2.0 + b))).powf(b / 2.0)
        }
    }

    /// `C_{A,ρ,ε} = max{a/(4δ), C_β δ (a/(4δ²))^{1+β/2}} + εC_B` with `a = ‖A^ε(0)‖²_{V*}`.
    pub fn c_a_rho_eps(&self, eps: f64) -> Result<f64> {
        let d = self.delta_eps(eps)?;
        let a = self.a0_sq;
        let first = a / (4.0 * d);
        let second = self.c_beta() * d * (a / (4.0 * d * d)).powf(1.0 + self.beta / 2.0);
        Ok(first.max(second) + eps * self.c_b)
    }

    /// Thresholds for a given coercivity constant `C_{A,ρ}`.
    pub fn thresholds_with(&self, c_a_rho: f64) -> Thresholds {
        let (l1, g0, b) = (self.lambda1, self.gamma0, self.beta);
        let gamma_tilde0 = (self.c_rho2 / l1).max(((4.0 + b) * self.c_rho1 * c_a_rho / l1).sqrt());
        let first = if self.c_rho1 == 0.0 {
            f64::INFINITY
        } else {
            (1.0 + b) * l1 * g0 * g0 / (8.0 * (2.0 + b).powi(2) * self.c_rho1 * self.c_b)
        };
        let second = g0 / ((18.0 * g0 + b * (2.0 + b) * self.c_rho1) * self.c_b)
            * (2.0 * l1 * g0 - (4.0 + b) * self.c_rho1 * c_a_rho / g0 - self.c_rho2);
        Thresholds {
            gamma_tilde0,
            eps_tilde: first.min(second),
            eps_tilde_remark: first.min(l1 * g0 / 18.0),
            d1: l1 * g0 > self.c_rho2,
            d2: l1 * g0 * g0 > (4.0 + b) * self.c_rho1 * c_a_rho,
        }
    }
}

/// `γ̃₀`, `ε̃` and the verdicts `(D1)`, `(D2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub gamma_tilde0: f64,
    pub eps_tilde: f64,
    /// Alternative `λ₁γ₀²/(32 C_{ρ1} C_B) ∧ λ₁γ₀/18` value quoted for Navier–Stokes; reported only.
    pub eps_tilde_remark: f64,
    pub d1: bool,
    pub d2: bool,
}

/// Derived constants at a reference intensity `ε₀`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub eps0: f64,
    pub delta_eps: f64,
    pub c_a_rho_eps: f64,
    pub c_a_rho: f64,
    pub gamma_tilde0: f64,
    pub eps_tilde: f64,
    pub eps_tilde_remark: f64,
    pub d1: bool,
    pub d2: bool,
    pub inputs: FrameworkConstants,
}

/// `δ(ε)` for a model.
pub fn delta_eps(model: &ModelSpec, eps: f64) -> Result<f64> {
    FrameworkConstants::from_model_with(model, model.mono.c_rho1.unwrap_or(0.0)).delta_eps(eps)
}

/// `C_{A,ρ,ε}` for a model.
pub fn c_a_rho_eps(model: &ModelSpec, eps: f64) -> Result<f64> {
    FrameworkConstants::from_model_with(model, model.mono.c_rho1.unwrap_or(0.0)).c_a_rho_eps(eps)
}

/// Constants report from explicit inputs with `C_{A,ρ} = C_{A,ρ,ε₀}`.
pub fn thresholds_from(consts: &FrameworkConstants, eps0: f64) -> Result<ConstantsReport> {
    let delta = consts.delta_eps(eps0)?;
    let c = consts.c_a_rho_eps(eps0)?;
    let t = consts.thresholds_with(c);
    Ok(ConstantsReport {
        eps0,
        delta_eps: delta,
        c_a_rho_eps: c,
        c_a_rho: c,
        gamma_tilde0: t.gamma_tilde0,
        eps_tilde: t.eps_tilde,
        eps_tilde_remark: t.eps_tilde_remark,
        d1: t.d1,
        d2: t.d2,
        inputs: *consts,
    })
}

/// Constants report for a model at reference intensity `ε₀`.
pub fn thresholds(model: &ModelSpec, eps0: f64) -> Result<ConstantsReport> {
    thresholds_from(&FrameworkConstants::from_model(model)?, eps0)
}

/// Reference intensity `ε₀` solving `ε₀ = ε̃(ε₀)`.
///
/// `ε̃` shrinks as `ε₀` grows because `C_{A,ρ,ε₀}` grows, so the fixed point
/// is the largest `ε₀` for which every `ε < ε₀` lies below its own threshold.
pub fn self_consistent_eps0(model: &ModelSpec) -> Result<f64> {
    let c = FrameworkConstants::from_model(model)?;
    let cap = c.eps_cap();
    if !(cap > 0.0) {
        return Err(Error::Inadmissible { eps: 0.0, bound: cap });
    }
    let gap = |e: f64| -> f64 {
        match c.c_a_rho_eps(e) {
            Ok(car) => c.thresholds_with(car).eps_tilde - e,
            Err(_) => -1.0,
        }
    };
    if gap(0.0) <= 0.0 {
        return Err(Error::Inadmissible {
            eps: 0.0,
            bound: c.thresholds_with(c.c_a_rho_eps(0.0)?).eps_tilde,
        });
    }
    let hi_probe = cap * (1.0 - 1e-9);
    if gap(hi_probe) >= 0.0 {
        return Ok(hi_probe);
    }
    let (mut lo, mut hi) = (0.0, hi_probe);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gap(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Constants report at the self-consistent reference intensity.
pub fn admissible_report(model: &ModelSpec) -> Result<ConstantsReport> {
    thresholds(model, self_consistent_eps0(model)?)
}

/// Audited condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    A2,
    A3,
    A4,
    A5,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Condition::A2 => "A2",
            Condition::A3 => "A3",
            Condition::A4 => "A4",
            Condition::A5 => "A5",
        };
        f.write_str(s)
    }
}

impl FromStr for Condition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A2" => Ok(Condition::A2),
            "A3" => Ok(Condition::A3),
            "A4" => Ok(Condition::A4),
            "A5" => Ok(Condition::A5),
            other => Err(Error::InvalidParameter(format!("unknown condition label '{other}'"))),
        }
    }
}

/// Result of sampling one condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub condition: Condition,
    pub eps: f64,
    pub samples: usize,
    pub radius_h: f64,
    pub seed: u64,
    /// Smallest `rhs − lhs` over all samples; nonnegative means every sample passed.
    pub worst_margin: f64,
    pub witness_index: usize,
    /// States of the worst sample (one state, or the pair `v₁, v₂`).
    pub witness: Vec<StateVec>,
}

impl AuditReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.worst_margin >= -tol
    }
}

/// Sample pair `i` of an audit.
pub fn audit_pair(model: &ModelSpec, radius_h: f64, seed: u64, i: usize) -> (StateVec, StateVec) {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
    let v1 = sample_state_with(model.dim(), radius_h, &mut rng);
    let v2 = sample_state_with(model.dim(), radius_h, &mut rng);
    (v1, v2)
}

struct Evaluator<'a> {
    model: &'a ModelSpec,
    eps: f64,
}

impl Evaluator<'_> {
    fn drift(&self, eps: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.model.drift.eval_into(eps, x, &mut out);
        out
    }

    fn b_diff_hs(&self, v1: &[f64], v2: &[f64]) -> f64 {
        (self.model.noise.matrix(v1) - self.model.noise.matrix(v2)).norm_squared()
    }

    fn h_beta(&self, v: &[f64]) -> f64 {
        let b = self.model.mono.beta;
        if b == 0.0 {
            1.0
        } else {
            sq(v).powf(b / 2.0)
        }
    }

    /// `(lhs, gamma part, rho-independent part)` of local monotonicity:
    /// returns `(lhs + 2γ₀‖d‖²_V − C_{ρ2}‖d‖²_H, (1+‖v₁‖^β)‖v₁‖²_V ‖d‖²_H)`.
    fn monotonicity_parts(&self, v1: &[f64], v2: &[f64]) -> (f64, f64) {
        let w = self.model.space.weights();
        let d = diff(v1, v2);
        let a = diff(&self.drift(self.eps, v1), &self.drift(self.eps, v2));
        let lhs = 2.0 * dot(&a, &d) + self.eps * self.b_diff_hs(v1, v2);
        let m = &self.model.mono;
        let excess = lhs + 2.0 * m.gamma0 * weighted_sq(w, &d) - m.c_rho2 * sq(&d);
        let scale = (1.0 + self.h_beta(v1)) * weighted_sq(w, v1) * sq(&d);
        (excess, scale)
    }

    fn margin(&self, cond: Condition, v1: &[f64], v2: &[f64]) -> Result<f64> {
        let model = self.model;
        let w = model.space.weights();
        let nc = model.noise_consts();
        match cond {
            Condition::A2 => {
                let c1 = model
                    .mono
                    .c_rho1
                    .ok_or_else(|| Error::MissingConstant(model.name.clone()))?;
                let (excess, scale) = self.monotonicity_parts(v1, v2);
                Ok(c1 * scale - excess)
            }
            Condition::A3 => {
                let d = diff(v1, v2);
                let g = model.growth;
                let factor = (1.0 + weighted_sq(w, v1)) * (1.0 + sq(v1).powf(g.kappa / 2.0));
                let a_eps = self.drift(self.eps, v1);
                let a_zero = self.drift(0.0, v1);
                let strat = diff(&a_eps, &a_zero);
                let lines = [
                    nc.c_b * (1.0 + sq(v1)) + nc.l_b * weighted_sq(w, v1) - model.noise.hs_norm_sq(v1),
                    nc.c_b * sq(&d) + nc.l_b * weighted_sq(w, &d) - self.b_diff_hs(v1, v2),
                    g.c_a * factor - inv_weighted_sq(w, &a_eps),
                    g.c_a * self.eps * self.eps * factor - inv_weighted_sq(w, &strat),
                ];
                Ok(lines.iter().cloned().fold(f64::INFINITY, f64::min))
            }
            Condition::A4 => {
                let d = diff(v1, v2);
                let bt_v = model.noise.matrix(v1).transpose() * nalgebra::DVector::from_column_slice(v1);
                let line1 = nc.c_b * sq(v1) - self.h_beta(v1).max(1.0) * bt_v.norm_squared();
                let db = model.noise.matrix(v1) - model.noise.matrix(v2);
                let bt_d = db.transpose() * nalgebra::DVector::from_column_slice(&d);
                let line2 = nc.c_b * sq(&d).powi(2) - bt_d.norm_squared();
                Ok(line1.min(line2))
            }
            Condition::A5 => {
                let c = c_a_rho_eps(model, self.eps)?;
                let a = self.drift(self.eps, v1);
                let prod =
                    2.0 * dot(&a, v1) + self.eps * model.noise.hs_norm_sq(v1) + model.mono.gamma0 * weighted_sq(w, v1);
                Ok(c - self.h_beta(v1).max(1.0) * prod)
            }
        }
    }
}

/// Samples a condition with the model's declared constants and records the worst slack.
pub fn audit_condition(
    model: &ModelSpec,
    eps: f64,
    condition: Condition,
    n_samples: usize,
    radius_h: f64,
    rng_seed: u64,
) -> Result<AuditReport> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("an audit needs at least one sample".into()));
    }
    let ev = Evaluator { model, eps };
    let margins: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let (v1, v2) = audit_pair(model, radius_h, rng_seed, i);
            ev.margin(condition, &v1.0, &v2.0)
        })
        .collect::<Result<_>>()?;
    let (mut worst_i, mut worst) = (0, f64::INFINITY);
    for (i, m) in margins.iter().enumerate() {
        if *m < worst || m.is_nan() {
            worst = *m;
            worst_i = i;
        }
    }
    let (v1, v2) = audit_pair(model, radius_h, rng_seed, worst_i);
    let witness = match condition {
        Condition::A2 | Condition::A3 | Condition::A4 => vec![v1, v2],
        Condition::A5 => vec![v1],
    };
    Ok(AuditReport {
        condition,
        eps,
        samples: n_samples,
        radius_h,
        seed: rng_seed,
        worst_margin: worst,
        witness_index: worst_i,
        witness,
    })
}

/// Smallest `C_{ρ1}` making local monotonicity hold on an audit sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoFit {
    pub c_rho1: f64,
    pub eps: f64,
    pub samples: usize,
    pub radius_h: f64,
    pub seed: u64,
    pub witness_index: usize,
}

/// Fits `C_{ρ1}` over the same pairs that [`audit_condition`] draws for `A2`.
///
/// Because `ε‖B(v₁)−B(v₂)‖²₂` grows with `ε`, fitting at the largest
/// intensity of interest covers every smaller one.
pub fn fit_c_rho1(model: &ModelSpec, eps: f64, n_samples: usize, radius_h: f64, rng_seed: u64) -> Result<RhoFit> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("a fit needs at least one sample".into()));
    }
    let ev = Evaluator { model, eps };
    let ratios: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let (v1, v2) = audit_pair(model, radius_h, rng_seed, i);
            let (excess, scale) = ev.monotonicity_parts(&v1.0, &v2.0);
            if excess <= 0.0 {
                0.0
            } else if scale > 0.0 {
                excess / scale
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let (mut best_i, mut best) = (0, 0.0);
    for (i, r) in ratios.iter().enumerate() {
        if *r > best {
            best = *r;
            best_i = i;
        }
    }
    if !best.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "local monotonicity fails at sample {best_i} for every C_rho1 (the dissipation rate gamma0 is too large)"
        )));
    }
    Ok(RhoFit {
        c_rho1: best,
        eps,
        samples: n_samples,
        radius_h,
        seed: rng_seed,
        witness_index: best_i,
    })
}

/// Fits `C_{ρ1}` at the largest admissible intensity and stores it in the model.
pub fn with_fitted_c_rho1(
    model: ModelSpec,
    n_samples: usize,
    radius_h: f64,
    rng_seed: u64,
) -> Result<(ModelSpec, RhoFit)> {
    let eps = model.eps_cap().max(0.0);
    let fit = fit_c_rho1(&model, eps, n_samples, radius_h, rng_seed)?;
    let c = fit.c_rho1;
    Ok((model.with_c_rho1(c), fit))
}

/// `s ↦ ⟨A^ε(v₁ + s v₂), v⟩` on a grid of `s` values.
pub fn hemicontinuity_probe(
    model: &ModelSpec,
    eps: f64,
    v1: &StateVec,
    v2: &StateVec,
    v: &StateVec,
    s_grid: &[f64],
) -> Result<Vec<f64>> {
    let n = model.dim();
    check_dim(n, v1.len())?;
    check_dim(n, v2.len())?;
    check_dim(n, v.len())?;
    s_grid
        .iter()
        .map(|s| {
            let x = StateVec(v1.0.iter().zip(&v2.0).map(|(a, b)| a + s * b).collect());
            let DualVec(a) = model.drift(eps, &x)?;
            Ok(dot(&a, &v.0))
        })
        .collect()
}
