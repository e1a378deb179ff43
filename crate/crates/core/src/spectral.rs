//! Truncated spectral representation of the triple `V ⊂ H ⊂ V*`.
//!
//! States are coefficient vectors against an `H`-orthonormal basis. The `V`
//! norm weights mode `k` by `w_k`, so `‖v‖²_V = Σ w_k v_k²`, and elements of
//! `V*` are stored against the same basis so that the dual pairing is the
//! plain dot product. The embedding constant `λ₁ = min_k w_k` is computed
//! from the weights and never configured.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Descriptor of a retained mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ModeLabel {
    /// `√(2/π) sin(k x)` on `(0, π)`.
    Sine { k: usize },
    /// Divergence-free field `(k^⊥/|k|) cos(k·x)` or `sin(k·x)` on the torus `[0, 2π)²`, normalized in `L²`.
    Fourier { k: [i32; 2], cosine: bool },
    /// Abstract coordinate without geometric meaning.
    Index(usize),
}

/// Finite mode basis with per-mode `V` weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GalerkinSpace {
    weights: Vec<f64>,
    labels: Vec<ModeLabel>,
    lambda1: f64,
}

impl GalerkinSpace {
    pub fn new(weights: Vec<f64>, labels: Vec<ModeLabel>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidParameter("a space needs at least one mode".into()));
        }
        check_dim(weights.len(), labels.len())?;
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "V-weight {w} is not a positive finite number"
            )));
        }
        let lambda1 = weights.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(Self {
            weights,
            labels,
            lambda1,
        })
    }

    /// Abstract space with the given weights.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let labels = (0..weights.len()).map(ModeLabel::Index).collect();
        Self::new(weights, labels)
    }

    /// Dirichlet sine modes `k = 1..=n` on `(0, π)` with weights `k^{2α}`.
    pub fn sine_1d(n: usize, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "weight exponent alpha = {alpha} must be positive"
            )));
        }
        let weights = (1..=n).map(|k| (k as f64).powf(2.0 * alpha)).collect();
        let labels = (1..=n).map(|k| ModeLabel::Sine { k }).collect();
        Self::new(weights, labels)
    }

    /// Realified divergence-free Fourier modes on `[0, 2π)²` with `0 < |k| ≤ k_max`
    /// and weights `|k|^{2α}`.
    ///
    /// One wavevector is kept from each `±k` pair and contributes a cosine and a
    /// sine mode. Modes are ordered by `|k|²`, then lexicographically.
    pub fn fourier_2d(k_max: usize, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "weight exponent alpha = {alpha} must be positive"
            )));
        }
        let km = k_max as i32;
        let mut ks = Vec::new();
        for k1 in 0..=km {
            for k2 in -km..=km {
                let r2 = k1 * k1 + k2 * k2;
                let upper = k1 > 0 || k2 > 0;
                if upper && r2 > 0 && r2 <= km * km {
                    ks.push([k1, k2]);
                }
            }
        }
        ks.sort_by_key(|k| (k[0] * k[0] + k[1] * k[1], k[0], k[1]));
        let mut weights = Vec::with_capacity(2 * ks.len());
        let mut labels = Vec::with_capacity(2 * ks.len());
        for k in ks {
            let r2 = (k[0] * k[0] + k[1] * k[1]) as f64;
            for cosine in [true, false] {
                weights.push(r2.powf(alpha));
                labels.push(ModeLabel::Fourier { k, cosine });
            }
        }
        Self::new(weights, labels)
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn labels(&self) -> &[ModeLabel] {
        &self.labels
    }

    /// Embedding constant `min_k w_k`.
    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn zero(&self) -> StateVec {
        StateVec(vec![0.0; self.dim()])
    }

    /// Unit vector on mode `i`, scaled by `amplitude`.
    pub fn mode(&self, i: usize, amplitude: f64) -> Result<StateVec> {
        if i >= self.dim() {
            return Err(Error::InvalidParameter(format!(
                "mode index {i} out of range for dimension {}",
                self.dim()
            )));
        }
        let mut v = self.zero();
        v.0[i] = amplitude;
        Ok(v)
    }

    pub fn is_sine(&self) -> bool {
        self.labels.iter().all(|l| matches!(l, ModeLabel::Sine { .. }))
    }

    pub fn is_fourier(&self) -> bool {
        self.labels.iter().all(|l| matches!(l, ModeLabel::Fourier { .. }))
    }

    pub fn check_state(&self, v: &StateVec) -> Result<()> {
        check_dim(self.dim(), v.0.len())?;
        if v.0.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("state".into()));
        }
        Ok(())
    }
}

/// Coefficients of a state in `V`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVec(pub Vec<f64>);

/// Coefficients of an element of `V*`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualVec(pub Vec<f64>);

impl StateVec {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, c: f64) -> StateVec {
        StateVec(self.0.iter().map(|x| c * x).collect())
    }

    /// The element of `V*` representing `⟨self, ·⟩_H`.
    pub fn embed(&self) -> DualVec {
        DualVec(self.0.clone())
    }
}

impl DualVec {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

pub(crate) fn weighted_sq(w: &[f64], v: &[f64]) -> f64 {
    w.iter().zip(v).map(|(w, x)| w * x * x).sum()
}

pub(crate) fn inv_weighted_sq(w: &[f64], f: &[f64]) -> f64 {
    w.iter().zip(f).map(|(w, x)| x * x / w).sum()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `‖v‖²_H = Σ v_k²`.
pub fn h_norm_sq(space: &GalerkinSpace, v: &StateVec) -> Result<f64> {
    check_dim(space.dim(), v.len())?;
    Ok(sq(&v.0))
}

/// `‖v‖²_V = Σ w_k v_k²`.
pub fn v_norm_sq(space: &GalerkinSpace, v: &StateVec) -> Result<f64> {
    check_dim(space.dim(), v.len())?;
    Ok(weighted_sq(space.weights(), &v.0))
}

/// `‖f‖²_{V*} = Σ f_k² / w_k`.
pub fn vstar_norm_sq(space: &GalerkinSpace, f: &DualVec) -> Result<f64> {
    check_dim(space.dim(), f.0.len())?;
    Ok(inv_weighted_sq(space.weights(), &f.0))
}

/// `V*`–`V` pairing.
pub fn dual_pair(space: &GalerkinSpace, f: &DualVec, v: &StateVec) -> Result<f64> {
    check_dim(space.dim(), f.0.len())?;
    check_dim(space.dim(), v.len())?;
    Ok(dot(&f.0, &v.0))
}

/// Random state with uniformly distributed direction and `‖v‖_H` uniform on `[0, radius_h]`.
pub fn sample_state(space: &GalerkinSpace, radius_h: f64, rng_seed: u64) -> StateVec {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    sample_state_with(space.dim(), radius_h, &mut rng)
}

pub(crate) fn sample_state_with<R: Rng>(dim: usize, radius_h: f64, rng: &mut R) -> StateVec {
    if radius_h <= 0.0 {
        return StateVec(vec![0.0; dim]);
    }
    let dir: Vec<f64> = loop {
        let d: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        if sq(&d) > 1e-300 {
            break d;
        }
    };
    let norm = sq(&dir).sqrt();
    let r = radius_h * rng.gen::<f64>();
    StateVec(dir.iter().map(|x| r * x / norm).collect())
}
