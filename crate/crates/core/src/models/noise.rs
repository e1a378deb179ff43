//! Noise operators `B(x): U → H` on a truncated noise space.
//!
//! Mode columns send the `j`-th basis vector of `U` to `s(x)·a_j·e_{m_j}`,
//! where the scalar modulation `s` is 1 (additive), `σ₀(1 + θ sin‖x‖_H)`
//! (bounded multiplicative) or `σ₀/(1 + ‖x‖²_H)` (decaying). Transport columns
//! are fixed skew linear maps `x ↦ M_j x`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::tensor::{fourier_convection, FOURIER_SUP_SQ};
use crate::spectral::{sq, GalerkinSpace};

/// Noise family requested by the caller.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum NoiseParams {
    Additive {
        columns: Vec<(usize, f64)>,
    },
    BoundedMult {
        sigma0: f64,
        theta: f64,
        columns: Vec<(usize, f64)>,
    },
    DecayingMult {
        sigma0: f64,
        columns: Vec<(usize, f64)>,
    },
    /// Transport noise `Π(σ_j·∇x)` with `σ_j = amplitude·e_{mode}` on top of a base noise.
    KraichnanOverlay {
        base: Box<NoiseParams>,
        fields: Vec<(usize, f64)>,
    },
}

impl NoiseParams {
    /// Unit-amplitude columns on the first `k` modes.
    pub fn unit_columns(k: usize) -> Vec<(usize, f64)> {
        (0..k).map(|i| (i, 1.0)).collect()
    }

    pub fn kind_label(&self) -> &'static str {
        match self {
            NoiseParams::Additive { .. } => "additive",
            NoiseParams::BoundedMult { .. } => "bounded_mult",
            NoiseParams::DecayingMult { .. } => "decaying_mult",
            NoiseParams::KraichnanOverlay { .. } => "kraichnan_overlay",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Modulation {
    Additive,
    Bounded { sigma0: f64, theta: f64 },
    Decaying { sigma0: f64 },
}

/// `C_B`, `L_B` and the truncated dimension `K` of `U`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConstants {
    pub c_b: f64,
    pub l_b: f64,
    pub u_dim: usize,
}

/// Assembled noise operator with its declared constants.
#[derive(Clone, Debug)]
pub struct NoiseSpec {
    pub(crate) kind: &'static str,
    pub(crate) modulation: Modulation,
    pub(crate) columns: Vec<(usize, f64)>,
    pub(crate) transport: Vec<DMatrix<f64>>,
    pub(crate) beta: f64,
    pub(crate) consts: NoiseConstants,
    n: usize,
}

fn check_columns(space: &GalerkinSpace, columns: &[(usize, f64)]) -> Result<()> {
    for &(m, a) in columns {
        if m >= space.dim() {
            return Err(Error::Configuration(format!(
                "noise column on mode {m} but the space has {} modes",
                space.dim()
            )));
        }
        if !a.is_finite() {
            return Err(Error::Configuration("noise amplitudes must be finite".into()));
        }
    }
    Ok(())
}

/// Builds a noise operator and declares its constants.
///
/// * additive: `C_B = Σ a_j²`, `β = 0`;
/// * bounded: `C_B = σ₀²(1+|θ|)² Σ a_j²`, `β = 0`, needs `|θ| < 1`;
/// * decaying: `C_B = σ₀² Σ a_j²`, `β = 2`;
/// * Kraichnan overlay: base constants plus `L_B = Σ ‖σ_j‖²_∞`.
pub fn build_noise(space: &GalerkinSpace, params: &NoiseParams) -> Result<NoiseSpec> {
    let n = space.dim();
    let sum_sq = |c: &[(usize, f64)]| c.iter().map(|(_, a)| a * a).sum::<f64>();
    let spec = match params {
        NoiseParams::Additive { columns } => {
            check_columns(space, columns)?;
            NoiseSpec {
                kind: "additive",
                modulation: Modulation::Additive,
                columns: columns.clone(),
                transport: Vec::new(),
                beta: 0.0,
                consts: NoiseConstants {
                    c_b: sum_sq(columns),
                    l_b: 0.0,
                    u_dim: columns.len(),
                },
                n,
            }
        }
        NoiseParams::BoundedMult { sigma0, theta, columns } => {
            check_columns(space, columns)?;
            if !(sigma0.is_finite() && *sigma0 > 0.0 && theta.abs() < 1.0) {
                return Err(Error::Configuration(
                    "bounded_mult needs sigma0 > 0 and |theta| < 1".into(),
                ));
            }
            NoiseSpec {
                kind: "bounded_mult",
                modulation: Modulation::Bounded {
                    sigma0: *sigma0,
                    theta: *theta,
                },
                columns: columns.clone(),
                transport: Vec::new(),
                beta: 0.0,
                consts: NoiseConstants {
                    c_b: sigma0 * sigma0 * (1.0 + theta.abs()).powi(2) * sum_sq(columns),
                    l_b: 0.0,
                    u_dim: columns.len(),
                },
                n,
            }
        }
        NoiseParams::DecayingMult { sigma0, columns } => {
            check_columns(space, columns)?;
            if !(sigma0.is_finite() && *sigma0 > 0.0) {
                return Err(Error::Configuration("decaying_mult needs sigma0 > 0".into()));
            }
            NoiseSpec {
                kind: "decaying_mult",
                modulation: Modulation::Decaying { sigma0: *sigma0 },
                columns: columns.clone(),
                transport: Vec::new(),
                beta: 2.0,
                consts: NoiseConstants {
                    c_b: sigma0 * sigma0 * sum_sq(columns),
                    l_b: 0.0,
                    u_dim: columns.len(),
                },
                n,
            }
        }
        NoiseParams::KraichnanOverlay { base, fields } => {
            if matches!(**base, NoiseParams::KraichnanOverlay { .. }) {
                return Err(Error::Configuration("Kraichnan overlays cannot be nested".into()));
            }
            let mut spec = build_noise(space, base)?;
            spec.add_transport(space, fields)?;
            spec
        }
    };
    if spec.consts.u_dim == 0 {
        return Err(Error::Configuration("noise needs at least one column".into()));
    }
    if !(spec.consts.c_b > 0.0) {
        return Err(Error::Configuration(
            "noise needs a positive Hilbert–Schmidt constant C_B".into(),
        ));
    }
    Ok(spec)
}

impl NoiseSpec {
    pub(crate) fn add_transport(&mut self, space: &GalerkinSpace, fields: &[(usize, f64)]) -> Result<()> {
        if !space.is_fourier() {
            return Err(Error::Configuration(
                "Kraichnan transport needs divergence-free Fourier modes".into(),
            ));
        }
        check_columns(space, fields)?;
        let triads = fourier_convection(space)?;
        let n = space.dim();
        for &(m, amp) in fields {
            let mut mat = DMatrix::zeros(n, n);
            for &(a, b, c, t) in &triads {
                if b as usize == m {
                    mat[(a as usize, c as usize)] += amp * t;
                }
            }
            self.transport.push(mat);
            self.consts.l_b += amp * amp * FOURIER_SUP_SQ;
        }
        self.consts.u_dim += fields.len();
        self.kind = "kraichnan_overlay";
        Ok(())
    }

    pub fn kind(&self) -> &'static str {
        self.kind
    }

    pub fn constants(&self) -> NoiseConstants {
        self.consts
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn is_additive(&self) -> bool {
        matches!(self.modulation, Modulation::Additive) && self.transport.is_empty()
    }

    pub(crate) fn base_is_additive(&self) -> bool {
        matches!(self.modulation, Modulation::Additive)
    }

    /// Number of columns `K`.
    pub fn u_dim(&self) -> usize {
        self.columns.len() + self.transport.len()
    }

    pub(crate) fn transport(&self) -> &[DMatrix<f64>] {
        &self.transport
    }

    /// Sum of `M_j²` over transport columns.
    pub(crate) fn transport_square_sum(&self) -> Option<DMatrix<f64>> {
        if self.transport.is_empty() {
            return None;
        }
        let mut s = DMatrix::zeros(self.n, self.n);
        for m in &self.transport {
            s += m * m;
        }
        Some(s)
    }

    fn scale(&self, x: &[f64]) -> f64 {
        match self.modulation {
            Modulation::Additive => 1.0,
            Modulation::Bounded { sigma0, theta } => sigma0 * (1.0 + theta * sq(x).sqrt().sin()),
            Modulation::Decaying { sigma0 } => sigma0 / (1.0 + sq(x)),
        }
    }

    fn scale_gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        match self.modulation {
            Modulation::Additive => None,
            Modulation::Bounded { sigma0, theta } => {
                let r = sq(x).sqrt();
                if r == 0.0 {
                    // s is not differentiable at the origin; use the one-sided radial limit 0
                    return Some(vec![0.0; x.len()]);
                }
                let c = sigma0 * theta * r.cos() / r;
                Some(x.iter().map(|xi| c * xi).collect())
            }
            Modulation::Decaying { sigma0 } => {
                let d = 1.0 + sq(x);
                let c = -2.0 * sigma0 / (d * d);
                Some(x.iter().map(|xi| c * xi).collect())
            }
        }
    }

    /// Adds `scale · B(x) w` to `out`.
    pub fn apply_into(&self, x: &[f64], w: &[f64], scale: f64, out: &mut [f64]) {
        let s = scale * self.scale(x);
        for (j, &(m, a)) in self.columns.iter().enumerate() {
            out[m] += s * a * w[j];
        }
        let k0 = self.columns.len();
        for (j, mat) in self.transport.iter().enumerate() {
            let wj = scale * w[k0 + j];
            if wj != 0.0 {
                for r in 0..self.n {
                    let mut acc = 0.0;
                    for c in 0..self.n {
                        acc += mat[(r, c)] * x[c];
                    }
                    out[r] += wj * acc;
                }
            }
        }
    }

    /// `B(x)ᵀ λ`.
    pub fn adjoint_apply(&self, x: &[f64], lambda: &[f64]) -> Vec<f64> {
        let s = self.scale(x);
        let mut out = Vec::with_capacity(self.u_dim());
        for &(m, a) in &self.columns {
            out.push(s * a * lambda[m]);
        }
        for mat in &self.transport {
            let mut acc = 0.0;
            for r in 0..self.n {
                for c in 0..self.n {
                    acc += lambda[r] * mat[(r, c)] * x[c];
                }
            }
            out.push(acc);
        }
        out
    }

    /// `N × K` matrix of `B(x)`.
    pub fn matrix(&self, x: &[f64]) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.n, self.u_dim());
        let s = self.scale(x);
        for (j, &(m, a)) in self.columns.iter().enumerate() {
            b[(m, j)] = s * a;
        }
        let k0 = self.columns.len();
        for (j, mat) in self.transport.iter().enumerate() {
            let col = mat * nalgebra::DVector::from_column_slice(x);
            b.set_column(k0 + j, &col);
        }
        b
    }

    /// Jacobian of `x ↦ B(x) w`.
    pub fn apply_jacobian(&self, x: &[f64], w: &[f64]) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(self.n, self.n);
        if let Some(g) = self.scale_gradient(x) {
            let mut col = vec![0.0; self.n];
            for (j, &(m, a)) in self.columns.iter().enumerate() {
                col[m] += a * w[j];
            }
            for r in 0..self.n {
                if col[r] != 0.0 {
                    for c in 0..self.n {
                        jac[(r, c)] += col[r] * g[c];
                    }
                }
            }
        }
        let k0 = self.columns.len();
        for (j, mat) in self.transport.iter().enumerate() {
            jac += mat * w[k0 + j];
        }
        jac
    }

    /// `‖B(x)‖²_2`, the squared Hilbert–Schmidt norm.
    pub fn hs_norm_sq(&self, x: &[f64]) -> f64 {
        self.matrix(x).norm_squared()
    }
}
