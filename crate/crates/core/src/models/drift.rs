//! Drift operators assembled from a diagonal dissipation, a quadratic
//! convolution, a pointwise reaction and an optional constant linear map.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::tensor::Triad;
use crate::spectral::{GalerkinSpace, ModeLabel};

/// Pointwise reaction `g` with `g(0) = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ReactionSpec {
    /// `g(u) = Σ_{i≥1} coeffs[i-1] · u^i`.
    Polynomial { coeffs: Vec<f64> },
    /// `g(u) = −α u + L sin(u)`.
    DampedSine { alpha: f64, lip: f64 },
}

impl ReactionSpec {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            ReactionSpec::Polynomial { coeffs } => {
                let mut acc = 0.0;
                for c in coeffs.iter().rev() {
                    acc = (acc + c) * u;
                }
                acc
            }
            ReactionSpec::DampedSine { alpha, lip } => -alpha * u + lip * u.sin(),
        }
    }

    pub fn deriv(&self, u: f64) -> f64 {
        match self {
            ReactionSpec::Polynomial { coeffs } => {
                let mut acc = 0.0;
                for (i, c) in coeffs.iter().enumerate().rev() {
                    acc = acc * u + (i + 1) as f64 * c;
                }
                acc
            }
            ReactionSpec::DampedSine { alpha, lip } => -alpha + lip * u.cos(),
        }
    }

    /// Polynomial degree of the growth of `g`.
    pub fn degree(&self) -> usize {
        match self {
            ReactionSpec::Polynomial { coeffs } => coeffs.iter().rposition(|c| *c != 0.0).map_or(0, |i| i + 1),
            ReactionSpec::DampedSine { .. } => 1,
        }
    }

    /// Smallest `C_g ≥ 0` with `(g(ξ) − g(ζ))(ξ − ζ) ≤ C_g (ξ − ζ)²`.
    pub fn one_sided_constant(&self) -> Result<f64> {
        if let ReactionSpec::Polynomial { coeffs } = self {
            if coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidParameter("reaction coefficients must be finite".into()));
            }
        }
        let deg = self.degree();
        if deg > 3 {
            return Err(Error::UnsupportedGrowth(format!(
                "reaction of degree {deg} exceeds the cubic limit"
            )));
        }
        let sup = match self {
            ReactionSpec::Polynomial { coeffs } => {
                let a = |i: usize| coeffs.get(i).copied().unwrap_or(0.0);
                let (a1, a2, a3) = (a(0), a(1), a(2));
                if a3 < 0.0 {
                    a1 - a2 * a2 / (3.0 * a3)
                } else if a3 == 0.0 && a2 == 0.0 {
                    a1
                } else {
                    return Err(Error::InvalidParameter(
                        "reaction is not one-sided Lipschitz (needs a negative cubic coefficient or no quadratic term)"
                            .into(),
                    ));
                }
            }
            ReactionSpec::DampedSine { alpha, lip } => {
                if !(alpha.is_finite() && lip.is_finite()) {
                    return Err(Error::InvalidParameter("reaction parameters must be finite".into()));
                }
                lip.abs() - alpha
            }
        };
        Ok(sup.max(0.0))
    }

    /// `(c_1, c_2, c_3)` with `|g(u)| ≤ Σ c_i |u|^i`.
    pub(crate) fn growth_coeffs(&self) -> [f64; 3] {
        match self {
            ReactionSpec::Polynomial { coeffs } => {
                let a = |i: usize| coeffs.get(i).copied().unwrap_or(0.0).abs();
                [a(0), a(1), a(2)]
            }
            ReactionSpec::DampedSine { alpha, lip } => [alpha.abs() + lip.abs(), 0.0, 0.0],
        }
    }
}

/// Reaction evaluated by a midpoint rule on `(0, π)`.
#[derive(Clone, Debug)]
pub(crate) struct Reaction {
    spec: ReactionSpec,
    n: usize,
    nodes: usize,
    weight: f64,
    // basis[j * n + a] = e_a(x_j)
    basis: Vec<f64>,
}

impl Reaction {
    pub(crate) fn new(space: &GalerkinSpace, spec: ReactionSpec) -> Result<Self> {
        let ks: Vec<usize> = space
            .labels()
            .iter()
            .map(|l| match l {
                ModeLabel::Sine { k } => Ok(*k),
                _ => Err(Error::Configuration("pointwise reactions need a sine basis".into())),
            })
            .collect::<Result<_>>()?;
        let kmax = ks.iter().copied().max().unwrap_or(1);
        let nodes = 8 * kmax + 8;
        let n = ks.len();
        let c = (2.0 / PI).sqrt();
        let mut basis = vec![0.0; nodes * n];
        for j in 0..nodes {
            let x = PI * (j as f64 + 0.5) / nodes as f64;
            for (a, &k) in ks.iter().enumerate() {
                basis[j * n + a] = c * (k as f64 * x).sin();
            }
        }
        Ok(Self {
            spec,
            n,
            nodes,
            weight: PI / nodes as f64,
            basis,
        })
    }

    fn values(&self, x: &[f64], j: usize) -> f64 {
        let row = &self.basis[j * self.n..(j + 1) * self.n];
        row.iter().zip(x).map(|(e, x)| e * x).sum()
    }

    fn add_to(&self, x: &[f64], out: &mut [f64]) {
        for j in 0..self.nodes {
            let g = self.weight * self.spec.eval(self.values(x, j));
            let row = &self.basis[j * self.n..(j + 1) * self.n];
            for (o, e) in out.iter_mut().zip(row) {
                *o += g * e;
            }
        }
    }

    fn add_jacobian(&self, x: &[f64], jac: &mut DMatrix<f64>) {
        for j in 0..self.nodes {
            let d = self.weight * self.spec.deriv(self.values(x, j));
            let row = &self.basis[j * self.n..(j + 1) * self.n];
            for a in 0..self.n {
                let da = d * row[a];
                for b in 0..self.n {
                    jac[(a, b)] += da * row[b];
                }
            }
        }
    }

    pub(crate) fn spec(&self) -> &ReactionSpec {
        &self.spec
    }
}

/// `A^ε(x) = −D x + Q(x) + g(x) + (ε/2) S x + f`.
///
/// `D` is the diagonal dissipation treated implicitly by the integrator;
/// everything else is the explicit remainder.
#[derive(Clone, Debug)]
pub struct Drift {
    pub(crate) diag: Vec<f64>,
    pub(crate) quad: Vec<Triad>,
    pub(crate) reaction: Option<Reaction>,
    pub(crate) strat: Option<DMatrix<f64>>,
    pub(crate) forcing: Option<Vec<f64>>,
}

impl Drift {
    pub(crate) fn linear(diag: Vec<f64>) -> Self {
        Self {
            diag,
            quad: Vec::new(),
            reaction: None,
            strat: None,
            forcing: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Per-mode dissipation rates of the implicit part.
    pub fn dissipation(&self) -> &[f64] {
        &self.diag
    }

    /// Explicit remainder `A^ε(x) + D x`, written into `out`.
    pub fn explicit_into(&self, eps: f64, x: &[f64], out: &mut [f64]) {
        match &self.forcing {
            Some(f) => out.copy_from_slice(f),
            None => out.iter_mut().for_each(|o| *o = 0.0),
        }
        for &(a, b, c, t) in &self.quad {
            out[a as usize] += t * x[b as usize] * x[c as usize];
        }
        if let Some(r) = &self.reaction {
            r.add_to(x, out);
        }
        if let Some(s) = &self.strat {
            if eps != 0.0 {
                let h = 0.5 * eps;
                for (i, o) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (j, xj) in x.iter().enumerate() {
                        acc += s[(i, j)] * xj;
                    }
                    *o += h * acc;
                }
            }
        }
    }

    /// Full drift `A^ε(x)`.
    pub fn eval_into(&self, eps: f64, x: &[f64], out: &mut [f64]) {
        self.explicit_into(eps, x, out);
        for ((o, d), xi) in out.iter_mut().zip(&self.diag).zip(x) {
            *o -= d * xi;
        }
    }

    /// Jacobian of the explicit remainder at `x`.
    pub fn explicit_jacobian(&self, eps: f64, x: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let mut jac = DMatrix::zeros(n, n);
        for &(a, b, c, t) in &self.quad {
            let (a, b, c) = (a as usize, b as usize, c as usize);
            jac[(a, b)] += t * x[c];
            jac[(a, c)] += t * x[b];
        }
        if let Some(r) = &self.reaction {
            r.add_jacobian(x, &mut jac);
        }
        if let Some(s) = &self.strat {
            jac += s * (0.5 * eps);
        }
        jac
    }

    pub fn has_quadratic(&self) -> bool {
        !self.quad.is_empty()
    }

    pub(crate) fn reaction_spec(&self) -> Option<&ReactionSpec> {
        self.reaction.as_ref().map(|r| r.spec())
    }
}
