//! Convection coefficients in the retained bases.
//!
//! Entries `(a, b, c, T)` mean `⟨(e_b·∇) e_c, e_a⟩ = T`; for the 1D sine basis
//! this is `⟨e_b ∂ₓ e_c, e_a⟩`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::spectral::{GalerkinSpace, ModeLabel};

pub(crate) type Triad = (u32, u32, u32, f64);

/// Closed-form triads for `√(2/π) sin(kx)` on `(0, π)`.
///
/// `∫₀^π sin(ax) sin(bx) cos(cx) dx = (π/4)[δ_{a=b+c} + δ_{b=a+c} − δ_{c=a+b}]` for positive integers.
pub(crate) fn sine_convection(space: &GalerkinSpace) -> Result<Vec<Triad>> {
    let ks: Vec<usize> = space
        .labels()
        .iter()
        .map(|l| match l {
            ModeLabel::Sine { k } => Ok(*k),
            _ => Err(Error::Configuration("convection in 1D needs a sine basis".into())),
        })
        .collect::<Result<_>>()?;
    let norm = (2.0 / PI).powf(1.5) * PI / 4.0;
    let mut out = Vec::new();
    for (a, &ka) in ks.iter().enumerate() {
        for (b, &kb) in ks.iter().enumerate() {
            for (c, &kc) in ks.iter().enumerate() {
                let mut s = 0.0;
                if ka == kb + kc {
                    s += 1.0;
                }
                if kb == ka + kc {
                    s += 1.0;
                }
                if kc == ka + kb {
                    s -= 1.0;
                }
                if s != 0.0 {
                    out.push((a as u32, b as u32, c as u32, norm * kc as f64 * s));
                }
            }
        }
    }
    Ok(out)
}

struct FieldTable {
    m: usize,
    // per mode: velocity (2 components) and gradient (4 components) at each grid node
    vel: Vec<[Vec<f64>; 2]>,
    grad: Vec<[Vec<f64>; 4]>,
}

fn fourier_fields(space: &GalerkinSpace) -> Result<FieldTable> {
    let mut kmax = 0i32;
    let mut modes = Vec::with_capacity(space.dim());
    for l in space.labels() {
        match l {
            ModeLabel::Fourier { k, cosine } => {
                if k[0] == 0 && k[1] == 0 {
                    return Err(Error::Configuration(
                        "the zero wavevector is not a divergence-free mode".into(),
                    ));
                }
                kmax = kmax.max(k[0].abs()).max(k[1].abs());
                modes.push((*k, *cosine));
            }
            _ => {
                return Err(Error::Configuration(
                    "2D convection needs divergence-free Fourier modes".into(),
                ))
            }
        }
    }
    // Triple products carry wavenumbers up to 3·kmax per axis; the periodic
    // trapezoid rule is exact below m.
    let m = (3 * kmax as usize + 1).max(4) + 1;
    let h = 2.0 * PI / m as f64;
    let c0 = 1.0 / (PI * 2f64.sqrt());
    let mut vel = Vec::with_capacity(modes.len());
    let mut grad = Vec::with_capacity(modes.len());
    for (k, cosine) in modes {
        let kn = ((k[0] * k[0] + k[1] * k[1]) as f64).sqrt();
        let p = [-(k[1] as f64) / kn, k[0] as f64 / kn];
        let mut v = [vec![0.0; m * m], vec![0.0; m * m]];
        let mut g = [vec![0.0; m * m], vec![0.0; m * m], vec![0.0; m * m], vec![0.0; m * m]];
        for i in 0..m {
            for j in 0..m {
                let phase = k[0] as f64 * i as f64 * h + k[1] as f64 * j as f64 * h;
                let (f, df) = if cosine {
                    (phase.cos(), -phase.sin())
                } else {
                    (phase.sin(), phase.cos())
                };
                let idx = i * m + j;
                for comp in 0..2 {
                    v[comp][idx] = c0 * p[comp] * f;
                    for dir in 0..2 {
                        g[2 * comp + dir][idx] = c0 * p[comp] * k[dir] as f64 * df;
                    }
                }
            }
        }
        vel.push(v);
        grad.push(g);
    }
    Ok(FieldTable { m, vel, grad })
}

/// Triads of the Leray-projected convection for realified Fourier modes,
/// evaluated by a quadrature that is exact for the trigonometric products involved.
#[allow(clippy::needless_range_loop)]
pub(crate) fn fourier_convection(space: &GalerkinSpace) -> Result<Vec<Triad>> {
    let t = fourier_fields(space)?;
    let n = space.dim();
    let nodes = t.m * t.m;
    let w = (2.0 * PI / t.m as f64).powi(2);
    let mut out = Vec::new();
    let mut conv = [vec![0.0; nodes], vec![0.0; nodes]];
    for b in 0..n {
        for c in 0..n {
            for comp in 0..2 {
                for q in 0..nodes {
                    conv[comp][q] =
                        t.vel[b][0][q] * t.grad[c][2 * comp][q] + t.vel[b][1][q] * t.grad[c][2 * comp + 1][q];
                }
            }
            for a in 0..n {
                let mut s = 0.0;
                for q in 0..nodes {
                    s += conv[0][q] * t.vel[a][0][q] + conv[1][q] * t.vel[a][1][q];
                }
                let s = s * w;
                if s.abs() > 1e-13 {
                    out.push((a as u32, b as u32, c as u32, s));
                }
            }
        }
    }
    Ok(out)
}

/// `sup |e_m|²` for a realified Fourier mode.
pub(crate) const FOURIER_SUP_SQ: f64 = 1.0 / (2.0 * PI * PI);
