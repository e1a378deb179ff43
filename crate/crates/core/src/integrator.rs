//! Semi-implicit Euler–Maruyama stepping for
//! `dX = A^ε(X)dt + B(X)v dt + √ε B(X)dW`, energy functionals and Monte
//! Carlo checks of the uniform exponential estimates.
//!
//! Brownian increments come from a counter-based generator keyed by
//! `(seed, level, absolute step, column)`, where the absolute step of the
//! interval `[t, t+dt]` is `round(t/dt)`. Any two grids with the same `dt`
//! and node-aligned start times therefore see identical increments on their
//! common window, which is what the pull-back construction relies on. Level
//! `ℓ > 0` refines level `ℓ−1` by Brownian bridges, so summing the two
//! children of a coarse step reproduces the coarse increment.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::framework::{c_a_rho_eps, delta_eps};
use crate::models::ModelSpec;
use crate::rng::{derive_seed, CounterNormal};
use crate::skeleton::Control;
use crate::spectral::{sq, weighted_sq, StateVec};

/// Uniform grid `t0, t0+dt, …, t1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, dt: f64) -> Result<Self> {
        if !(t0.is_finite() && t1.is_finite() && dt.is_finite()) {
            return Err(Error::InvalidParameter("grid bounds and step must be finite".into()));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt = {dt} must be positive")));
        }
        if !(t1 > t0) {
            return Err(Error::InvalidParameter(format!("t1 = {t1} must exceed t0 = {t0}")));
        }
        let span = t1 - t0;
        let n_steps = (span / dt).round() as usize;
        if n_steps == 0 || (n_steps as f64 * dt - span).abs() > 1e-12 * span.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "dt = {dt} does not divide [{t0}, {t1}]"
            )));
        }
        Ok(Self { t0, t1, dt, n_steps })
    }

    /// Time of node `i`.
    pub fn time(&self, i: usize) -> f64 {
        if i == self.n_steps {
            self.t1
        } else {
            self.t0 + i as f64 * self.dt
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|i| self.time(i)).collect()
    }

    /// Absolute counter index of step 0.
    pub fn first_step_index(&self) -> i64 {
        (self.t0 / self.dt).round() as i64
    }

    /// Node index of time `t`, if `t` is a node.
    pub fn node_of(&self, t: f64) -> Option<usize> {
        let x = (t - self.t0) / self.dt;
        let i = x.round();
        if i < 0.0 || i > self.n_steps as f64 || (x - i).abs() > 1e-6 {
            None
        } else {
            Some(i as usize)
        }
    }

    fn same_as(&self, other: &TimeGrid) -> bool {
        self.n_steps == other.n_steps
            && (self.dt - other.dt).abs() <= 1e-12 * self.dt
            && (self.t0 - other.t0).abs() <= 1e-9 * self.dt
    }
}

/// Brownian increments on a grid, `n_steps × K`, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisePath {
    pub grid: TimeGrid,
    pub k: usize,
    pub increments: Vec<f64>,
    pub seed: u64,
}

impl NoisePath {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.increments[i * self.k..(i + 1) * self.k]
    }

    /// Increments restricted to the node-aligned sub-window `[ta, tb]`.
    pub fn window(&self, ta: f64, tb: f64) -> Result<NoisePath> {
        let (ia, ib) = window_nodes(&self.grid, ta, tb)?;
        Ok(NoisePath {
            grid: TimeGrid {
                t0: self.grid.time(ia),
                t1: self.grid.time(ib),
                dt: self.grid.dt,
                n_steps: ib - ia,
            },
            k: self.k,
            increments: self.increments[ia * self.k..ib * self.k].to_vec(),
            seed: self.seed,
        })
    }
}

fn window_nodes(grid: &TimeGrid, ta: f64, tb: f64) -> Result<(usize, usize)> {
    match (grid.node_of(ta), grid.node_of(tb)) {
        (Some(a), Some(b)) if b > a => Ok((a, b)),
        _ => Err(Error::InvalidParameter(format!(
            "window [{ta}, {tb}] is not a node-aligned part of [{}, {}]",
            grid.t0, grid.t1
        ))),
    }
}

/// I.i.d. `N(0, dt)` increments keyed by `(seed, absolute step, column)`.
pub fn brownian(grid: &TimeGrid, k: usize, seed: u64) -> Result<NoisePath> {
    brownian_refined(grid, k, seed, 0)
}

/// Increments of the `levels`-fold dyadic refinement of the base step `dt·2^levels`.
///
/// With `levels = 0` this is [`brownian`]. A step at level `ℓ` with index `i`
/// has parent `⌊i/2⌋` at level `ℓ−1`; the left child is
/// `ΔW/2 + (√h/2)Z(seed, ℓ, parent, c)` with `h` the parent step, the right
/// child is the remainder.
pub fn brownian_refined(grid: &TimeGrid, k: usize, seed: u64, levels: u32) -> Result<NoisePath> {
    if k == 0 {
        return Err(Error::InvalidParameter("the noise needs at least one column".into()));
    }
    if levels > 30 {
        return Err(Error::InvalidParameter("at most 30 refinement levels".into()));
    }
    let gen = CounterNormal::new(seed);
    let base_dt = grid.dt * (1u64 << levels) as f64;
    let first = grid.first_step_index();
    let mut increments = Vec::with_capacity(grid.n_steps * k);
    for i in 0..grid.n_steps {
        let idx = first + i as i64;
        for c in 0..k {
            increments.push(refined_increment(&gen, base_dt, levels, idx, c as u32));
        }
    }
    Ok(NoisePath {
        grid: *grid,
        k,
        increments,
        seed,
    })
}

fn refined_increment(gen: &CounterNormal, base_dt: f64, level: u32, idx: i64, c: u32) -> f64 {
    if level == 0 {
        return base_dt.sqrt() * gen.normal(0, idx, c);
    }
    let parent = idx.div_euclid(2);
    let h = base_dt / (1u64 << (level - 1)) as f64;
    let p = refined_increment(gen, base_dt, level - 1, parent, c);
    let left = 0.5 * p + 0.5 * h.sqrt() * gen.normal(level, parent, c);
    if idx.rem_euclid(2) == 0 {
        left
    } else {
        p - left
    }
}

/// Trajectory on a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub grid: TimeGrid,
    pub states: Vec<StateVec>,
}

impl Path {
    pub fn last(&self) -> &StateVec {
        self.states.last().expect("paths hold at least one node")
    }

    /// State at node-aligned time `t`.
    pub fn at(&self, t: f64) -> Result<&StateVec> {
        self.grid
            .node_of(t)
            .map(|i| &self.states[i])
            .ok_or_else(|| Error::InvalidParameter(format!("t = {t} is not a node of the path")))
    }

    /// Restriction to the node-aligned window `[ta, tb]`.
    pub fn window(&self, ta: f64, tb: f64) -> Result<Path> {
        let (ia, ib) = window_nodes(&self.grid, ta, tb)?;
        Ok(Path {
            grid: TimeGrid {
                t0: self.grid.time(ia),
                t1: self.grid.time(ib),
                dt: self.grid.dt,
                n_steps: ib - ia,
            },
            states: self.states[ia..=ib].to_vec(),
        })
    }
}

/// Scratch space for repeated steps.
pub(crate) struct Stepper<'a> {
    model: &'a ModelSpec,
    eps: f64,
    sqrt_eps: f64,
    buf: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub(crate) fn new(model: &'a ModelSpec, eps: f64) -> Self {
        Self {
            model,
            eps,
            sqrt_eps: eps.sqrt(),
            buf: vec![0.0; model.dim()],
        }
    }

    /// One step from `x` into `out`; returns false on a nonfinite result.
    pub(crate) fn advance(
        &mut self,
        x: &[f64],
        dt: f64,
        dw: Option<&[f64]>,
        v: Option<&[f64]>,
        out: &mut [f64],
    ) -> bool {
        let drift = &self.model.drift;
        drift.explicit_into(self.eps, x, &mut self.buf);
        for (o, (xi, r)) in out.iter_mut().zip(x.iter().zip(&self.buf)) {
            *o = xi + dt * r;
        }
        if let Some(v) = v {
            self.model.noise.apply_into(x, v, dt, out);
        }
        if let Some(dw) = dw {
            if self.eps != 0.0 {
                self.model.noise.apply_into(x, dw, self.sqrt_eps, out);
            }
        }
        let mut finite = true;
        for (o, d) in out.iter_mut().zip(drift.dissipation()) {
            *o /= 1.0 + dt * d;
            finite &= o.is_finite();
        }
        finite
    }
}

/// One semi-implicit step: the diagonal dissipation is implicit, the rest explicit.
pub fn step(model: &ModelSpec, eps: f64, x: &StateVec, dt: f64, dw: &[f64], v: Option<&[f64]>) -> Result<StateVec> {
    check_dim(model.dim(), x.len())?;
    check_dim(model.noise.u_dim(), dw.len())?;
    if let Some(v) = v {
        check_dim(model.noise.u_dim(), v.len())?;
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt = {dt} must be positive")));
    }
    delta_eps(model, eps)?;
    let mut out = vec![0.0; model.dim()];
    if !Stepper::new(model, eps).advance(&x.0, dt, Some(dw), v, &mut out) {
        return Err(Error::Blowup { step: 0, t: dt });
    }
    Ok(StateVec(out))
}

/// Maps each state step to its control row.
fn control_rows(grid: &TimeGrid, control: &Control, k: usize) -> Result<usize> {
    check_dim(k, control.k)?;
    let ratio = control.grid.dt / grid.dt;
    let m = ratio.round();
    if m < 1.0 || (ratio - m).abs() > 1e-9 * ratio {
        return Err(Error::InvalidParameter(
            "the control step must be a multiple of the state step".into(),
        ));
    }
    let m = m as usize;
    if (control.grid.t0 - grid.t0).abs() > 1e-9 * grid.dt || control.grid.n_steps * m != grid.n_steps {
        return Err(Error::InvalidParameter(
            "the control must cover exactly the state grid".into(),
        ));
    }
    Ok(m)
}

/// Integrates from `xi` over `grid` with optional noise and control.
pub(crate) fn integrate(
    model: &ModelSpec,
    eps: f64,
    xi: &StateVec,
    grid: &TimeGrid,
    noise: Option<&NoisePath>,
    control: Option<&Control>,
) -> Result<Path> {
    check_dim(model.dim(), xi.len())?;
    let k = model.noise.u_dim();
    if let Some(nz) = noise {
        check_dim(k, nz.k)?;
        if !nz.grid.same_as(grid) {
            return Err(Error::InvalidParameter("noise path and state grid differ".into()));
        }
    }
    let per_row = match control {
        Some(c) => control_rows(grid, c, k)?,
        None => 1,
    };
    let mut stepper = Stepper::new(model, eps);
    let mut states = Vec::with_capacity(grid.n_steps + 1);
    states.push(xi.clone());
    let mut next = vec![0.0; model.dim()];
    for i in 0..grid.n_steps {
        let dw = noise.map(|nz| nz.row(i));
        let v = control.map(|c| c.row(i / per_row));
        if !stepper.advance(&states[i].0, grid.dt, dw, v, &mut next) {
            return Err(Error::Blowup {
                step: i,
                t: grid.time(i + 1),
            });
        }
        states.push(StateVec(next.clone()));
    }
    Ok(Path { grid: *grid, states })
}

/// States at the requested nodes of an uncontrolled run whose increments are
/// generated on the fly; identical to integrating with [`brownian`]`(grid, K, seed)`.
pub(crate) fn integrate_nodes(
    model: &ModelSpec,
    eps: f64,
    xi: &StateVec,
    grid: &TimeGrid,
    seed: u64,
    nodes: &[usize],
) -> Result<Vec<StateVec>> {
    check_dim(model.dim(), xi.len())?;
    let k = model.noise.u_dim();
    let gen = CounterNormal::new(seed);
    let sdt = grid.dt.sqrt();
    let first = grid.first_step_index();
    let mut stepper = Stepper::new(model, eps);
    let mut x = xi.0.clone();
    let mut next = vec![0.0; x.len()];
    let mut dw = vec![0.0; k];
    let mut out = vec![None; nodes.len()];
    for i in 0..=grid.n_steps {
        for (slot, &n) in out.iter_mut().zip(nodes) {
            if n == i {
                *slot = Some(StateVec(x.clone()));
            }
        }
        if i == grid.n_steps {
            break;
        }
        for (c, w) in dw.iter_mut().enumerate() {
            *w = sdt * gen.normal(0, first + i as i64, c as u32);
        }
        if !stepper.advance(&x, grid.dt, Some(&dw), None, &mut next) {
            return Err(Error::Blowup {
                step: i,
                t: grid.time(i + 1),
            });
        }
        std::mem::swap(&mut x, &mut next);
    }
    out.into_iter()
        .map(|s| s.ok_or_else(|| Error::InvalidParameter("requested node lies outside the grid".into())))
        .collect()
}

/// Full trajectory of the stochastic (and optionally controlled) equation.
pub fn simulate(
    model: &ModelSpec,
    eps: f64,
    xi: &StateVec,
    grid: &TimeGrid,
    noise: &NoisePath,
    control: Option<&Control>,
) -> Result<Path> {
    delta_eps(model, eps)?;
    integrate(model, eps, xi, grid, Some(noise), control)
}

/// Energy functionals along a path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergySeries {
    pub times: Vec<f64>,
    /// `‖X‖²_H` per node.
    pub h_sq: Vec<f64>,
    /// Cumulative `∫‖X‖²_V ds`.
    pub v_sq_int: Vec<f64>,
    /// Cumulative `∫‖X‖^β_H‖X‖²_V ds`.
    pub h_beta_v_int: Vec<f64>,
    /// `‖X‖^{2+β}_H` per node.
    pub h_2beta: Vec<f64>,
}

/// Trapezoid-rule energy functionals with the model's `β`.
pub fn energy_series(model: &ModelSpec, path: &Path) -> EnergySeries {
    let w = model.space.weights();
    let beta = model.mono.beta;
    let n = path.states.len();
    let mut s = EnergySeries {
        times: path.grid.times(),
        h_sq: Vec::with_capacity(n),
        v_sq_int: Vec::with_capacity(n),
        h_beta_v_int: Vec::with_capacity(n),
        h_2beta: Vec::with_capacity(n),
    };
    let (mut prev_v, mut prev_bv) = (0.0, 0.0);
    for (i, x) in path.states.iter().enumerate() {
        let h = sq(&x.0);
        let v = weighted_sq(w, &x.0);
        let hb = pow_half(h, beta);
        let bv = hb * v;
        let (cv, cbv) = if i == 0 {
            (0.0, 0.0)
        } else {
            let half = 0.5 * path.grid.dt;
            (
                s.v_sq_int[i - 1] + half * (prev_v + v),
                s.h_beta_v_int[i - 1] + half * (prev_bv + bv),
            )
        };
        s.h_sq.push(h);
        s.v_sq_int.push(cv);
        s.h_beta_v_int.push(cbv);
        s.h_2beta.push(h * hb);
        prev_v = v;
        prev_bv = bv;
    }
    s
}

/// `h^{p/2}` with `h^0 = 1`.
fn pow_half(h: f64, p: f64) -> f64 {
    if p == 0.0 {
        1.0
    } else {
        h.powf(p / 2.0)
    }
}

/// One bound line of the exponential report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundLine {
    pub label: String,
    /// Whether `estimate` and `bound` are natural logarithms of the moments.
    pub log_scale: bool,
    pub estimate: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Monte Carlo check of the uniform energy and exponential estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentialReport {
    pub eps: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub c_a_rho_eps: f64,
    pub n_paths: usize,
    pub slack: f64,
    pub lines: Vec<BoundLine>,
}

impl ExponentialReport {
    pub fn all_pass(&self) -> bool {
        self.lines.iter().all(|l| l.pass)
    }
}

/// Slack factor applied to every bound line.
pub const ESTIMATE_SLACK: f64 = 1.1;

fn log_mean_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + (xs.iter().map(|x| (x - m).exp()).sum::<f64>() / xs.len() as f64).ln()
}

/// Per-path statistics: (energy line, exponent b, exponent c, exponent d).
fn path_statistics(model: &ModelSpec, path: &Path, gamma: f64, delta: f64, rate: f64) -> [f64; 4] {
    let e = energy_series(model, path);
    let g0 = model.mono.gamma0;
    let dt = path.grid.dt;
    let n = path.grid.n_steps;
    let t_end = path.grid.t1;
    let t0 = path.grid.t0;
    let w = model.space.weights();
    let beta = model.mono.beta;

    // sup_t { e^{−γ(T−t)}‖X_t‖^{2+β} + γ₀∫_{t0}^t e^{−γ(T−s)}‖X‖^β‖X‖²_V ds }
    let mut a_sup = f64::NEG_INFINITY;
    let mut weighted_int = 0.0;
    let mut prev = 0.0;
    for (i, x) in path.states.iter().enumerate() {
        let t = path.grid.time(i);
        let h = sq(&x.0);
        let f = pow_half(h, beta) * weighted_sq(w, &x.0) * (-gamma * (t_end - t)).exp();
        if i > 0 {
            weighted_int += 0.5 * dt * (prev + f);
        }
        prev = f;
        a_sup = a_sup.max((-gamma * (t_end - t)).exp() * e.h_2beta[i] + g0 * weighted_int);
    }

    let b_sup = (0..=n)
        .map(|i| e.h_2beta[i] + 0.5 * g0 * e.h_beta_v_int[i] - rate * (path.grid.time(i) - t0))
        .fold(f64::NEG_INFINITY, f64::max);

    let c_val = e.h_2beta[n];

    let mid = n / 2;
    let t_mid = path.grid.time(mid);
    let d_sup = (mid..=n)
        .map(|i| 0.5 * g0 * (e.h_beta_v_int[i] - e.h_beta_v_int[mid]) - rate * (path.grid.time(i) - t_mid))
        .fold(f64::NEG_INFINITY, f64::max);

    [a_sup, delta * b_sup, delta * c_val, 0.5 * delta * d_sup]
}

/// Upper ends of the admissible `γ` and `δ` for [`exponential_report`].
///
/// `γ ≤ (1+β)λ₁γ₀/2`; `δ` stays below `(1+β)λ₁γ₀/(2(2+β)²C_Bε)`, inclusive when `β > 0`.
pub fn estimate_ranges(model: &ModelSpec, eps: f64) -> (f64, f64) {
    let beta = model.mono.beta;
    let scale = (1.0 + beta) * model.space.lambda1() * model.mono.gamma0;
    let delta_max = if eps > 0.0 {
        scale / (2.0 * (2.0 + beta).powi(2) * model.noise_consts().c_b * eps)
    } else {
        f64::INFINITY
    };
    (scale / 2.0, delta_max)
}

/// Checks the uniform energy bound and the three exponential bounds over `n_paths` paths.
///
/// Bound lines, with `C = C_{A,ρ,ε}`, `C′ = C + βC_Bε` and `t₁` the grid midpoint:
///
/// * energy: `E sup_t {e^{−γ(T−t)}‖X‖^{2+β} + γ₀∫e^{−γ(T−s)}‖X‖^β‖X‖²_V} ≤
///   2e^{−γ(T−t₀)}‖ξ‖^{2+β} + (2+β)(C + (18+10β)C_Bε)/γ`;
/// * exp_energy: `E exp{δ sup_t(‖X‖^{2+β} + (γ₀/2)∫‖X‖^β‖X‖²_V − (1+β/2)C′(t−t₀))} ≤ 2e^{δ‖ξ‖^{2+β}}`;
/// * exp_h: `E exp{δ‖X_T‖^{2+β}} ≤ 2exp{δ(‖ξ‖^{2+β} + (2+β)C′/(λ₁γ₀))}`;
/// * exp_v: `E exp{(δ/2) sup_{t≥t₁}((γ₀/2)∫_{t₁}^t‖X‖^β‖X‖²_V − (1+β/2)C′(t−t₁))} ≤
///   2exp{δ(‖ξ‖^{2+β}/2 + (2+β)C′/(2λ₁γ₀))}`.
///
/// Each line passes when the estimate is at most `1.1 ×` the bound; the
/// exponential lines are compared in log scale, so this is `ln 1.1` added to the log bound.
#[allow(clippy::too_many_arguments)]
pub fn exponential_report(
    model: &ModelSpec,
    eps: f64,
    xi: &StateVec,
    grid: &TimeGrid,
    gamma: f64,
    delta: f64,
    n_paths: usize,
    seed: u64,
) -> Result<ExponentialReport> {
    check_dim(model.dim(), xi.len())?;
    if n_paths == 0 {
        return Err(Error::InvalidParameter("n_paths must be positive".into()));
    }
    let beta = model.mono.beta;
    let l1 = model.space.lambda1();
    let g0 = model.mono.gamma0;
    let c_b = model.noise_consts().c_b;
    let (gamma_max, delta_max) = estimate_ranges(model, eps);
    if !(gamma > 0.0 && gamma <= gamma_max) {
        return Err(Error::InvalidParameter(format!(
            "gamma = {gamma} must lie in (0, {gamma_max}]"
        )));
    }
    let in_range = if beta == 0.0 {
        delta < delta_max
    } else {
        delta <= delta_max
    };
    if !(delta > 0.0 && in_range) {
        return Err(Error::InvalidParameter(format!(
            "delta = {delta} must lie in (0, {delta_max})"
        )));
    }
    let c = c_a_rho_eps(model, eps)?;
    let c_prime = c + beta * c_b * eps;
    let rate = (1.0 + beta / 2.0) * c_prime;
    let k = model.noise.u_dim();

    let stats: Vec<[f64; 4]> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let noise = brownian(grid, k, derive_seed(seed, p as u64))?;
            let path = integrate(model, eps, xi, grid, Some(&noise), None)?;
            Ok(path_statistics(model, &path, gamma, delta, rate))
        })
        .collect::<Result<_>>()?;

    let xi_p = pow_half(sq(&xi.0), 2.0 + beta);
    let span = grid.t1 - grid.t0;
    let ln2 = 2f64.ln();
    let slack = ESTIMATE_SLACK;
    let column = |j: usize| stats.iter().map(|s| s[j]).collect::<Vec<_>>();

    let a_est = column(0).iter().sum::<f64>() / n_paths as f64;
    let a_bound = 2.0 * (-gamma * span).exp() * xi_p + (2.0 + beta) * (c + (18.0 + 10.0 * beta) * c_b * eps) / gamma;
    let mut lines = vec![BoundLine {
        label: "energy".into(),
        log_scale: false,
        estimate: a_est,
        bound: a_bound,
        pass: a_est <= slack * a_bound,
    }];
    let logs = [
        ("exp_energy", ln2 + delta * xi_p),
        ("exp_h", ln2 + delta * (xi_p + (2.0 + beta) * c_prime / (l1 * g0))),
        (
            "exp_v",
            ln2 + delta * (0.5 * xi_p + 0.5 * (2.0 + beta) * c_prime / (l1 * g0)),
        ),
    ];
    for (j, (label, bound)) in logs.iter().enumerate() {
        let est = log_mean_exp(&column(j + 1));
        lines.push(BoundLine {
            label: label.to_string(),
            log_scale: true,
            estimate: est,
            bound: *bound,
            pass: est <= bound + slack.ln(),
        });
    }
    Ok(ExponentialReport {
        eps,
        beta,
        gamma,
        delta,
        c_a_rho_eps: c,
        n_paths,
        slack,
        lines,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_bad_steps() {
        assert!(TimeGrid::new(0.0, 1.0, 0.0).is_err());
        assert!(TimeGrid::new(1.0, 0.0, 0.1).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0.3).is_err());
        let g = TimeGrid::new(-2.0, 1.0, 1e-3).unwrap();
        assert_eq!(g.n_steps, 3000);
        assert_eq!(g.first_step_index(), -2000);
        assert_eq!(g.node_of(0.0), Some(2000));
    }

    #[test]
    fn windows_share_increments() {
        let deep = TimeGrid::new(-4.0, 0.0, 1e-2).unwrap();
        let shallow = TimeGrid::new(-2.0, 0.0, 1e-2).unwrap();
        let a = brownian(&deep, 3, 7).unwrap().window(-2.0, 0.0).unwrap();
        let b = brownian(&shallow, 3, 7).unwrap();
        assert_eq!(a.increments, b.increments);
    }

    #[test]
    fn log_mean_exp_is_stable() {
        let v = log_mean_exp(&[1000.0, 1000.0]);
        assert!((v - 1000.0).abs() < 1e-12);
        assert!((log_mean_exp(&[0.0, 2f64.ln()]) - 1.5f64.ln()).abs() < 1e-15);
    }
}
