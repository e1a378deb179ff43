//! Skeleton equation `dX = A⁰(X)dt + B(X)v dt`, the Cameron–Martin action
//! and rate-function values by penalized minimum-action optimization.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::integrator::{integrate, Path, Stepper, TimeGrid};
use crate::models::ModelSpec;
use crate::optimize::{minimize, LbfgsOptions};
use crate::spectral::{diff, sq, weighted_sq, StateVec};
use crate::stationary::{pullback_sequence, MetricConfig, MetricVariant, PullbackDiagnostics};

/// Piecewise-constant control, `n_steps × K`, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Control {
    pub grid: TimeGrid,
    pub k: usize,
    pub values: Vec<f64>,
}

impl Control {
    pub fn zeros(grid: TimeGrid, k: usize) -> Self {
        Self {
            grid,
            k,
            values: vec![0.0; grid.n_steps * k],
        }
    }

    pub fn new(grid: TimeGrid, k: usize, values: Vec<f64>) -> Result<Self> {
        check_dim(grid.n_steps * k, values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("control values".into()));
        }
        Ok(Self { grid, k, values })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.k..(i + 1) * self.k]
    }

    /// `∫‖v‖²_U ds`.
    pub fn l2_sq(&self) -> f64 {
        self.grid.dt * sq(&self.values)
    }

    /// Same control on a larger grid with the same step, zero outside the original window.
    pub fn extended(&self, t0: f64, t1: f64) -> Result<Control> {
        let grid = TimeGrid::new(t0, t1, self.grid.dt)?;
        let offset = grid
            .node_of(self.grid.t0)
            .filter(|o| o + self.grid.n_steps <= grid.n_steps)
            .ok_or_else(|| Error::InvalidParameter("the extended window must contain the control window".into()))?;
        let mut out = Control::zeros(grid, self.k);
        out.values[offset * self.k..(offset + self.grid.n_steps) * self.k].copy_from_slice(&self.values);
        Ok(out)
    }

    /// Restriction to the node-aligned window `[ta, tb]`.
    pub fn window(&self, ta: f64, tb: f64) -> Result<Control> {
        let (ia, ib) = match (self.grid.node_of(ta), self.grid.node_of(tb)) {
            (Some(a), Some(b)) if b > a => (a, b),
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "[{ta}, {tb}] is not a window of the control"
                )))
            }
        };
        Ok(Control {
            grid: TimeGrid::new(self.grid.time(ia), self.grid.time(ib), self.grid.dt)?,
            k: self.k,
            values: self.values[ia * self.k..ib * self.k].to_vec(),
        })
    }
}

/// Cameron–Martin action `½∫‖v‖²_U ds`.
pub fn action(control: &Control) -> f64 {
    0.5 * control.l2_sq()
}

/// Deterministic skeleton path driven by `control` (no Stratonovich correction).
pub fn skeleton_solve(model: &ModelSpec, xi: &StateVec, grid: &TimeGrid, control: &Control) -> Result<Path> {
    integrate(model, 0.0, xi, grid, None, Some(control))
}

/// Pull-back of the skeleton equation; the control is zero outside its window.
///
/// Runs start from `xi` at each `−n` of `schedule` and end at the control's end time.
pub fn skeleton_pullback(
    model: &ModelSpec,
    xi: &StateVec,
    control: &Control,
    schedule: &[u32],
    tol: f64,
) -> Result<(Path, PullbackDiagnostics)> {
    if schedule.is_empty() || schedule[0] == 0 || schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "the pull-back schedule must be positive and increasing".into(),
        ));
    }
    check_dim(model.dim(), xi.len())?;
    check_dim(model.noise.u_dim(), control.k)?;
    let depth = *schedule.last().expect("nonempty") as f64;
    let t_end = control.grid.t1;
    if !(t_end > -(schedule[0] as f64)) {
        return Err(Error::InvalidParameter(
            "the control must end after the shallowest start".into(),
        ));
    }
    let full = control.extended(control.grid.t0.min(-depth), t_end)?;
    let gamma = 2.0
        * model
            .drift
            .dissipation()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
            .max(0.0);
    let metric = MetricConfig {
        n_max: depth as usize,
        gamma,
        variant: MetricVariant::Min,
    };
    pullback_sequence(schedule, t_end, tol, metric, &model.space, |start| {
        let c = full.window(start, t_end)?;
        integrate(model, 0.0, xi, &c.grid, None, Some(&c))
    })
}

/// Value, gradient and endpoint of `J(v) = action(v) + μ‖X_v(t₁) − target‖²_H`.
fn penalized_objective(
    model: &ModelSpec,
    xi: &StateVec,
    control: &Control,
    target: &StateVec,
    mu: f64,
) -> Result<(f64, Vec<f64>, StateVec)> {
    let grid = &control.grid;
    let path = skeleton_solve(model, xi, grid, control)?;
    let dt = grid.dt;
    let end = path.last();
    let gap = diff(&end.0, &target.0);
    let value = action(control) + mu * sq(&gap);

    let n = model.dim();
    let damp: Vec<f64> = model.drift.dissipation().iter().map(|d| 1.0 / (1.0 + dt * d)).collect();
    let mut lambda: Vec<f64> = gap.iter().map(|g| 2.0 * mu * g).collect();
    let mut grad = vec![0.0; control.values.len()];
    let mut p_lambda = vec![0.0; n];
    for i in (0..grid.n_steps).rev() {
        let x = &path.states[i].0;
        let v = control.row(i);
        for j in 0..n {
            p_lambda[j] = damp[j] * lambda[j];
        }
        let bt = model.noise.adjoint_apply(x, &p_lambda);
        for (c, g) in grad[i * control.k..(i + 1) * control.k].iter_mut().enumerate() {
            *g = dt * v[c] + dt * bt[c];
        }
        let mut jac = model.drift.explicit_jacobian(0.0, x);
        jac += model.noise.apply_jacobian(x, v);
        let pl = DVector::from_column_slice(&p_lambda);
        let back = jac.tr_mul(&pl);
        for j in 0..n {
            lambda[j] = p_lambda[j] + dt * back[j];
        }
    }
    Ok((value, grad, end.clone()))
}

/// Gradient of the penalized objective by a reverse sweep through the stored forward states.
pub fn adjoint_gradient(
    model: &ModelSpec,
    xi: &StateVec,
    grid: &TimeGrid,
    control: &Control,
    target: &StateVec,
    mu: f64,
) -> Result<Vec<f64>> {
    if !(mu > 0.0) {
        return Err(Error::InvalidParameter("the penalty weight must be positive".into()));
    }
    check_controls(model, xi, grid, control, target)?;
    Ok(penalized_objective(model, xi, control, target, mu)?.1)
}

/// Value of the penalized objective.
pub fn penalized_value(
    model: &ModelSpec,
    xi: &StateVec,
    grid: &TimeGrid,
    control: &Control,
    target: &StateVec,
    mu: f64,
) -> Result<f64> {
    check_controls(model, xi, grid, control, target)?;
    Ok(penalized_objective(model, xi, control, target, mu)?.0)
}

fn check_controls(
    model: &ModelSpec,
    xi: &StateVec,
    grid: &TimeGrid,
    control: &Control,
    target: &StateVec,
) -> Result<()> {
    check_dim(model.dim(), xi.len())?;
    check_dim(model.dim(), target.len())?;
    check_dim(model.noise.u_dim(), control.k)?;
    if control.grid != *grid {
        return Err(Error::InvalidParameter(
            "the control must live on the state grid".into(),
        ));
    }
    Ok(())
}

/// Settings of the minimum-action optimization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateOptions {
    pub dt: f64,
    pub mu_schedule: Vec<f64>,
    pub max_iter: usize,
    /// Tolerance on the `L²` norm of the objective's gradient.
    pub grad_tol: f64,
    /// Largest endpoint `H`-distance accepted as reaching the target.
    pub gap_tol: f64,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            mu_schedule: vec![10.0, 100.0, 1000.0],
            max_iter: 500,
            grad_tol: 1e-7,
            gap_tol: 1e-2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub mu: f64,
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateResult {
    /// Action of the best control.
    pub value: f64,
    pub control: Control,
    pub endpoint: StateVec,
    pub endpoint_gap: f64,
    pub iterations: usize,
    /// True when the endpoint is within `gap_tol` of the target.
    pub converged: bool,
    pub trace: Vec<TraceEntry>,
}

/// Minimum action to steer the skeleton from `xi` at `t0` to `target` at `t1`.
///
/// Minimizes the penalized objective with L-BFGS over an increasing penalty
/// schedule, warm-starting each stage. An unreachable target is reported
/// with `converged = false` and the best control found.
pub fn rate_endpoint(
    model: &ModelSpec,
    xi: &StateVec,
    t0: f64,
    t1: f64,
    target: &StateVec,
    opts: &RateOptions,
) -> Result<RateResult> {
    check_dim(model.dim(), xi.len())?;
    check_dim(model.dim(), target.len())?;
    if opts.mu_schedule.is_empty() || opts.mu_schedule.iter().any(|m| !(*m > 0.0)) {
        return Err(Error::InvalidParameter(
            "the penalty schedule must be nonempty and positive".into(),
        ));
    }
    let grid = TimeGrid::new(t0, t1, opts.dt)?;
    let k = model.noise.u_dim();
    let mut control = Control::zeros(grid, k);
    let mut trace = Vec::new();
    let mut iterations = 0;
    let lopts = LbfgsOptions {
        max_iter: opts.max_iter,
        grad_tol: opts.grad_tol,
        grad_scale: 1.0 / grid.dt.sqrt(),
        ..LbfgsOptions::default()
    };
    for &mu in &opts.mu_schedule {
        let out = minimize(
            |v| {
                let c = Control {
                    grid,
                    k,
                    values: v.to_vec(),
                };
                let (f, g, _) = penalized_objective(model, xi, &c, target, mu)?;
                Ok((f, g))
            },
            control.values.clone(),
            &lopts,
        )?;
        iterations += out.iterations;
        trace.extend(out.trace.iter().map(|f| TraceEntry { mu, objective: *f }));
        control.values = out.x;
    }
    let endpoint = skeleton_solve(model, xi, &grid, &control)?.last().clone();
    let endpoint_gap = sq(&diff(&endpoint.0, &target.0)).sqrt();
    Ok(RateResult {
        value: action(&control),
        converged: endpoint_gap <= opts.gap_tol,
        control,
        endpoint,
        endpoint_gap,
        iterations,
        trace,
    })
}

/// Action needed for the skeleton to follow `path` exactly; `None` means `+∞`.
///
/// Each step's control is the minimum-norm solution of the discrete skeleton
/// update; a step whose required forcing leaves the range of `B(x)` makes
/// the path unattainable.
pub fn path_rate(model: &ModelSpec, path: &Path) -> Result<Option<f64>> {
    let dt = path.grid.dt;
    let n = model.dim();
    let mut total = 0.0;
    let mut stepper = Stepper::new(model, 0.0);
    let mut free = vec![0.0; n];
    for i in 0..path.grid.n_steps {
        let x = &path.states[i].0;
        let y = &path.states[i + 1].0;
        check_dim(n, x.len())?;
        stepper.advance(x, dt, None, None, &mut free);
        // undo the implicit division to get the forcing the step needs
        let r: Vec<f64> = (0..n)
            .map(|j| (y[j] - free[j]) * (1.0 + dt * model.drift.dissipation()[j]) / dt)
            .collect();
        let b: DMatrix<f64> = model.noise.matrix(x);
        let rv = DVector::from_column_slice(&r);
        let svd = b.clone().svd(true, true);
        let v = svd
            .solve(&rv, 1e-12 * svd.singular_values.max().max(1e-300))
            .map_err(|e| Error::InvalidParameter(e.into()))?;
        let resid = (&b * &v - &rv).norm();
        if resid > 1e-8 * rv.norm().max(1.0) {
            return Ok(None);
        }
        total += 0.5 * dt * v.norm_squared();
    }
    Ok(Some(total))
}

/// One row of the quasi-potential comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiRow {
    pub v_norm_sq: f64,
    pub rate: f64,
    /// `rate / ‖φ‖²_V`, absent for `φ = 0`.
    pub ratio: Option<f64>,
    pub endpoint_gap: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiReport {
    pub t_back: f64,
    pub rows: Vec<QuasiRow>,
    /// `(max − min)/mean` of the defined ratios.
    pub ratio_spread: f64,
    pub mean_ratio: f64,
}

/// Computes the rate of each target from the origin over `[−t_back, 0]` and
/// compares it with `‖φ‖²_V`.
///
/// Needs additive noise acting on every retained mode.
pub fn quasipotential_crosscheck(
    model: &ModelSpec,
    targets: &[StateVec],
    t_back: f64,
    opts: &RateOptions,
) -> Result<QuasiReport> {
    if !model.noise.is_additive() {
        return Err(Error::Configuration(
            "the quasi-potential check needs additive noise".into(),
        ));
    }
    let b = model.noise.matrix(&model.space.zero().0);
    let covered = (0..model.dim()).all(|r| b.row(r).iter().any(|v| *v != 0.0));
    if !covered {
        return Err(Error::Configuration("the noise must act on every retained mode".into()));
    }
    let xi = model.space.zero();
    let rows: Vec<QuasiRow> = targets
        .par_iter()
        .map(|phi| {
            check_dim(model.dim(), phi.len())?;
            let res = rate_endpoint(model, &xi, -t_back, 0.0, phi, opts)?;
            let v = weighted_sq(model.space.weights(), &phi.0);
            Ok(QuasiRow {
                v_norm_sq: v,
                rate: res.value,
                ratio: if v > 0.0 { Some(res.value / v) } else { None },
                endpoint_gap: res.endpoint_gap,
                converged: res.converged,
            })
        })
        .collect::<Result<_>>()?;
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    let (mean_ratio, ratio_spread) = if ratios.is_empty() {
        (0.0, 0.0)
    } else {
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        (mean, (max - min) / mean)
    };
    Ok(QuasiReport {
        t_back,
        rows,
        ratio_spread,
        mean_ratio,
    })
}
