//! Limited-memory BFGS with a backtracking Armijo line search.

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iter: usize,
    /// Stop when `grad_scale · ‖g‖₂` falls below this.
    pub grad_tol: f64,
    /// Multiplier turning the Euclidean gradient norm into the problem's natural norm.
    pub grad_scale: f64,
    pub armijo_c1: f64,
    pub max_halvings: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iter: 500,
            grad_tol: 1e-8,
            grad_scale: 1.0,
            armijo_c1: 1e-4,
            max_halvings: 60,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each accepted step, starting with the initial value.
    pub trace: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `f`, which returns the value and gradient or an error.
///
/// An error or nonfinite value at a trial point is treated as `+∞` and
/// shortens the step; an error at `x0` is returned.
pub fn minimize<F>(mut f: F, x0: Vec<f64>, opts: &LbfgsOptions) -> Result<LbfgsOutcome>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut x = x0;
    let (mut fx, mut g) = f(&x)?;
    let mut trace = vec![fx];
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut stall = 0;
    let n = x.len();

    for iter in 0..opts.max_iter {
        let gnorm = dot(&g, &g).sqrt();
        if opts.grad_scale * gnorm <= opts.grad_tol {
            return Ok(LbfgsOutcome {
                x,
                f: fx,
                grad_norm: gnorm,
                iterations: iter,
                converged: true,
                trace,
            });
        }

        // two-loop recursion
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let m = s_hist.len();
        let mut alpha = vec![0.0; m];
        for i in (0..m).rev() {
            let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
            alpha[i] = rho * dot(&s_hist[i], &d);
            for (dj, yj) in d.iter_mut().zip(&y_hist[i]) {
                *dj -= alpha[i] * yj;
            }
        }
        if m > 0 {
            let h0 = dot(&s_hist[m - 1], &y_hist[m - 1]) / dot(&y_hist[m - 1], &y_hist[m - 1]);
            d.iter_mut().for_each(|v| *v *= h0);
        }
        for i in 0..m {
            let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
            let b = rho * dot(&y_hist[i], &d);
            for (dj, sj) in d.iter_mut().zip(&s_hist[i]) {
                *dj += (alpha[i] - b) * sj;
            }
        }
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            // not a descent direction: restart from steepest descent
            s_hist.clear();
            y_hist.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
        }

        let mut step = if m == 0 { 1.0 / gnorm.max(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..opts.max_halvings {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            if let Ok((ft, gt)) = f(&trial) {
                if ft.is_finite() && ft <= fx + opts.armijo_c1 * step * slope {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fxn, gn)) = accepted else {
            return Ok(LbfgsOutcome {
                x,
                f: fx,
                grad_norm: gnorm,
                iterations: iter,
                converged: false,
                trace,
            });
        };

        let s: Vec<f64> = (0..n).map(|i| xn[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| gn[i] - g[i]).collect();
        if dot(&s, &y) > 1e-300 {
            if s_hist.len() == opts.memory {
                s_hist.remove(0);
                y_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(y);
        }
        let decrease = fx - fxn;
        x = xn;
        fx = fxn;
        g = gn;
        trace.push(fx);

        if decrease <= 1e-15 * fx.abs().max(1e-300) {
            stall += 1;
            if stall >= 5 {
                let gnorm = dot(&g, &g).sqrt();
                return Ok(LbfgsOutcome {
                    x,
                    f: fx,
                    grad_norm: gnorm,
                    iterations: iter + 1,
                    converged: true,
                    trace,
                });
            }
        } else {
            stall = 0;
        }
    }
    let gnorm = dot(&g, &g).sqrt();
    let converged = opts.grad_scale * gnorm <= opts.grad_tol;
    Ok(LbfgsOutcome {
        x,
        f: fx,
        grad_norm: gnorm,
        iterations: opts.max_iter,
        converged,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            Ok((v, g))
        };
        let out = minimize(f, vec![-1.2, 1.0], &LbfgsOptions::default()).unwrap();
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6);
        assert!(out.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn ill_conditioned_quadratic() {
        let scales: Vec<f64> = (0..50).map(|i| 10f64.powf(i as f64 / 20.0)).collect();
        let f = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            let v = x.iter().zip(&scales).map(|(x, s)| 0.5 * s * (x - 1.0).powi(2)).sum();
            Ok((v, x.iter().zip(&scales).map(|(x, s)| s * (x - 1.0)).collect()))
        };
        let out = minimize(f, vec![0.0; 50], &LbfgsOptions::default()).unwrap();
        assert!(out.x.iter().all(|x| (x - 1.0).abs() < 1e-6));
    }
}
