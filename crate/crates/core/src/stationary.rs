//! Pull-back construction of the stationary solution, truncated path-space
//! metrics, invariant-measure sampling and a two-sample stationarity test.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::framework::admissible_report;
use crate::integrator::{brownian, integrate, integrate_nodes, Path, TimeGrid};
use crate::models::ModelSpec;
use crate::rng::derive_seed;
use crate::spectral::{diff, sq, weighted_sq, GalerkinSpace, StateVec};

/// How the sup-`H` and integrated-`V` terms of one window are combined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricVariant {
    /// `1 ∧ S_N ∧ I_N`, the literal minimum.
    #[default]
    Min,
    /// `1 ∧ (S_N + I_N)`.
    Sum,
}

/// Truncated path metric `(Σ_{N ≤ n_max} 2^{−N}[1 ∧ S_N ∧ I_N])^{1/2}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub n_max: usize,
    /// Rate of the weight `e^{−γ(N−s)}` inside `S_N`.
    pub gamma: f64,
    pub variant: MetricVariant,
}

impl MetricConfig {
    fn validate(&self) -> Result<()> {
        if self.n_max == 0 {
            return Err(Error::InvalidParameter("metric n_max must be at least 1".into()));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(
                "metric gamma must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Path distance over the windows `[−N, N]`, each clipped to the paths' support.
///
/// `S_N = sup e^{−γ(N−s)}‖x_s−y_s‖²_H` over grid nodes, `I_N = ∫‖x_s−y_s‖²_V ds` by trapezoid.
pub fn d_metric(x: &Path, y: &Path, cfg: &MetricConfig, space: &GalerkinSpace) -> Result<f64> {
    cfg.validate()?;
    let g = &x.grid;
    if x.states.len() != y.states.len()
        || g.n_steps != y.grid.n_steps
        || (g.dt - y.grid.dt).abs() > 1e-12 * g.dt
        || (g.t0 - y.grid.t0).abs() > 1e-9 * g.dt
    {
        return Err(Error::InvalidParameter("paths must share a grid".into()));
    }
    let n = x.states.len();
    let mut h = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for (a, b) in x.states.iter().zip(&y.states) {
        check_dim(space.dim(), a.len())?;
        check_dim(space.dim(), b.len())?;
        let d = diff(&a.0, &b.0);
        h.push(sq(&d));
        v.push(weighted_sq(space.weights(), &d));
    }
    let mut total = 0.0;
    let mut scale = 1.0;
    for big_n in 1..=cfg.n_max {
        scale *= 0.5;
        let nf = big_n as f64;
        let lo = (-nf).max(g.t0);
        let hi = nf.min(g.t1);
        if lo > hi {
            continue;
        }
        let ia = ((lo - g.t0) / g.dt - 1e-9).ceil().max(0.0) as usize;
        let ib = (((hi - g.t0) / g.dt + 1e-9).floor() as usize).min(g.n_steps);
        if ia > ib {
            continue;
        }
        let mut s_sup: f64 = 0.0;
        let mut integral = 0.0;
        for i in ia..=ib {
            let t = g.time(i);
            let wgt = if cfg.gamma > 0.0 {
                (-cfg.gamma * (nf - t)).exp()
            } else {
                1.0
            };
            s_sup = s_sup.max(wgt * h[i]);
            if i > ia {
                integral += 0.5 * g.dt * (v[i - 1] + v[i]);
            }
        }
        let term = match cfg.variant {
            MetricVariant::Min => 1f64.min(s_sup).min(integral),
            MetricVariant::Sum => 1f64.min(s_sup + integral),
        };
        total += scale * term;
    }
    Ok(total.sqrt())
}

/// Settings shared by every pull-back run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PullbackConfig {
    /// Increasing start depths `n`; runs start at `−n`.
    pub schedule: Vec<u32>,
    pub t_end: f64,
    pub dt: f64,
    pub tol: f64,
    /// Weight rate of the metric; `None` picks twice the smallest dissipation rate.
    pub metric_gamma: Option<f64>,
    pub metric_variant: MetricVariant,
    /// Reject intensities at or above the well-posedness threshold.
    pub enforce_thresholds: bool,
}

impl Default for PullbackConfig {
    fn default() -> Self {
        Self {
            schedule: vec![2, 4, 8, 16],
            t_end: 0.0,
            dt: 1e-3,
            tol: 1e-4,
            metric_gamma: None,
            metric_variant: MetricVariant::Min,
            enforce_thresholds: true,
        }
    }
}

impl PullbackConfig {
    fn validate(&self) -> Result<()> {
        if self.schedule.is_empty() {
            return Err(Error::InvalidParameter("the pull-back schedule is empty".into()));
        }
        if self.schedule[0] == 0 || self.schedule.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "the pull-back schedule must be positive and increasing".into(),
            ));
        }
        if !(self.dt > 0.0) || !(self.tol > 0.0) {
            return Err(Error::InvalidParameter("pull-back dt and tol must be positive".into()));
        }
        if !(self.t_end > -(self.schedule[0] as f64)) {
            return Err(Error::InvalidParameter(
                "t_end must lie after the shallowest start time".into(),
            ));
        }
        Ok(())
    }

    pub fn depth(&self) -> u32 {
        *self.schedule.last().expect("validated schedule")
    }

    fn metric(&self, model: &ModelSpec) -> MetricConfig {
        let gamma = self.metric_gamma.unwrap_or_else(|| {
            2.0 * model
                .drift
                .dissipation()
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min)
                .max(0.0)
        });
        MetricConfig {
            n_max: self.depth() as usize,
            gamma,
            variant: self.metric_variant,
        }
    }
}

/// Diagnostics of a pull-back sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PullbackDiagnostics {
    pub start_times: Vec<f64>,
    /// Distance between the runs from `−n_{i+1}` and `−n_i`, measured on `[−n_i, t_end]`.
    pub pair_distances: Vec<f64>,
    /// Least-squares slope of `log d` against `n_i`; `None` with fewer than two positive distances.
    pub fitted_rate: Option<f64>,
    pub converged: bool,
    pub metric: MetricConfig,
}

fn check_admissible(model: &ModelSpec, eps: f64, enforce: bool) -> Result<()> {
    if enforce {
        let bound = admissible_report(model)?.eps_tilde;
        if !(eps < bound) {
            return Err(Error::Inadmissible { eps, bound });
        }
    }
    Ok(())
}

fn fit_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

/// Runs from every start time of `schedule` through `run` and compares consecutive runs.
pub(crate) fn pullback_sequence<F>(
    schedule: &[u32],
    t_end: f64,
    tol: f64,
    metric: MetricConfig,
    space: &GalerkinSpace,
    run: F,
) -> Result<(Path, PullbackDiagnostics)>
where
    F: Fn(f64) -> Result<Path> + Sync,
{
    let paths: Vec<Path> = schedule.par_iter().map(|&n| run(-(n as f64))).collect::<Result<_>>()?;
    let mut pair_distances = Vec::with_capacity(paths.len().saturating_sub(1));
    for i in 1..paths.len() {
        let start = -(schedule[i - 1] as f64);
        let deep = paths[i].window(start, t_end)?;
        pair_distances.push(d_metric(&deep, &paths[i - 1], &metric, space)?);
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = pair_distances
        .iter()
        .enumerate()
        .filter(|(_, d)| **d > 0.0)
        .map(|(i, d)| (schedule[i] as f64, d.ln()))
        .unzip();
    let diagnostics = PullbackDiagnostics {
        start_times: schedule.iter().map(|n| -(*n as f64)).collect(),
        converged: pair_distances.last().is_some_and(|d| *d < tol),
        fitted_rate: fit_slope(&xs, &ys),
        pair_distances,
        metric,
    };
    Ok((paths.into_iter().last().expect("nonempty schedule"), diagnostics))
}

/// Solves from each `−n` of the schedule with one shared double-sided noise path.
///
/// Returns the deepest run on `[−n_last, t_end]` together with the distances
/// between consecutive runs.
pub fn pullback(
    model: &ModelSpec,
    eps: f64,
    xi: &StateVec,
    cfg: &PullbackConfig,
    seed: u64,
) -> Result<(Path, PullbackDiagnostics)> {
    cfg.validate()?;
    check_dim(model.dim(), xi.len())?;
    check_admissible(model, eps, cfg.enforce_thresholds)?;
    let deep_grid = TimeGrid::new(-(cfg.depth() as f64), cfg.t_end, cfg.dt)?;
    let noise = brownian(&deep_grid, model.noise.u_dim(), seed)?;
    pullback_sequence(
        &cfg.schedule,
        cfg.t_end,
        cfg.tol,
        cfg.metric(model),
        &model.space,
        |start| {
            let window = noise.window(start, cfg.t_end)?;
            integrate(model, eps, xi, &window.grid, Some(&window), None)
        },
    )
}

/// The deepest pull-back run alone, evaluated at the node-aligned `times`.
#[allow(clippy::too_many_arguments)]
fn pullback_states(
    model: &ModelSpec,
    eps: f64,
    xi: &StateVec,
    depth: u32,
    t_end: f64,
    dt: f64,
    times: &[f64],
    seed: u64,
) -> Result<Vec<StateVec>> {
    let grid = TimeGrid::new(-(depth as f64), t_end, dt)?;
    let nodes = times
        .iter()
        .map(|t| {
            grid.node_of(*t)
                .ok_or_else(|| Error::InvalidParameter(format!("t = {t} is not a grid node")))
        })
        .collect::<Result<Vec<_>>>()?;
    integrate_nodes(model, eps, xi, &grid, seed, &nodes)
}

/// Independent draws of the stationary solution at a fixed time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub values: Vec<StateVec>,
    pub time: f64,
    pub eps: f64,
    pub seeds: Vec<u64>,
}

/// `n_draws` pull-back endpoints at `cfg.t_end` from the deepest start, started at zero.
///
/// Draw `i` uses the noise seed `derive_seed(master_seed, i)`.
pub fn invariant_samples(
    model: &ModelSpec,
    eps: f64,
    n_draws: usize,
    cfg: &PullbackConfig,
    master_seed: u64,
) -> Result<SampleSet> {
    cfg.validate()?;
    check_admissible(model, eps, cfg.enforce_thresholds)?;
    let seeds: Vec<u64> = (0..n_draws as u64).map(|i| derive_seed(master_seed, i)).collect();
    let xi = model.space.zero();
    let values = seeds
        .par_iter()
        .map(|s| {
            pullback_states(model, eps, &xi, cfg.depth(), cfg.t_end, cfg.dt, &[cfg.t_end], *s)
                .map(|mut v| v.pop().expect("one time requested"))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SampleSet {
        values,
        time: cfg.t_end,
        eps,
        seeds,
    })
}

/// How the two compared samples are produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum StationarityMode {
    /// Pull-back draws from the deepest start of the configuration.
    Pullback(PullbackConfig),
    /// Plain forward runs from `xi` at time `start`, with no pull-back.
    Transient { xi: StateVec, start: f64, dt: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationarityResult {
    pub times: (f64, f64),
    pub n_draws: usize,
    /// Two-sample energy-distance statistic.
    pub statistic: f64,
    /// Permutation p-value.
    pub p_value: f64,
    pub n_permutations: usize,
    pub level: f64,
    /// True when equality of the two laws is not rejected.
    pub p_flag: bool,
}

/// Number of permutations in [`stationarity_test`].
pub const PERMUTATIONS: usize = 499;
/// Rejection level of [`stationarity_test`].
pub const TEST_LEVEL: f64 = 0.01;

/// Compares the laws at `t_a` and `t_b` with an energy-distance permutation test.
///
/// Draw `i` evaluates one trajectory, driven by `derive_seed(seed, i)`, at
/// both times, so equal times give the statistic 0.
pub fn stationarity_test(
    model: &ModelSpec,
    eps: f64,
    times: (f64, f64),
    n_draws: usize,
    mode: &StationarityMode,
    seed: u64,
) -> Result<StationarityResult> {
    if n_draws < 2 {
        return Err(Error::InvalidParameter(
            "the stationarity test needs at least two draws".into(),
        ));
    }
    let (ta, tb) = times;
    let t_last = ta.max(tb);
    let seeds: Vec<u64> = (0..n_draws as u64).map(|i| derive_seed(seed, i)).collect();
    let pairs: Vec<Vec<StateVec>> = match mode {
        StationarityMode::Pullback(cfg) => {
            cfg.validate()?;
            check_admissible(model, eps, cfg.enforce_thresholds)?;
            if !(ta.min(tb) > -(cfg.depth() as f64)) {
                return Err(Error::InvalidParameter(
                    "both times must follow the deepest pull-back start".into(),
                ));
            }
            let xi = model.space.zero();
            seeds
                .par_iter()
                .map(|s| pullback_states(model, eps, &xi, cfg.depth(), t_last, cfg.dt, &[ta, tb], *s))
                .collect::<Result<_>>()?
        }
        StationarityMode::Transient { xi, start, dt } => {
            check_dim(model.dim(), xi.len())?;
            if !(*start <= ta.min(tb)) {
                return Err(Error::InvalidParameter(
                    "the transient start must precede both times".into(),
                ));
            }
            seeds
                .par_iter()
                .map(|s| {
                    if *start == t_last {
                        return Ok(vec![xi.clone(), xi.clone()]);
                    }
                    let grid = TimeGrid::new(*start, t_last, *dt)?;
                    let noise = brownian(&grid, model.noise.u_dim(), *s)?;
                    let path = integrate(model, eps, xi, &grid, Some(&noise), None)?;
                    Ok(vec![path.at(ta)?.clone(), path.at(tb)?.clone()])
                })
                .collect::<Result<_>>()?
        }
    };
    let (statistic, p_value) = if ta == tb {
        // both samples are the same draws; skip the rounding noise of the sums
        (0.0, 1.0)
    } else {
        let pooled: Vec<&StateVec> = pairs.iter().map(|p| &p[0]).chain(pairs.iter().map(|p| &p[1])).collect();
        energy_permutation_test(&pooled, n_draws, PERMUTATIONS, derive_seed(seed, u64::MAX))
    };
    Ok(StationarityResult {
        times,
        n_draws,
        statistic,
        p_value,
        n_permutations: PERMUTATIONS,
        level: TEST_LEVEL,
        p_flag: p_value > TEST_LEVEL,
    })
}

/// Energy distance between the first `n` and the remaining pooled points,
/// with its permutation p-value.
pub fn energy_permutation_test(pooled: &[&StateVec], n: usize, permutations: usize, seed: u64) -> (f64, f64) {
    let total = pooled.len();
    let m = total - n;
    let mut dist = vec![0.0; total * total];
    for i in 0..total {
        for j in (i + 1)..total {
            let d = sq(&diff(&pooled[i].0, &pooled[j].0)).sqrt();
            dist[i * total + j] = d;
            dist[j * total + i] = d;
        }
    }
    let all_sum: f64 = dist.iter().sum();
    let stat = |idx: &[usize]| -> f64 {
        let within = |s: &[usize]| -> f64 {
            let mut acc = 0.0;
            for &i in s {
                let row = &dist[i * total..(i + 1) * total];
                for &j in s {
                    acc += row[j];
                }
            }
            acc
        };
        let (a, b) = idx.split_at(n);
        let (saa, sbb) = (within(a), within(b));
        let cross = 0.5 * (all_sum - saa - sbb);
        let (nf, mf) = (n as f64, m as f64);
        let e = 2.0 * cross / (nf * mf) - saa / (nf * nf) - sbb / (mf * mf);
        nf * mf / (nf + mf) * e
    };
    let mut idx: Vec<usize> = (0..total).collect();
    let observed = stat(&idx);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut exceed = 0;
    for _ in 0..permutations {
        idx.shuffle(&mut rng);
        if stat(&idx) >= observed - 1e-12 * observed.abs() {
            exceed += 1;
        }
    }
    (observed, (1 + exceed) as f64 / (1 + permutations) as f64)
}
