//! One function per subcommand; each writes its JSON report, CSV files and plots.

use monodrift_core::framework::{audit_condition, AuditReport, Condition, ConstantsReport, RhoFit};
use monodrift_core::integrator::{
    brownian, energy_series, estimate_ranges, exponential_report, simulate, Path, TimeGrid,
};
use monodrift_core::probe::{
    estimate_probability, slope_fit, trend_inversions, EventKind, EventSpec, ProbabilityEstimate, ProbeResult,
};
use monodrift_core::rng::derive_seed;
use monodrift_core::skeleton::{quasipotential_crosscheck, rate_endpoint, skeleton_solve, RateOptions};
use monodrift_core::spectral::{h_norm_sq, StateVec};
use monodrift_core::stationary::{
    invariant_samples, pullback, stationarity_test, MetricVariant, PullbackConfig, StationarityMode,
};
use monodrift_core::Error;
use serde::Serialize;

use crate::config::Resolved;
use crate::output::{indexed, num, opt, Csv, Outputs};
use crate::plot::{line_plot, Series};
use crate::setup::Prepared;
use crate::CliError;

pub struct Ctx<'a> {
    pub cfg: &'a Resolved,
    pub p: &'a Prepared,
    pub out: &'a mut Outputs,
}

impl Ctx<'_> {
    fn plots(&self) -> bool {
        self.cfg.bool("", "plots").unwrap_or(true)
    }

    fn plot(&mut self, name: &str, title: &str, x: &str, y: &str, series: &[Series]) -> Result<(), CliError> {
        if self.plots() {
            self.out.text(name, &line_plot(title, x, y, series))?;
        }
        Ok(())
    }
}

fn path_csv(path: &Path) -> Csv {
    let dim = path.states.first().map_or(0, |s| s.len());
    let mut csv = Csv::new(&[vec!["t".to_string()], indexed("coeff", dim)].concat());
    for (i, x) in path.states.iter().enumerate() {
        csv.row(
            std::iter::once(num(path.grid.time(i)))
                .chain(x.0.iter().map(|v| num(*v)))
                .collect(),
        );
    }
    csv
}

fn grid(cfg: &Resolved) -> Result<TimeGrid, CliError> {
    Ok(TimeGrid::new(
        cfg.f64("grid", "t0").unwrap_or(0.0),
        cfg.f64("grid", "t1").unwrap_or(1.0),
        cfg.f64("grid", "dt").unwrap_or(1e-3),
    )?)
}

fn pullback_config(cfg: &Resolved) -> PullbackConfig {
    let d = PullbackConfig::default();
    PullbackConfig {
        schedule: cfg
            .ints("pullback", "schedule")
            .map_or(d.schedule, |s| s.into_iter().map(|x| x as u32).collect()),
        t_end: cfg.f64("pullback", "t_end").unwrap_or(d.t_end),
        dt: cfg.f64("pullback", "dt").unwrap_or(d.dt),
        tol: cfg.f64("pullback", "tol").unwrap_or(d.tol),
        metric_gamma: cfg.f64("pullback", "metric_gamma"),
        metric_variant: match cfg.str("pullback", "metric_variant") {
            Some("sum") => MetricVariant::Sum,
            _ => MetricVariant::Min,
        },
        enforce_thresholds: cfg.bool("", "enforce_thresholds").unwrap_or(true),
    }
}

fn rate_options(cfg: &Resolved) -> RateOptions {
    let d = RateOptions::default();
    RateOptions {
        dt: cfg.f64("rate", "dt").unwrap_or(d.dt),
        mu_schedule: cfg.floats("rate", "mu_schedule").unwrap_or(d.mu_schedule),
        max_iter: cfg.int("rate", "max_iter").map_or(d.max_iter, |x| x as usize),
        grad_tol: cfg.f64("rate", "grad_tol").unwrap_or(d.grad_tol),
        gap_tol: cfg.f64("rate", "gap_tol").unwrap_or(d.gap_tol),
    }
}

#[derive(Serialize)]
struct ModelSummary {
    name: String,
    dim: usize,
    noise: String,
    noise_columns: usize,
    gamma0: f64,
    beta: f64,
    c_rho1: Option<f64>,
    c_rho2: f64,
    c_b: f64,
    l_b: f64,
    lambda1: f64,
}

fn summary(p: &Prepared) -> ModelSummary {
    let m = &p.model;
    let c = m.noise_consts();
    ModelSummary {
        name: m.name.clone(),
        dim: m.dim(),
        noise: m.noise.kind().to_string(),
        noise_columns: m.noise.u_dim(),
        gamma0: m.mono.gamma0,
        beta: m.mono.beta,
        c_rho1: m.mono.c_rho1,
        c_rho2: m.mono.c_rho2,
        c_b: c.c_b,
        l_b: c.l_b,
        lambda1: m.space.lambda1(),
    }
}

#[derive(Serialize)]
struct CheckReport {
    model: ModelSummary,
    constants: ConstantsReport,
    rho_fit: Option<RhoFit>,
    eps: f64,
    tol: f64,
    all_passed: bool,
    audits: Vec<AuditReport>,
}

pub fn check(ctx: &mut Ctx) -> Result<(), CliError> {
    let (cfg, p) = (ctx.cfg, ctx.p);
    let n = cfg.int("check", "samples").unwrap_or(10_000) as usize;
    let radius = cfg.f64("check", "radius").unwrap_or(2.0);
    let tol = cfg.f64("check", "tol").unwrap_or(1e-9);
    let mut conditions = Vec::new();
    for c in cfg.strs("check", "conditions").unwrap_or_default() {
        let parsed: Condition = c.parse().map_err(|_| {
            CliError::Config(
                cfg.error("check", "conditions", format!("unknown condition {c}"))
                    .into(),
            )
        })?;
        conditions.push(parsed);
    }
    let audits = conditions
        .iter()
        .map(|c| audit_condition(&p.model, p.eps, *c, n, radius, p.seed))
        .collect::<Result<Vec<_>, _>>()?;
    let mut csv = Csv::new(&["condition", "worst_margin", "witness_index", "passed"]);
    for a in &audits {
        csv.row(vec![
            a.condition.to_string(),
            num(a.worst_margin),
            a.witness_index.to_string(),
            a.passed(tol).to_string(),
        ]);
    }
    ctx.out.csv("audits.csv", csv)?;
    let report = CheckReport {
        model: summary(p),
        constants: p.constants.clone(),
        rho_fit: p.rho_fit.clone(),
        eps: p.eps,
        tol,
        all_passed: audits.iter().all(|a| a.passed(tol)),
        audits,
    };
    ctx.out.json("report.json", &report)?;
    Ok(())
}

#[derive(Serialize)]
struct SimulateReport {
    model: ModelSummary,
    eps: f64,
    grid: TimeGrid,
    seed: u64,
    final_h_sq: f64,
    max_h_sq: f64,
}

pub fn simulate_run(ctx: &mut Ctx) -> Result<(), CliError> {
    let p = ctx.p;
    let g = grid(ctx.cfg)?;
    let noise = brownian(&g, p.model.noise.u_dim(), p.seed)?;
    let path = simulate(&p.model, p.eps, &p.xi, &g, &noise, None)?;
    let e = energy_series(&p.model, &path);
    ctx.out.csv("path.csv", path_csv(&path))?;
    let mut csv = Csv::new(&["t", "h_sq", "v_sq_int", "h_beta_v_int", "h_2beta"]);
    for i in 0..e.times.len() {
        csv.row(vec![
            num(e.times[i]),
            num(e.h_sq[i]),
            num(e.v_sq_int[i]),
            num(e.h_beta_v_int[i]),
            num(e.h_2beta[i]),
        ]);
    }
    ctx.out.csv("energy.csv", csv)?;
    let series = [
        Series {
            name: "|X|_H^2",
            points: e.times.iter().copied().zip(e.h_sq.iter().copied()).collect(),
        },
        Series {
            name: "int |X|_V^2",
            points: e.times.iter().copied().zip(e.v_sq_int.iter().copied()).collect(),
        },
    ];
    ctx.plot("energy.svg", "Trajectory energies", "t", "energy", &series)?;
    let report = SimulateReport {
        model: summary(p),
        eps: p.eps,
        grid: g,
        seed: p.seed,
        final_h_sq: *e.h_sq.last().unwrap_or(&0.0),
        max_h_sq: e.h_sq.iter().copied().fold(0.0, f64::max),
    };
    ctx.out.json("report.json", &report)?;
    Ok(())
}

#[derive(Serialize)]
struct EstimatesReport {
    model: ModelSummary,
    eps: f64,
    grid: TimeGrid,
    gamma_max: f64,
    delta_max: f64,
    all_pass: bool,
    reports: Vec<monodrift_core::integrator::ExponentialReport>,
}

pub fn estimates(ctx: &mut Ctx) -> Result<(), CliError> {
    let (cfg, p) = (ctx.cfg, ctx.p);
    let g = grid(cfg)?;
    let n = cfg.int("estimates", "paths").unwrap_or(200) as usize;
    let (gamma_max, delta_max) = estimate_ranges(&p.model, p.eps);
    if !delta_max.is_finite() {
        return Err(CliError::Config(
            cfg.error("", "eps", "the exponential estimates need eps > 0").into(),
        ));
    }
    let mut reports = Vec::new();
    for gf in cfg.floats("estimates", "gamma_fractions").unwrap_or_default() {
        for df in cfg.floats("estimates", "delta_fractions").unwrap_or_default() {
            reports.push(exponential_report(
                &p.model,
                p.eps,
                &p.xi,
                &g,
                gf * gamma_max,
                df * delta_max,
                n,
                p.seed,
            )?);
        }
    }
    let mut csv = Csv::new(&["gamma", "delta", "label", "log_scale", "estimate", "bound", "pass"]);
    for r in &reports {
        for l in &r.lines {
            csv.row(vec![
                num(r.gamma),
                num(r.delta),
                l.label.clone(),
                l.log_scale.to_string(),
                num(l.estimate),
                num(l.bound),
                l.pass.to_string(),
            ]);
        }
    }
    ctx.out.csv("lines.csv", csv)?;
    let report = EstimatesReport {
        model: summary(p),
        eps: p.eps,
        grid: g,
        gamma_max,
        delta_max,
        all_pass: reports.iter().all(|r| r.all_pass()),
        reports,
    };
    ctx.out.json("report.json", &report)?;
    Ok(())
}

pub fn pullback_run(ctx: &mut Ctx) -> Result<(), CliError> {
    let p = ctx.p;
    let pc = pullback_config(ctx.cfg);
    let (path, diag) = pullback(&p.model, p.eps, &p.xi, &pc, p.seed)?;
    ctx.out.csv("path.csv", path_csv(&path))?;
    let mut csv = Csv::new(&["depth", "next_depth", "distance"]);
    for (i, d) in diag.pair_distances.iter().enumerate() {
        csv.row(vec![
            pc.schedule[i].to_string(),
            pc.schedule[i + 1].to_string(),
            num(*d),
        ]);
    }
    ctx.out.csv("distances.csv", csv)?;
    let points = pc
        .schedule
        .iter()
        .zip(&diag.pair_distances)
        .map(|(n, d)| (*n as f64, d.ln()))
        .collect();
    ctx.plot(
        "pullback.svg",
        "Pull-back decay",
        "start depth n",
        "log distance",
        &[Series { name: "log d", points }],
    )?;
    ctx.out.json(
        "report.json",
        &serde_json::json!({ "eps": p.eps, "config": pc, "diagnostics": diag }),
    )?;
    Ok(())
}

pub fn invariant(ctx: &mut Ctx) -> Result<(), CliError> {
    let (cfg, p) = (ctx.cfg, ctx.p);
    let pc = pullback_config(cfg);
    let n = cfg.int("invariant", "draws").unwrap_or(100) as usize;
    let s = invariant_samples(&p.model, p.eps, n, &pc, p.seed)?;
    let mut csv = Csv::new(
        &[
            vec!["draw".to_string(), "seed".into(), "h_sq".into()],
            indexed("coeff", p.model.dim()),
        ]
        .concat(),
    );
    let mut mean = 0.0;
    for (i, (x, seed)) in s.values.iter().zip(&s.seeds).enumerate() {
        let h = h_norm_sq(&p.model.space, x)?;
        mean += h / n as f64;
        csv.row(
            [
                vec![i.to_string(), seed.to_string(), num(h)],
                x.0.iter().map(|v| num(*v)).collect(),
            ]
            .concat(),
        );
    }
    ctx.out.csv("samples.csv", csv)?;
    let test = match cfg.floats("invariant", "test_times") {
        Some(t) => Some(stationarity_test(
            &p.model,
            p.eps,
            (t[0], t[1]),
            n,
            &StationarityMode::Pullback(pc.clone()),
            p.seed,
        )?),
        None => None,
    };
    let report = serde_json::json!({
        "eps": p.eps,
        "time": s.time,
        "n_draws": n,
        "mean_h_sq": mean,
        "config": pc,
        "stationarity": test,
    });
    ctx.out.json("report.json", &report)?;
    Ok(())
}

pub fn rate(ctx: &mut Ctx) -> Result<(), CliError> {
    let (cfg, p) = (ctx.cfg, ctx.p);
    let opts = rate_options(cfg);
    let target = match cfg.floats("rate", "target") {
        Some(t) => StateVec(t),
        None => p.model.space.mode(
            cfg.int("rate", "target_mode").unwrap_or(0) as usize,
            cfg.f64("rate", "target_amplitude").unwrap_or(0.5),
        )?,
    };
    let (t0, t1) = (
        cfg.f64("rate", "t0").unwrap_or(-10.0),
        cfg.f64("rate", "t1").unwrap_or(0.0),
    );
    let r = rate_endpoint(&p.model, &p.xi, t0, t1, &target, &opts)?;
    let c = &r.control;
    let mut csv = Csv::new(&[vec!["t".to_string()], indexed("v", c.k)].concat());
    for i in 0..c.grid.n_steps {
        csv.row(
            std::iter::once(num(c.grid.time(i)))
                .chain(c.row(i).iter().map(|v| num(*v)))
                .collect(),
        );
    }
    ctx.out.csv("control.csv", csv)?;
    let path = skeleton_solve(&p.model, &p.xi, &c.grid, c)?;
    ctx.out.csv("path.csv", path_csv(&path))?;
    let mut trace = Csv::new(&["mu", "objective"]);
    for t in &r.trace {
        trace.row(vec![num(t.mu), num(t.objective)]);
    }
    ctx.out.csv("trace.csv", trace)?;
    let report = serde_json::json!({
        "target": target,
        "t0": t0,
        "t1": t1,
        "options": opts,
        "value": r.value,
        "endpoint": r.endpoint,
        "endpoint_gap": r.endpoint_gap,
        "iterations": r.iterations,
        "converged": r.converged,
        "trace": r.trace,
    });
    ctx.out.json("report.json", &report)?;
    Ok(())
}

pub fn quasipotential(ctx: &mut Ctx) -> Result<(), CliError> {
    let (cfg, p) = (ctx.cfg, ctx.p);
    let targets: Vec<StateVec> = match cfg.rows("quasipotential", "targets") {
        Some(rows) => rows.into_iter().map(StateVec).collect(),
        None => {
            let a = cfg.f64("quasipotential", "amplitude").unwrap_or(0.3);
            cfg.ints("quasipotential", "target_modes")
                .unwrap_or_default()
                .into_iter()
                .map(|m| p.model.space.mode(m as usize, a))
                .collect::<Result<_, _>>()?
        }
    };
    let t_back = cfg.f64("quasipotential", "t_back").unwrap_or(10.0);
    let r = quasipotential_crosscheck(&p.model, &targets, t_back, &rate_options(cfg))?;
    let mut csv = Csv::new(&["v_norm_sq", "rate", "ratio", "endpoint_gap", "converged"]);
    for row in &r.rows {
        csv.row(vec![
            num(row.v_norm_sq),
            num(row.rate),
            opt(row.ratio),
            num(row.endpoint_gap),
            row.converged.to_string(),
        ]);
    }
    ctx.out.csv("quasipotential.csv", csv)?;
    ctx.out
        .json("report.json", &serde_json::json!({ "targets": targets, "report": r }))?;
    Ok(())
}

#[derive(Serialize)]
struct ProbeReport {
    event: EventSpec,
    draws: usize,
    /// True when fewer than three intensities had hits, so no fit was made.
    flagged: bool,
    message: Option<String>,
    estimates: Vec<ProbabilityEstimate>,
    fit: Option<ProbeResult>,
    trend_inversions: Option<usize>,
}

pub fn probe(ctx: &mut Ctx) -> Result<(), CliError> {
    let (cfg, p) = (ctx.cfg, ctx.p);
    let pc = pullback_config(cfg);
    let draws = cfg.int("probe", "draws").unwrap_or(1000) as usize;
    let event = match cfg.str("probe", "event") {
        Some("mode_threshold") => EventSpec {
            kind: EventKind::ModeThreshold,
            radius_or_level: cfg.f64("probe", "level").unwrap_or(0.5),
            mode_index: cfg.int("probe", "mode").map(|m| m as usize),
        },
        _ => EventSpec {
            kind: EventKind::HBallComplement,
            radius_or_level: cfg.f64("probe", "level").unwrap_or(0.5),
            mode_index: None,
        },
    };
    let estimates = p
        .eps_list
        .iter()
        .enumerate()
        .map(|(i, eps)| estimate_probability(&p.model, *eps, &event, draws, &pc, derive_seed(p.seed, i as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    let (fit, message) = match slope_fit(&estimates, cfg.f64("probe", "rate_reference")) {
        Ok(f) => (Some(f), None),
        Err(Error::InsufficientData(m)) => (None, Some(m)),
        Err(e) => return Err(e.into()),
    };
    let mut csv = Csv::new(&["eps", "p_hat", "stderr", "hits", "neg_eps_log_p"]);
    let mut sorted = estimates.clone();
    sorted.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    let neg = |e: &ProbabilityEstimate| (e.hits > 0).then(|| -e.eps * e.p_hat.ln());
    for e in &sorted {
        csv.row(vec![
            num(e.eps),
            num(e.p_hat),
            num(e.stderr),
            e.hits.to_string(),
            opt(neg(e)),
        ]);
    }
    ctx.out.csv("probe.csv", csv)?;
    let mut series = vec![Series {
        name: "-eps log p",
        points: sorted.iter().map(|e| (e.eps, neg(e).unwrap_or(f64::NAN))).collect(),
    }];
    if let Some(f) = &fit {
        let line = [0.0, sorted[0].eps]
            .iter()
            .map(|e| (*e, f.fitted_limit + f.fitted_slope * e))
            .collect();
        series.push(Series {
            name: "fit",
            points: line,
        });
    }
    ctx.plot("probe.svg", "Small-noise scaling", "eps", "-eps log p", &series)?;
    let report = ProbeReport {
        event,
        draws,
        flagged: fit.is_none(),
        message,
        trend_inversions: fit.as_ref().map(trend_inversions),
        estimates: sorted,
        fit,
    };
    ctx.out.json("report.json", &report)?;
    Ok(())
}
