//! Turns a resolved configuration into a model and the run-wide quantities,
//! collecting every configuration error before any computation starts.

use monodrift_core::framework::{admissible_report, with_fitted_c_rho1, ConstantsReport, RhoFit};
use monodrift_core::models::{
    build_burgers_1d, build_gl_1d, build_linear, build_noise, build_ns_2d, build_semilinear_1d, KraichnanSpec,
    ModelSpec, NoiseParams, ReactionSpec,
};
use monodrift_core::spectral::{GalerkinSpace, StateVec};

use crate::config::{ConfigError, ConfigErrors, Resolved};
use crate::Command;

pub struct Prepared {
    pub model: ModelSpec,
    pub rho_fit: Option<RhoFit>,
    pub constants: ConstantsReport,
    pub eps: f64,
    pub eps_list: Vec<f64>,
    pub seed: u64,
    pub xi: StateVec,
}

struct Checker<'a> {
    cfg: &'a Resolved,
    errors: Vec<ConfigError>,
}

impl Checker<'_> {
    fn require(&mut self, ok: bool, section: &str, name: &str, message: impl Into<String>) {
        if !ok {
            self.errors.push(self.cfg.error(section, name, message));
        }
    }

    fn positive(&mut self, section: &str, name: &str) {
        if let Some(x) = self.cfg.f64(section, name) {
            self.require(
                x > 0.0 && x.is_finite(),
                section,
                name,
                format!("{} = {x} must be positive", label(section, name)),
            );
        }
    }

    fn at_least_one(&mut self, section: &str, name: &str) {
        if let Some(x) = self.cfg.int(section, name) {
            self.require(
                x >= 1,
                section,
                name,
                format!("{} = {x} must be at least 1", label(section, name)),
            );
        }
    }

    fn fractions(&mut self, section: &str, name: &str) {
        if let Some(v) = self.cfg.floats(section, name) {
            let ok = !v.is_empty() && v.iter().all(|x| *x > 0.0 && *x <= 1.0);
            self.require(
                ok,
                section,
                name,
                format!("{} must be a nonempty list in (0, 1]", label(section, name)),
            );
        }
    }
}

fn label(section: &str, name: &str) -> String {
    if section.is_empty() {
        name.to_string()
    } else {
        format!("[{section}] {name}")
    }
}

fn static_checks(cfg: &Resolved, command: Command) -> Vec<ConfigError> {
    let mut c = Checker {
        cfg,
        errors: Vec::new(),
    };
    for (s, k) in [
        ("grid", "dt"),
        ("pullback", "dt"),
        ("pullback", "tol"),
        ("rate", "dt"),
        ("rate", "grad_tol"),
    ] {
        c.positive(s, k);
    }
    for (s, k) in [
        ("rate", "gap_tol"),
        ("quasipotential", "t_back"),
        ("probe", "level"),
        ("check", "radius"),
    ] {
        c.positive(s, k);
    }
    c.positive("model", "fit_radius");
    for (s, k) in [
        ("space", "modes"),
        ("noise", "columns"),
        ("model", "fit_samples"),
        ("check", "samples"),
    ] {
        c.at_least_one(s, k);
    }
    for (s, k) in [
        ("estimates", "paths"),
        ("invariant", "draws"),
        ("probe", "draws"),
        ("rate", "max_iter"),
        ("", "workers"),
    ] {
        c.at_least_one(s, k);
    }
    for k in ["seed", "fit_seed"] {
        let s = if k == "seed" { "" } else { "model" };
        if let Some(x) = cfg.int(s, k) {
            c.require(x >= 0, s, k, format!("{} = {x} must be nonnegative", label(s, k)));
        }
    }
    c.fractions("estimates", "gamma_fractions");
    c.fractions("estimates", "delta_fractions");

    let (t0, t1) = (
        cfg.f64("grid", "t0").unwrap_or(0.0),
        cfg.f64("grid", "t1").unwrap_or(1.0),
    );
    c.require(t1 > t0, "grid", "t1", format!("[grid] t1 = {t1} must exceed t0 = {t0}"));
    let (r0, r1) = (
        cfg.f64("rate", "t0").unwrap_or(-10.0),
        cfg.f64("rate", "t1").unwrap_or(0.0),
    );
    c.require(r1 > r0, "rate", "t1", format!("[rate] t1 = {r1} must exceed t0 = {r0}"));

    if let Some(s) = cfg.ints("pullback", "schedule") {
        let ok = !s.is_empty() && s[0] >= 1 && s.windows(2).all(|w| w[1] > w[0]);
        c.require(
            ok,
            "pullback",
            "schedule",
            "[pullback] schedule must be a nonempty increasing list of positive depths",
        );
    }
    if let Some(g) = cfg.f64("pullback", "metric_gamma") {
        c.require(
            g >= 0.0 && g.is_finite(),
            "pullback",
            "metric_gamma",
            "[pullback] metric_gamma must be nonnegative",
        );
    }
    if let Some(mu) = cfg.floats("rate", "mu_schedule") {
        let ok = !mu.is_empty() && mu.iter().all(|x| *x > 0.0) && mu.windows(2).all(|w| w[1] > w[0]);
        c.require(
            ok,
            "rate",
            "mu_schedule",
            "[rate] mu_schedule must be a nonempty increasing list of positive penalties",
        );
    }
    if let Some(t) = cfg.floats("invariant", "test_times") {
        c.require(
            t.len() == 2,
            "invariant",
            "test_times",
            "[invariant] test_times needs exactly two times",
        );
    }

    match (cfg.f64("", "eps"), cfg.f64("", "eps_fraction")) {
        (Some(_), Some(_)) => c
            .errors
            .push(cfg.error("", "eps_fraction", "set either eps or eps_fraction, not both")),
        (Some(e), None) => c.require(
            e >= 0.0 && e.is_finite(),
            "",
            "eps",
            format!("eps = {e} must be nonnegative"),
        ),
        (None, Some(f)) => c.require(
            f > 0.0 && f < 1.0,
            "",
            "eps_fraction",
            format!("eps_fraction = {f} must lie in (0, 1)"),
        ),
        (None, None) => {}
    }
    match cfg.floats("", "eps_list") {
        Some(l) => c.require(
            !l.is_empty() && l.iter().all(|e| *e > 0.0 && e.is_finite()),
            "",
            "eps_list",
            "eps_list must be a nonempty list of positive intensities",
        ),
        None if command == Command::Probe => c.errors.push(cfg.error("", "eps_list", "probe needs eps_list")),
        None => {}
    }

    let columns = cfg.int("noise", "columns").unwrap_or(1);
    if let Some(a) = cfg.floats("noise", "amplitudes") {
        c.require(
            a.len() as i64 == columns,
            "noise",
            "amplitudes",
            format!("[noise] amplitudes has {} entries for {columns} columns", a.len()),
        );
    }
    let preset = cfg.str("model", "preset").unwrap_or("");
    let km = cfg.ints("noise", "kraichnan_modes");
    let ka = cfg.floats("noise", "kraichnan_amplitudes");
    if km.is_some() || ka.is_some() {
        c.require(
            preset == "ns2d",
            "noise",
            "kraichnan_modes",
            "transport noise is available for ns2d only",
        );
        let (m, a) = (km.unwrap_or_default(), ka.unwrap_or_default());
        c.require(
            m.len() == a.len() && m.iter().all(|x| *x >= 0),
            "noise",
            "kraichnan_amplitudes",
            "[noise] kraichnan_modes and kraichnan_amplitudes need equal lengths and nonnegative modes",
        );
    }
    if cfg.str("probe", "event") == Some("mode_threshold") && command == Command::Probe {
        c.require(
            cfg.int("probe", "mode").is_some_and(|m| m >= 0),
            "probe",
            "mode",
            "mode_threshold needs [probe] mode",
        );
    }
    c.errors
}

fn noise_params(cfg: &Resolved) -> NoiseParams {
    let k = cfg.int("noise", "columns").unwrap_or(1) as usize;
    let columns: Vec<(usize, f64)> = match cfg.floats("noise", "amplitudes") {
        Some(a) => a.into_iter().enumerate().collect(),
        None => NoiseParams::unit_columns(k),
    };
    let sigma0 = cfg.f64("noise", "sigma0").unwrap_or(1.0);
    match cfg.str("noise", "kind").unwrap_or("additive") {
        "bounded_mult" => NoiseParams::BoundedMult {
            sigma0,
            theta: cfg.f64("noise", "theta").unwrap_or(0.5),
            columns,
        },
        "decaying_mult" => NoiseParams::DecayingMult { sigma0, columns },
        _ => NoiseParams::Additive { columns },
    }
}

/// Builds the model named by `[model] preset` without fitting constants.
pub fn build_model(cfg: &Resolved) -> monodrift_core::Result<ModelSpec> {
    let preset = cfg.str("model", "preset").unwrap_or("");
    let modes = cfg.int("space", "modes").unwrap_or(16) as usize;
    let alpha = cfg.f64("space", "alpha").unwrap_or(1.0);
    let chi = cfg.f64("model", "chi").unwrap_or(1.0);
    let space = match (preset, cfg.floats("space", "weights")) {
        ("ns2d", _) => GalerkinSpace::fourier_2d(modes, alpha)?,
        ("linear", Some(w)) => GalerkinSpace::from_weights(w)?,
        _ => GalerkinSpace::sine_1d(modes, alpha)?,
    };
    let noise = build_noise(&space, &noise_params(cfg))?;
    match preset {
        "burgers1d" => build_burgers_1d(space, chi, noise),
        "semilinear1d" => {
            let g = ReactionSpec::Polynomial {
                coeffs: cfg.floats("model", "reaction").unwrap_or_default(),
            };
            build_semilinear_1d(space, chi, cfg.f64("model", "transport").unwrap_or(0.0), g, noise)
        }
        "gl1d" => build_gl_1d(
            space,
            chi,
            cfg.f64("model", "alpha").unwrap_or(1.0),
            cfg.f64("model", "c").unwrap_or(1.0),
            noise,
        ),
        "ns2d" => {
            let fields: Vec<(usize, f64)> = cfg
                .ints("noise", "kraichnan_modes")
                .unwrap_or_default()
                .into_iter()
                .map(|m| m as usize)
                .zip(cfg.floats("noise", "kraichnan_amplitudes").unwrap_or_default())
                .collect();
            let k = (!fields.is_empty()).then_some(KraichnanSpec { fields });
            build_ns_2d(space, chi, noise, k.as_ref())
        }
        _ => {
            let rates = cfg.floats("model", "rates").unwrap_or_else(|| space.weights().to_vec());
            build_linear(space, rates, noise)
        }
    }
}

fn state(cfg: &Resolved, section: &str, name: &str, dim: usize, errors: &mut Vec<ConfigError>) -> Option<StateVec> {
    let v = cfg.floats(section, name)?;
    if v.len() != dim {
        errors.push(cfg.error(
            section,
            name,
            format!(
                "{} has {} entries; the model has {dim} modes",
                label(section, name),
                v.len()
            ),
        ));
    }
    Some(StateVec(v))
}

/// Validates the configuration for `command` and builds everything the run needs.
pub fn prepare(cfg: &Resolved, command: Command) -> Result<Prepared, ConfigErrors> {
    let mut errors = cfg.key_errors.clone();
    if errors.is_empty() {
        errors = static_checks(cfg, command);
    } else {
        // checks on values of unknown or mistyped keys would only repeat them
        let extra: Vec<ConfigError> = static_checks(cfg, command)
            .into_iter()
            .filter(|e| !errors.iter().any(|k| k.line == e.line))
            .collect();
        errors.extend(extra);
    }
    if !errors.is_empty() {
        errors.sort_by_key(|e| e.line);
        return Err(ConfigErrors(errors));
    }
    let model_error =
        |e: monodrift_core::Error| ConfigErrors(vec![cfg.error("model", "preset", format!("model: {e}"))]);
    let model = build_model(cfg).map_err(model_error)?;
    let (model, rho_fit) = match cfg.f64("model", "c_rho1") {
        Some(c) => (model.with_c_rho1(c), None),
        None => {
            let n = cfg.int("model", "fit_samples").unwrap_or(10_000) as usize;
            let r = cfg.f64("model", "fit_radius").unwrap_or(2.0);
            let seed = cfg.int("model", "fit_seed").unwrap_or(2024) as u64;
            let (m, fit) = with_fitted_c_rho1(model, n, r, seed).map_err(model_error)?;
            (m, Some(fit))
        }
    };
    let constants = admissible_report(&model).map_err(model_error)?;
    let bound = constants.eps_tilde;

    let mut errors = Vec::new();
    let enforce = cfg.bool("", "enforce_thresholds").unwrap_or(true);
    let eps = match cfg.f64("", "eps") {
        Some(e) => e,
        None => cfg.f64("", "eps_fraction").unwrap_or(0.5) * bound,
    };
    let uses_eps = matches!(
        command,
        Command::Check | Command::Simulate | Command::Estimates | Command::Pullback | Command::Invariant
    );
    if enforce && uses_eps && !(eps < bound) {
        let key = if cfg.get("", "eps").is_some() {
            "eps"
        } else {
            "eps_fraction"
        };
        errors.push(cfg.error(
            "",
            key,
            format!("eps = {eps} is not below the computed threshold eps_tilde = {bound}"),
        ));
    }
    let eps_list = cfg.floats("", "eps_list").unwrap_or_default();
    if enforce && command == Command::Probe {
        for e in eps_list.iter().filter(|e| !(**e < bound)) {
            errors.push(cfg.error(
                "",
                "eps_list",
                format!("eps = {e} is not below the computed threshold eps_tilde = {bound}"),
            ));
        }
    }

    let dim = model.dim();
    let xi = state(cfg, "", "xi", dim, &mut errors).unwrap_or_else(|| model.space.zero());
    if command == Command::Rate {
        state(cfg, "rate", "target", dim, &mut errors);
        if cfg.get("rate", "target").is_none() {
            let m = cfg.int("rate", "target_mode").unwrap_or(0);
            if !(0..dim as i64).contains(&m) {
                errors.push(cfg.error(
                    "rate",
                    "target_mode",
                    format!("[rate] target_mode = {m} must be below {dim}"),
                ));
            }
        }
    }
    if command == Command::Quasipotential {
        match cfg.rows("quasipotential", "targets") {
            Some(rows) if rows.iter().any(|r| r.len() != dim) => errors.push(cfg.error(
                "quasipotential",
                "targets",
                format!("every [quasipotential] target needs {dim} entries"),
            )),
            Some(_) => {}
            None => {
                if cfg
                    .ints("quasipotential", "target_modes")
                    .unwrap_or_default()
                    .iter()
                    .any(|m| !(0..dim as i64).contains(m))
                {
                    errors.push(cfg.error(
                        "quasipotential",
                        "target_modes",
                        format!("[quasipotential] target_modes must lie below {dim}"),
                    ));
                }
            }
        }
    }
    if command == Command::Probe && cfg.str("probe", "event") == Some("mode_threshold") {
        let m = cfg.int("probe", "mode").unwrap_or(0);
        if m >= dim as i64 {
            errors.push(cfg.error("probe", "mode", format!("[probe] mode = {m} must be below {dim}")));
        }
    }
    if !errors.is_empty() {
        errors.sort_by_key(|e| e.line);
        return Err(ConfigErrors(errors));
    }
    Ok(Prepared {
        model,
        rho_fit,
        constants,
        eps,
        eps_list,
        seed: cfg.int("", "seed").unwrap_or(0) as u64,
        xi,
    })
}
