//! Run configuration: a TOML file checked against a fixed key table.
//!
//! Every key has a type, a default (or none) and a one-line description; the
//! same table drives validation, default filling and the generated schema.

use std::fmt;
use std::path::Path;

use toml::{Table, Value};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Kind {
    Float,
    Int,
    Bool,
    Str(&'static [&'static str]),
    Floats,
    Ints,
    Strs,
    FloatRows,
}

impl Kind {
    fn label(&self) -> String {
        match self {
            Kind::Float => "float".into(),
            Kind::Int => "integer".into(),
            Kind::Bool => "boolean".into(),
            Kind::Str([]) => "string".into(),
            Kind::Str(choices) => format!("one of {}", choices.join(" | ")),
            Kind::Floats => "array of floats".into(),
            Kind::Ints => "array of integers".into(),
            Kind::Strs => "array of strings".into(),
            Kind::FloatRows => "array of float arrays".into(),
        }
    }

    /// Checks the type and normalises integers given for float keys.
    fn coerce(&self, v: &Value) -> Option<Value> {
        let float = |v: &Value| match v {
            Value::Float(x) => Some(Value::Float(*x)),
            Value::Integer(i) => Some(Value::Float(*i as f64)),
            _ => None,
        };
        let array = |v: &Value, f: &dyn Fn(&Value) -> Option<Value>| match v {
            Value::Array(a) => a.iter().map(f).collect::<Option<Vec<_>>>().map(Value::Array),
            _ => None,
        };
        match self {
            Kind::Float => float(v),
            Kind::Int => v.as_integer().map(Value::Integer),
            Kind::Bool => v.as_bool().map(Value::Boolean),
            Kind::Str(choices) => v
                .as_str()
                .filter(|s| choices.is_empty() || choices.contains(s))
                .map(|s| Value::String(s.into())),
            Kind::Floats => array(v, &float),
            Kind::Ints => array(v, &|x| x.as_integer().map(Value::Integer)),
            Kind::Strs => array(v, &|x| x.as_str().map(|s| Value::String(s.into()))),
            Kind::FloatRows => array(v, &|row| array(row, &float)),
        }
    }
}

pub struct Key {
    pub section: &'static str,
    pub name: &'static str,
    pub kind: Kind,
    /// TOML literal of the default; `None` leaves the key unset.
    pub default: Option<&'static str>,
    pub doc: &'static str,
}

const fn key(
    section: &'static str,
    name: &'static str,
    kind: Kind,
    default: Option<&'static str>,
    doc: &'static str,
) -> Key {
    Key {
        section,
        name,
        kind,
        default,
        doc,
    }
}

pub const PRESETS: &[&str] = &["burgers1d", "semilinear1d", "gl1d", "ns2d", "linear"];
const NOISE_KINDS: &[&str] = &["additive", "bounded_mult", "decaying_mult"];
const EVENTS: &[&str] = &["h_ball_complement", "mode_threshold"];
const VARIANTS: &[&str] = &["min", "sum"];

pub const SECTIONS: &[&str] = &[
    "model",
    "space",
    "noise",
    "grid",
    "check",
    "estimates",
    "pullback",
    "invariant",
    "rate",
    "quasipotential",
    "probe",
];

pub const KEYS: &[Key] = &[
    key("", "seed", Kind::Int, Some("0"), "master seed; --seed overrides it"),
    key(
        "",
        "workers",
        Kind::Int,
        None,
        "worker threads; --workers and MONODRIFT_WORKERS take precedence",
    ),
    key("", "out", Kind::Str(&[]), None, "output directory; --out overrides it"),
    key("", "eps", Kind::Float, None, "noise intensity"),
    key(
        "",
        "eps_fraction",
        Kind::Float,
        None,
        "noise intensity as a fraction of the computed threshold; 0.5 when eps is unset",
    ),
    key("", "eps_list", Kind::Floats, None, "intensities for probe"),
    key(
        "",
        "enforce_thresholds",
        Kind::Bool,
        Some("true"),
        "reject intensities at or above the computed threshold",
    ),
    key(
        "",
        "plots",
        Kind::Bool,
        Some("true"),
        "write SVG plots next to the CSV files",
    ),
    key(
        "",
        "xi",
        Kind::Floats,
        None,
        "initial state coefficients; zero when unset",
    ),
    key("model", "preset", Kind::Str(PRESETS), None, "model family (required)"),
    key(
        "model",
        "chi",
        Kind::Float,
        Some("1.0"),
        "viscosity or diffusion coefficient",
    ),
    key(
        "model",
        "alpha",
        Kind::Float,
        Some("1.0"),
        "gl1d: linear damping coefficient",
    ),
    key("model", "c", Kind::Float, Some("1.0"), "gl1d: cubic coefficient"),
    key(
        "model",
        "transport",
        Kind::Float,
        Some("0.0"),
        "semilinear1d: coefficient of the transport term",
    ),
    key(
        "model",
        "reaction",
        Kind::Floats,
        Some("[0.0, 0.0, -1.0]"),
        "semilinear1d: coefficients of u, u^2, u^3",
    ),
    key(
        "model",
        "rates",
        Kind::Floats,
        None,
        "linear: per-mode decay rates; the space weights when unset",
    ),
    key(
        "model",
        "c_rho1",
        Kind::Float,
        None,
        "local monotonicity constant; fitted on a sample when unset",
    ),
    key(
        "model",
        "fit_samples",
        Kind::Int,
        Some("10000"),
        "sample size of the constant fit",
    ),
    key(
        "model",
        "fit_radius",
        Kind::Float,
        Some("2.0"),
        "H-radius of the constant fit",
    ),
    key("model", "fit_seed", Kind::Int, Some("2024"), "seed of the constant fit"),
    key(
        "space",
        "modes",
        Kind::Int,
        Some("16"),
        "retained sine modes, or the wavenumber cutoff for ns2d",
    ),
    key(
        "space",
        "alpha",
        Kind::Float,
        Some("1.0"),
        "weight exponent of the spectral weights",
    ),
    key(
        "space",
        "weights",
        Kind::Floats,
        None,
        "linear: explicit spectral weights",
    ),
    key(
        "noise",
        "kind",
        Kind::Str(NOISE_KINDS),
        Some("\"additive\""),
        "noise family",
    ),
    key(
        "noise",
        "columns",
        Kind::Int,
        Some("4"),
        "number of noise columns, one per leading mode",
    ),
    key(
        "noise",
        "amplitudes",
        Kind::Floats,
        None,
        "per-column amplitudes; all 1 when unset",
    ),
    key(
        "noise",
        "sigma0",
        Kind::Float,
        Some("1.0"),
        "multiplicative noise strength",
    ),
    key(
        "noise",
        "theta",
        Kind::Float,
        Some("0.5"),
        "bounded_mult: saturation scale",
    ),
    key(
        "noise",
        "kraichnan_modes",
        Kind::Ints,
        None,
        "ns2d: modes carrying transport fields",
    ),
    key(
        "noise",
        "kraichnan_amplitudes",
        Kind::Floats,
        None,
        "ns2d: transport field amplitudes",
    ),
    key("grid", "t0", Kind::Float, Some("0.0"), "start time"),
    key("grid", "t1", Kind::Float, Some("1.0"), "end time"),
    key("grid", "dt", Kind::Float, Some("1e-3"), "time step"),
    key(
        "check",
        "samples",
        Kind::Int,
        Some("10000"),
        "sample size per audited condition",
    ),
    key(
        "check",
        "radius",
        Kind::Float,
        Some("2.0"),
        "H-radius of the audit sample",
    ),
    key(
        "check",
        "conditions",
        Kind::Strs,
        Some("[\"A2\", \"A3\", \"A4\", \"A5\"]"),
        "conditions to audit",
    ),
    key("check", "tol", Kind::Float, Some("1e-9"), "tolerated negative margin"),
    key("estimates", "paths", Kind::Int, Some("200"), "Monte Carlo paths"),
    key(
        "estimates",
        "gamma_fractions",
        Kind::Floats,
        Some("[0.5, 1.0]"),
        "gamma as fractions of its largest admissible value",
    ),
    key(
        "estimates",
        "delta_fractions",
        Kind::Floats,
        Some("[0.5, 0.9]"),
        "delta as fractions of its admissible supremum",
    ),
    key(
        "pullback",
        "schedule",
        Kind::Ints,
        Some("[2, 4, 8, 16]"),
        "increasing start depths",
    ),
    key("pullback", "t_end", Kind::Float, Some("0.0"), "common end time"),
    key("pullback", "dt", Kind::Float, Some("1e-3"), "time step"),
    key(
        "pullback",
        "tol",
        Kind::Float,
        Some("1e-4"),
        "convergence tolerance on the last distance",
    ),
    key(
        "pullback",
        "metric_gamma",
        Kind::Float,
        None,
        "metric weight rate; twice the smallest dissipation rate when unset",
    ),
    key(
        "pullback",
        "metric_variant",
        Kind::Str(VARIANTS),
        Some("\"min\""),
        "how the sup and integral terms combine",
    ),
    key("invariant", "draws", Kind::Int, Some("100"), "stationary draws"),
    key(
        "invariant",
        "test_times",
        Kind::Floats,
        None,
        "two times for a two-sample stationarity test",
    ),
    key(
        "rate",
        "t0",
        Kind::Float,
        Some("-10.0"),
        "start time of the control window",
    ),
    key("rate", "t1", Kind::Float, Some("0.0"), "end time of the control window"),
    key(
        "rate",
        "target",
        Kind::Floats,
        None,
        "target state; a single mode when unset",
    ),
    key(
        "rate",
        "target_mode",
        Kind::Int,
        Some("0"),
        "mode of the single-mode target",
    ),
    key(
        "rate",
        "target_amplitude",
        Kind::Float,
        Some("0.5"),
        "amplitude of the single-mode target",
    ),
    key("rate", "dt", Kind::Float, Some("1e-3"), "control time step"),
    key(
        "rate",
        "mu_schedule",
        Kind::Floats,
        Some("[10.0, 100.0, 1000.0]"),
        "increasing endpoint penalties",
    ),
    key(
        "rate",
        "max_iter",
        Kind::Int,
        Some("500"),
        "L-BFGS iterations per penalty",
    ),
    key("rate", "grad_tol", Kind::Float, Some("1e-7"), "gradient norm tolerance"),
    key(
        "rate",
        "gap_tol",
        Kind::Float,
        Some("1e-2"),
        "largest accepted endpoint distance",
    ),
    key(
        "quasipotential",
        "t_back",
        Kind::Float,
        Some("10.0"),
        "length of the control window",
    ),
    key(
        "quasipotential",
        "target_modes",
        Kind::Ints,
        Some("[0, 1, 2, 3, 4]"),
        "modes of the single-mode targets",
    ),
    key(
        "quasipotential",
        "amplitude",
        Kind::Float,
        Some("0.3"),
        "amplitude of the single-mode targets",
    ),
    key(
        "quasipotential",
        "targets",
        Kind::FloatRows,
        None,
        "explicit targets; replace the single-mode ones",
    ),
    key(
        "probe",
        "draws",
        Kind::Int,
        Some("1000"),
        "stationary draws per intensity",
    ),
    key(
        "probe",
        "event",
        Kind::Str(EVENTS),
        Some("\"h_ball_complement\""),
        "event family",
    ),
    key(
        "probe",
        "level",
        Kind::Float,
        Some("0.5"),
        "radius or level of the event",
    ),
    key("probe", "mode", Kind::Int, None, "mode_threshold: mode index"),
    key(
        "probe",
        "rate_reference",
        Kind::Float,
        None,
        "reference rate reported with the fit",
    ),
];

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

/// Line numbers of section headers and `key =` lines.
#[derive(Clone, Debug, Default)]
pub struct Locator {
    entries: Vec<(String, String, usize)>,
}

impl Locator {
    fn new(src: &str) -> Self {
        let mut section = String::new();
        let mut entries = Vec::new();
        for (i, raw) in src.lines().enumerate() {
            let line = raw.trim();
            if let Some(rest) = line.strip_prefix('[') {
                section = rest.split(']').next().unwrap_or("").trim().to_string();
                entries.push((section.clone(), String::new(), i + 1));
            } else if let Some((k, _)) = line.split_once('=') {
                let k = k.trim().trim_matches('"');
                if !k.is_empty() && !k.starts_with('#') {
                    entries.push((section.clone(), k.to_string(), i + 1));
                }
            }
        }
        Self { entries }
    }

    /// Line of `key` in `section`, else the section header.
    pub fn line(&self, section: &str, name: &str) -> Option<usize> {
        let find = |n: &str| {
            self.entries
                .iter()
                .find(|(s, k, _)| s == section && k == n)
                .map(|e| e.2)
        };
        find(name).or_else(|| find(""))
    }
}

/// Parsed file with every default filled in.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub table: Table,
    pub locator: Locator,
    /// Unknown keys and type errors, reported together with the range checks.
    pub key_errors: Vec<ConfigError>,
}

impl Resolved {
    pub fn get(&self, section: &str, name: &str) -> Option<&Value> {
        if section.is_empty() {
            self.table.get(name)
        } else {
            self.table
                .get(section)
                .and_then(|s| s.as_table())
                .and_then(|t| t.get(name))
        }
    }

    pub fn set(&mut self, section: &str, name: &str, v: Value) {
        let t = if section.is_empty() {
            &mut self.table
        } else {
            self.table
                .entry(section)
                .or_insert_with(|| Value::Table(Table::new()))
                .as_table_mut()
                .expect("section")
        };
        t.insert(name.to_string(), v);
    }

    pub fn f64(&self, section: &str, name: &str) -> Option<f64> {
        self.get(section, name).and_then(Value::as_float)
    }

    pub fn int(&self, section: &str, name: &str) -> Option<i64> {
        self.get(section, name).and_then(Value::as_integer)
    }

    pub fn bool(&self, section: &str, name: &str) -> Option<bool> {
        self.get(section, name).and_then(Value::as_bool)
    }

    pub fn str(&self, section: &str, name: &str) -> Option<&str> {
        self.get(section, name).and_then(Value::as_str)
    }

    pub fn floats(&self, section: &str, name: &str) -> Option<Vec<f64>> {
        self.get(section, name)
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(Value::as_float).collect())
    }

    pub fn ints(&self, section: &str, name: &str) -> Option<Vec<i64>> {
        self.get(section, name)
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(Value::as_integer).collect())
    }

    pub fn strs(&self, section: &str, name: &str) -> Option<Vec<String>> {
        self.get(section, name)
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(Value::as_str).map(String::from).collect())
    }

    pub fn rows(&self, section: &str, name: &str) -> Option<Vec<Vec<f64>>> {
        self.get(section, name).and_then(Value::as_array).map(|a| {
            a.iter()
                .filter_map(Value::as_array)
                .map(|r| r.iter().filter_map(Value::as_float).collect())
                .collect()
        })
    }

    pub fn error(&self, section: &str, name: &str, message: impl Into<String>) -> ConfigError {
        ConfigError {
            line: self.locator.line(section, name),
            message: message.into(),
        }
    }

    /// The experiment-defining part of the configuration as TOML, without
    /// `out` and `workers`, which do not affect results.
    pub fn canonical(&self) -> String {
        let mut t = self.table.clone();
        t.remove("out");
        t.remove("workers");
        toml::to_string(&t).expect("a parsed table serializes")
    }
}

fn qualified(section: &str, name: &str) -> String {
    if section.is_empty() {
        name.to_string()
    } else {
        format!("[{section}] {name}")
    }
}

fn lookup(section: &str, name: &str) -> Option<&'static Key> {
    KEYS.iter().find(|k| k.section == section && k.name == name)
}

fn check_entry(
    section: &str,
    name: &str,
    v: &Value,
    locator: &Locator,
    out: &mut Table,
    errors: &mut Vec<ConfigError>,
) {
    let line = locator.line(section, name);
    match lookup(section, name) {
        None => errors.push(ConfigError {
            line,
            message: format!("unknown key {}", qualified(section, name)),
        }),
        Some(k) => match k.kind.coerce(v) {
            Some(v) => {
                out.insert(name.to_string(), v);
            }
            None => errors.push(ConfigError {
                line,
                message: format!("{} must be {}, got {v}", qualified(section, name), k.kind.label()),
            }),
        },
    }
}

/// Parses a configuration and fills defaults. Only a syntax error fails
/// here; key errors are kept in `key_errors` for [`crate::setup::prepare`].
pub fn parse_str(src: &str) -> Result<Resolved, ConfigErrors> {
    let locator = Locator::new(src);
    let raw: Table = toml::from_str(src).map_err(|e| {
        let line = e.span().map(|s| src[..s.start].matches('\n').count() + 1);
        ConfigErrors(vec![ConfigError {
            line,
            message: e.message().trim().to_string(),
        }])
    })?;
    let mut errors = Vec::new();
    let mut table = Table::new();
    for (name, v) in &raw {
        match v {
            Value::Table(inner) if SECTIONS.contains(&name.as_str()) => {
                let mut sec = Table::new();
                for (k, v) in inner {
                    check_entry(name, k, v, &locator, &mut sec, &mut errors);
                }
                table.insert(name.clone(), Value::Table(sec));
            }
            Value::Table(_) => errors.push(ConfigError {
                line: locator.line(name, ""),
                message: format!("unknown section [{name}]"),
            }),
            _ => check_entry("", name, v, &locator, &mut table, &mut errors),
        }
    }
    let mut resolved = Resolved {
        table,
        locator,
        key_errors: Vec::new(),
    };
    for k in KEYS {
        if resolved.get(k.section, k.name).is_none() {
            if let Some(d) = k.default {
                let v: Value = toml::from_str::<Table>(&format!("v = {d}")).expect("defaults parse")["v"].clone();
                resolved.set(k.section, k.name, k.kind.coerce(&v).expect("defaults match their kind"));
            }
        }
    }
    if resolved.get("model", "preset").is_none() && !errors.iter().any(|e| e.message.contains("[model] preset")) {
        errors.push(resolved.error(
            "model",
            "preset",
            format!("missing key [model] preset ({})", PRESETS.join(" | ")),
        ));
    }
    resolved.key_errors = errors;
    Ok(resolved)
}

/// Reads a configuration file, or the configuration embedded in a run manifest.
pub fn parse_file(path: &Path) -> Result<Resolved, ConfigErrors> {
    let single = |message: String| ConfigErrors(vec![ConfigError { line: None, message }]);
    let src = std::fs::read_to_string(path).map_err(|e| single(format!("cannot read {}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        let manifest: serde_json::Value =
            serde_json::from_str(&src).map_err(|e| single(format!("{} is not a run manifest: {e}", path.display())))?;
        let embedded = manifest
            .get("resolved_config")
            .and_then(|v| v.as_str())
            .ok_or_else(|| single(format!("{} has no resolved_config", path.display())))?;
        return parse_str(embedded);
    }
    parse_str(&src)
}

/// Commented TOML listing every key with its default.
pub fn schema() -> String {
    let mut s = String::from("# monodrift run configuration\n# Keys left commented out have no default.\n");
    for section in std::iter::once("").chain(SECTIONS.iter().copied()) {
        s.push('\n');
        if !section.is_empty() {
            s.push_str(&format!("[{section}]\n"));
        }
        for k in KEYS.iter().filter(|k| k.section == section) {
            s.push_str(&format!("# {} ({})\n", k.doc, k.kind.label()));
            match k.default {
                Some(d) => s.push_str(&format!("{} = {d}\n", k.name)),
                None => s.push_str(&format!("# {} =\n", k.name)),
            }
        }
    }
    s
}
