//! Experiment configuration.
//!
//! A spec is a TOML document read as a flat map of dotted keys
//! (`channel.omega_c`, `attack.t_e`, ...). Sections are only a way of writing
//! the prefixes. Every key is checked against the list below; unknown keys are
//! rejected so typos never silently fall back to defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use cvqkd_core::adversary::{AttackConfig, EveTransmissivity};
use cvqkd_core::decay::DEFAULT_GRID_RESOLUTION;
use cvqkd_core::protocol::{
    default_delay, DEFAULT_N_KEY, DEFAULT_N_REF, DEFAULT_REFERENCE_AMPLITUDE,
};
use cvqkd_core::{
    CoherentAmplitude, DampingProfile, DecayModel, DetectionConfig, SessionConfig, SHOT_NOISE,
};
use sha2::{Digest, Sha256};
use thiserror::Error;
use toml::Value;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("`{key}`: {message}")]
    Invalid { key: String, message: String },
}

/// Settings that never change results.
pub const EXECUTION_KEYS: &[&str] = &["run.threads"];

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        message: message.into(),
    }
}

/// Keys a spec may set, with a one-line description each.
pub const KNOWN_KEYS: &[(&str, &str)] = &[
    (
        "channel.model",
        "lorentz_drude | markovian | tabulated (default lorentz_drude)",
    ),
    ("channel.gamma_m", "asymptotic decay rate γ_M > 0"),
    ("channel.omega_0", "mode frequency ω_0 > 0 (lorentz_drude)"),
    (
        "channel.omega_c",
        "reservoir cutoff ω_c > 0 (lorentz_drude)",
    ),
    (
        "channel.rate_file",
        "CSV of `t,rate` rows (tabulated), relative to the spec file",
    ),
    (
        "channel.tau",
        "line length / transmission time τ > 0 (required)",
    ),
    (
        "session.delta_t",
        "reference delay Δt > 0 (default 0.05/ω_c, or 0.01 τ)",
    ),
    (
        "session.modulation_variance",
        "key modulation variance V_A >= 0 (default 10 N₀)",
    ),
    (
        "session.alpha0_re",
        "reference amplitude, X component (default 20)",
    ),
    (
        "session.alpha0_im",
        "reference amplitude, P component (default 0)",
    ),
    ("session.n_key", "key pulses per session (default 10000)"),
    (
        "session.n_ref",
        "reference pulses per session (default 10000)",
    ),
    ("session.seed", "master seed (default 0)"),
    (
        "attack.t_e",
        "tap position 0 <= t_E <= τ; presence enables the attack",
    ),
    (
        "attack.eta_e",
        "\"auto\" or a transmissivity in [0, 1] (default auto)",
    ),
    (
        "detection.epsilon",
        "precision dead-band ε >= 0 (default 0)",
    ),
    (
        "detection.significance_sigmas",
        "test width in standard errors (default 3)",
    ),
    (
        "detection.grid_resolution",
        "grid nodes on [0, τ] (default 10000)",
    ),
    ("run.repetitions", "sessions per run, >= 1 (default 1)"),
    ("run.threads", "worker threads, 0 = all cores (default 0)"),
    ("output.reports", "write per-session reports (default true)"),
    (
        "output.transcripts",
        "write per-session transcripts (default false)",
    ),
    ("rates.t_max", "end of the rate curve (default τ)"),
    ("rates.points", "rows in the rate curve (default 1001)"),
    ("threshold.sweep", "epsilon | t_e_star (default epsilon)"),
    (
        "threshold.max",
        "upper end of the sweep (default: just past the largest visible ε, or τ)",
    ),
    ("threshold.steps", "rows in the sweep (default 21)"),
];

/// Parsed, not yet validated, dotted key/value pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatSpec {
    pub values: BTreeMap<String, Value>,
    pub sweep: BTreeMap<String, Vec<f64>>,
    pub base_dir: PathBuf,
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

impl FlatSpec {
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, ConfigError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        let mut all = BTreeMap::new();
        flatten("", &table, &mut all);
        let mut values = BTreeMap::new();
        let mut sweep = BTreeMap::new();
        for (key, value) in all {
            if let Some(target) = key.strip_prefix("sweep.") {
                if !KNOWN_KEYS.iter().any(|(k, _)| *k == target) {
                    return Err(ConfigError::UnknownKey(key));
                }
                let Value::Array(items) = value else {
                    return Err(invalid(&key, "sweep values must be an array of numbers"));
                };
                let nums = items
                    .iter()
                    .map(|v| as_number(&key, v))
                    .collect::<Result<Vec<_>, _>>()?;
                if nums.is_empty() {
                    return Err(invalid(&key, "sweep list is empty"));
                }
                sweep.insert(target.to_string(), nums);
            } else if KNOWN_KEYS.iter().any(|(k, _)| *k == key) {
                values.insert(key, value);
            } else {
                return Err(ConfigError::UnknownKey(key));
            }
        }
        Ok(Self {
            values,
            sweep,
            base_dir: base_dir.into(),
        })
    }

    pub fn set_number(&mut self, key: &str, value: f64) {
        let v = if value.fract() == 0.0 && value.abs() < 9e15 && is_integer_key(key) {
            Value::Integer(value as i64)
        } else {
            Value::Float(value)
        };
        self.values.insert(key.to_string(), v);
    }

    pub fn set_integer(&mut self, key: &str, value: i64) {
        self.values.insert(key.to_string(), Value::Integer(value));
    }

    /// SHA-256 over the canonical `key=value` lines.
    /// Digest of every setting that can change results. Keys in
    /// [`EXECUTION_KEYS`] only affect how a run is scheduled and are left out.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        for (k, v) in self
            .values
            .iter()
            .filter(|(k, _)| !EXECUTION_KEYS.contains(&k.as_str()))
        {
            hasher.update(format!("{k}={v}\n").as_bytes());
        }
        for (k, v) in &self.sweep {
            hasher.update(format!("sweep.{k}={v:?}\n").as_bytes());
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    fn number(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.values.get(key).map(|v| as_number(key, v)).transpose()
    }

    fn count(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        match self.values.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(_) => Err(invalid(key, "expected a nonnegative integer")),
        }
    }

    fn string(&self, key: &str) -> Result<Option<&str>, ConfigError> {
        match self.values.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(invalid(key, "expected a string")),
        }
    }

    fn flag(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        match self.values.get(key) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(*b)),
            Some(_) => Err(invalid(key, "expected true or false")),
        }
    }
}

fn is_integer_key(key: &str) -> bool {
    matches!(
        key,
        "session.n_key"
            | "session.n_ref"
            | "session.seed"
            | "detection.grid_resolution"
            | "run.repetitions"
            | "run.threads"
            | "rates.points"
            | "threshold.steps"
    )
}

fn as_number(key: &str, v: &Value) -> Result<f64, ConfigError> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(invalid(key, "expected a number")),
    }
}

fn require_positive(key: &str, v: Option<f64>) -> Result<f64, ConfigError> {
    match v {
        None => Err(invalid(key, "required")),
        Some(x) if x.is_finite() && x > 0.0 => Ok(x),
        Some(x) => Err(invalid(
            key,
            format!("must be positive and finite, got {x}"),
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdSweep {
    Epsilon,
    TeStar,
}

impl fmt::Display for ThresholdSweep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Epsilon => "epsilon",
            Self::TeStar => "t_e_star",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputSinks {
    pub reports: bool,
    pub transcripts: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub session: SessionConfig,
    pub attack: Option<AttackConfig>,
    pub detection: DetectionConfig,
    pub repetitions: usize,
    pub threads: usize,
    pub outputs: OutputSinks,
    pub rates_t_max: f64,
    pub rates_points: usize,
    pub threshold_sweep: ThresholdSweep,
    pub threshold_max: Option<f64>,
    pub threshold_steps: usize,
    /// Cartesian sweep axes for the `sweep` subcommand.
    pub sweep: Vec<(String, Vec<f64>)>,
    pub flat: FlatSpec,
    pub spec_hash: String,
}

/// Reads `t,rate` rows; blank lines, `#` comments and a non-numeric header
/// row are skipped.
pub fn read_rate_table(path: &Path) -> Result<Vec<(f64, f64)>, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = (fields.len() == 2)
            .then(|| {
                Some((
                    fields[0].parse::<f64>().ok()?,
                    fields[1].parse::<f64>().ok()?,
                ))
            })
            .flatten();
        match parsed {
            Some(row) => rows.push(row),
            None if rows.is_empty() && n == 0 => continue,
            None => {
                return Err(invalid(
                    "channel.rate_file",
                    format!("{}:{}: expected `t,rate`", path.display(), n + 1),
                ))
            }
        }
    }
    Ok(rows)
}

fn build_model(flat: &FlatSpec) -> Result<DecayModel, ConfigError> {
    let kind = flat.string("channel.model")?.unwrap_or("lorentz_drude");
    fn to_invalid(key: &'static str) -> impl Fn(cvqkd_core::Error) -> ConfigError {
        move |e| invalid(key, e.to_string())
    }
    match kind {
        "markovian" => {
            let g = require_positive("channel.gamma_m", flat.number("channel.gamma_m")?)?;
            DecayModel::markovian(g).map_err(to_invalid("channel.gamma_m"))
        }
        "lorentz_drude" => {
            let g = require_positive("channel.gamma_m", flat.number("channel.gamma_m")?)?;
            let w0 = require_positive("channel.omega_0", flat.number("channel.omega_0")?)?;
            let wc = require_positive("channel.omega_c", flat.number("channel.omega_c")?)?;
            DecayModel::lorentz_drude(g, w0, wc).map_err(to_invalid("channel"))
        }
        "tabulated" => {
            let file = flat
                .string("channel.rate_file")?
                .ok_or_else(|| invalid("channel.rate_file", "required for a tabulated channel"))?;
            let rows = read_rate_table(&flat.base_dir.join(file))?;
            DecayModel::tabulated(rows).map_err(to_invalid("channel.rate_file"))
        }
        other => Err(invalid(
            "channel.model",
            format!("unknown model `{other}` (lorentz_drude, markovian, tabulated)"),
        )),
    }
}

impl ExperimentSpec {
    pub fn from_flat(flat: FlatSpec) -> Result<Self, ConfigError> {
        let model = build_model(&flat)?;
        let tau = require_positive("channel.tau", flat.number("channel.tau")?)?;
        let profile =
            DampingProfile::new(model, tau).map_err(|e| invalid("channel.tau", e.to_string()))?;

        let seed = flat.count("session.seed")?.unwrap_or(0);
        let mut session = SessionConfig::with_defaults(profile, seed);
        session.delta_t = match flat.number("session.delta_t")? {
            Some(_) => require_positive("session.delta_t", flat.number("session.delta_t")?)?,
            None => default_delay(&session.profile),
        };
        session.modulation_variance = flat
            .number("session.modulation_variance")?
            .unwrap_or(10.0 * SHOT_NOISE);
        if !(session.modulation_variance >= 0.0 && session.modulation_variance.is_finite()) {
            return Err(invalid("session.modulation_variance", "must be >= 0"));
        }
        let re = flat
            .number("session.alpha0_re")?
            .unwrap_or(DEFAULT_REFERENCE_AMPLITUDE);
        let im = flat.number("session.alpha0_im")?.unwrap_or(0.0);
        session.reference_amplitude = CoherentAmplitude::new(re, im)
            .map_err(|e| invalid("session.alpha0_re", e.to_string()))?;
        session.n_key = flat.count("session.n_key")?.unwrap_or(DEFAULT_N_KEY as u64) as usize;
        session.n_ref = flat.count("session.n_ref")?.unwrap_or(DEFAULT_N_REF as u64) as usize;

        let attack = match flat.number("attack.t_e")? {
            None => {
                if flat.values.contains_key("attack.eta_e") {
                    return Err(invalid("attack.t_e", "required when attack.eta_e is set"));
                }
                None
            }
            Some(t_e) => {
                if !(t_e >= 0.0 && t_e <= tau) {
                    return Err(invalid(
                        "attack.t_e",
                        format!("must satisfy 0 <= t_e <= channel.tau = {tau}, got {t_e}"),
                    ));
                }
                let eta_e = match flat.values.get("attack.eta_e") {
                    None => EveTransmissivity::Auto,
                    Some(Value::String(s)) if s == "auto" => EveTransmissivity::Auto,
                    Some(v) => {
                        let eta = as_number("attack.eta_e", v)?;
                        if !(0.0..=1.0).contains(&eta) {
                            return Err(invalid(
                                "attack.eta_e",
                                format!("must lie in [0, 1], got {eta}"),
                            ));
                        }
                        EveTransmissivity::Fixed(eta)
                    }
                };
                Some(AttackConfig { t_e, eta_e })
            }
        };

        let detection = DetectionConfig {
            epsilon: flat.number("detection.epsilon")?.unwrap_or(0.0),
            significance_sigmas: flat.number("detection.significance_sigmas")?.unwrap_or(3.0),
            grid_resolution: flat
                .count("detection.grid_resolution")?
                .unwrap_or(DEFAULT_GRID_RESOLUTION as u64) as usize,
        };
        if detection.epsilon.is_nan() || detection.epsilon < 0.0 {
            return Err(invalid("detection.epsilon", "must be >= 0"));
        }
        if detection.significance_sigmas.is_nan() || detection.significance_sigmas <= 0.0 {
            return Err(invalid("detection.significance_sigmas", "must be > 0"));
        }
        if detection.grid_resolution < 2 {
            return Err(invalid("detection.grid_resolution", "must be >= 2"));
        }

        let repetitions = flat.count("run.repetitions")?.unwrap_or(1) as usize;
        if repetitions < 1 {
            return Err(invalid("run.repetitions", "must be >= 1"));
        }
        let threads = flat.count("run.threads")?.unwrap_or(0) as usize;
        let outputs = OutputSinks {
            reports: flat.flag("output.reports")?.unwrap_or(true),
            transcripts: flat.flag("output.transcripts")?.unwrap_or(false),
        };

        let rates_t_max = match flat.number("rates.t_max")? {
            None => tau,
            v => require_positive("rates.t_max", v)?,
        };
        let rates_points = flat.count("rates.points")?.unwrap_or(1001) as usize;
        if rates_points < 2 {
            return Err(invalid("rates.points", "must be >= 2"));
        }
        let threshold_sweep = match flat.string("threshold.sweep")?.unwrap_or("epsilon") {
            "epsilon" => ThresholdSweep::Epsilon,
            "t_e_star" => ThresholdSweep::TeStar,
            other => {
                return Err(invalid(
                    "threshold.sweep",
                    format!("unknown sweep `{other}`"),
                ))
            }
        };
        let threshold_max = match flat.number("threshold.max")? {
            None => None,
            Some(m) if m >= 0.0 && m.is_finite() => Some(m),
            Some(m) => return Err(invalid("threshold.max", format!("must be >= 0, got {m}"))),
        };
        if threshold_sweep == ThresholdSweep::TeStar && threshold_max.is_some_and(|m| m > tau) {
            return Err(invalid(
                "threshold.max",
                "t_e_star sweep cannot extend past channel.tau",
            ));
        }
        let threshold_steps = flat.count("threshold.steps")?.unwrap_or(21) as usize;
        if threshold_steps < 2 {
            return Err(invalid("threshold.steps", "must be >= 2"));
        }

        let sweep = flat
            .sweep
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let spec_hash = flat.hash();
        Ok(Self {
            session,
            attack,
            detection,
            repetitions,
            threads,
            outputs,
            rates_t_max,
            rates_points,
            threshold_sweep,
            threshold_max,
            threshold_steps,
            sweep,
            flat,
            spec_hash,
        })
    }

    /// Same spec with one numeric key replaced, revalidated.
    pub fn with_override(&self, key: &str, value: f64) -> Result<Self, ConfigError> {
        let mut flat = self.flat.clone();
        flat.set_number(key, value);
        Self::from_flat(flat)
    }

    pub fn seed(&self) -> u64 {
        self.session.seed
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub repetitions: Option<usize>,
    pub threads: Option<usize>,
}

pub fn parse_spec(
    text: &str,
    base_dir: impl Into<PathBuf>,
    overrides: Overrides,
) -> Result<ExperimentSpec, ConfigError> {
    let mut flat = FlatSpec::parse(text, base_dir)?;
    if let Some(seed) = overrides.seed {
        let seed = i64::try_from(seed)
            .map_err(|_| invalid("session.seed", "must fit in a signed 64-bit integer"))?;
        flat.set_integer("session.seed", seed);
    }
    if let Some(reps) = overrides.repetitions {
        flat.set_integer("run.repetitions", reps as i64);
    }
    if let Some(threads) = overrides.threads {
        flat.set_integer("run.threads", threads as i64);
    }
    ExperimentSpec::from_flat(flat)
}

/// Loads and validates a spec file.
pub fn load_spec(path: &Path, overrides: Overrides) -> Result<ExperimentSpec, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_spec(&text, base, overrides)
}
