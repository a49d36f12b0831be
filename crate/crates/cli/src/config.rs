//! `key = value unit` scenario files.
//!
//! Frequencies take `MHz`, `kHz`, `GHz` or `rad/us`; times take `us`, `ns` or
//! `ms`. Dimensionless values may carry the suffix `dimensionless` or none.
//! `#` starts a comment. Values are stored in rad/μs and μs.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use clocksense_core::ensemble::FitMethod;
use clocksense_core::experiments::{
    DephasingSpec, SensingInitial, SensingModel, SensingSpec, SpectrumSpec, SweepVariable,
};
use clocksense_core::hamiltonians::{DriveScheme, Frame};
use clocksense_core::noise::{DephasingCalibration, InitialCondition};
use clocksense_core::propagator::Stepper;
use clocksense_core::TWO_PI;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        ConfigError {
            line: Some(line),
            message: message.into(),
        }
    }

    fn global(message: impl Into<String>) -> Self {
        ConfigError {
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Frequency,
    Time,
    Dimensionless,
    Integer,
    Text,
}

const KEYS: &[(&str, Kind)] = &[
    ("experiment", Kind::Text),
    ("output_dir", Kind::Text),
    ("base_seed", Kind::Integer),
    ("n_trials", Kind::Integer),
    ("n_threads", Kind::Text),
    ("D", Kind::Frequency),
    ("Ex", Kind::Frequency),
    ("omega1", Kind::Frequency),
    ("omega2", Kind::Frequency),
    ("T2_star", Kind::Time),
    ("tau", Kind::Time),
    ("calibration", Kind::Text),
    ("delta_omega", Kind::Dimensionless),
    ("tau_omega", Kind::Time),
    ("amplitude_initial", Kind::Text),
    ("frame", Kind::Text),
    ("schemes", Kind::Text),
    ("fit", Kind::Text),
    ("stepper", Kind::Text),
    ("guard", Kind::Dimensionless),
    ("dt", Kind::Time),
    ("t_end", Kind::Time),
    ("sample_interval", Kind::Time),
    ("omega_ac", Kind::Frequency),
    ("g", Kind::Frequency),
    ("ratio", Kind::Dimensionless),
    ("model", Kind::Text),
    ("initial_state", Kind::Text),
    ("t_probe", Kind::Time),
    ("sweep", Kind::Text),
    ("sweep_center", Kind::Frequency),
    ("sweep_half_width", Kind::Frequency),
    ("sweep_points", Kind::Integer),
];

/// Keys that may be suffixed with `.<scheme>` in dephasing runs.
const PER_SCHEME: &[&str] = &["t_end", "sample_interval", "guard"];

fn kind_of(key: &str) -> Option<Kind> {
    let base = match key.split_once('.') {
        Some((b, scheme)) if PER_SCHEME.contains(&b) && DriveScheme::parse(scheme).is_some() => b,
        Some(_) => return None,
        None => key,
    };
    KEYS.iter().find(|(k, _)| *k == base).map(|(_, kind)| *kind)
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Number(f64),
    Integer(u64),
    Text(String),
}

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: Value,
    used: bool,
}

fn parse_number(line: usize, key: &str, s: &str) -> Result<f64, ConfigError> {
    match s {
        "inf" | "infinity" => Ok(f64::INFINITY),
        _ => s
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| ConfigError::at(line, format!("{key}: '{s}' is not a number"))),
    }
}

fn parse_value(line: usize, key: &str, kind: Kind, raw: &str) -> Result<Value, ConfigError> {
    let mut parts = raw.split_whitespace();
    let number = parts.next().unwrap_or("");
    let unit: Vec<&str> = parts.collect();
    let unit = unit.join(" ");
    match kind {
        Kind::Text => Ok(Value::Text(raw.to_string())),
        Kind::Integer => {
            if !unit.is_empty() && unit != "dimensionless" {
                return Err(ConfigError::at(line, format!("{key} is a count and takes no unit, got '{unit}'")));
            }
            number
                .parse::<u64>()
                .map(Value::Integer)
                .map_err(|_| ConfigError::at(line, format!("{key}: '{number}' is not a non-negative integer")))
        }
        Kind::Dimensionless => {
            if !unit.is_empty() && unit != "dimensionless" {
                return Err(ConfigError::at(line, format!("{key} is dimensionless, got unit '{unit}'")));
            }
            parse_number(line, key, number).map(Value::Number)
        }
        Kind::Frequency => {
            let scale = match unit.as_str() {
                "MHz" => TWO_PI,
                "kHz" => TWO_PI * 1e-3,
                "GHz" => TWO_PI * 1e3,
                "rad/us" => 1.0,
                "" => {
                    return Err(ConfigError::at(
                        line,
                        format!("{key} is a frequency and needs a unit (MHz, kHz, GHz or rad/us)"),
                    ))
                }
                u => return Err(ConfigError::at(line, format!("{key}: unknown frequency unit '{u}'"))),
            };
            Ok(Value::Number(parse_number(line, key, number)? * scale))
        }
        Kind::Time => {
            let scale = match unit.as_str() {
                "us" => 1.0,
                "ns" => 1e-3,
                "ms" => 1e3,
                "" => return Err(ConfigError::at(line, format!("{key} is a time and needs a unit (us, ns or ms)"))),
                u => return Err(ConfigError::at(line, format!("{key}: unknown time unit '{u}'"))),
            };
            Ok(Value::Number(parse_number(line, key, number)? * scale))
        }
    }
}

/// Parsed file: every key once, with its line for error reporting.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, Entry>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| ConfigError::at(line, format!("expected 'key = value', got '{content}'")))?;
            let (key, value) = (key.trim(), value.trim());
            let kind = kind_of(key).ok_or_else(|| ConfigError::at(line, format!("unknown key '{key}'")))?;
            if value.is_empty() {
                return Err(ConfigError::at(line, format!("{key} has no value")));
            }
            let value = parse_value(line, key, kind, value)?;
            if let Some(prev) = entries.insert(
                key.to_string(),
                Entry {
                    line,
                    value,
                    used: false,
                },
            ) {
                return Err(ConfigError::at(line, format!("{key} already set on line {}", prev.line)));
            }
        }
        Ok(RawConfig { entries })
    }

    fn take(&mut self, key: &str) -> Option<(usize, Value)> {
        self.entries.get_mut(key).map(|e| {
            e.used = true;
            (e.line, e.value.clone())
        })
    }

    fn number(&mut self, key: &str) -> Option<(usize, f64)> {
        match self.take(key) {
            Some((l, Value::Number(v))) => Some((l, v)),
            _ => None,
        }
    }

    fn positive(&mut self, key: &str, target: &mut f64) -> Result<(), ConfigError> {
        if let Some((line, v)) = self.number(key) {
            if !(v > 0.0) {
                return Err(ConfigError::at(line, format!("{key} must be > 0")));
            }
            *target = v;
        }
        Ok(())
    }

    fn non_negative(&mut self, key: &str, target: &mut f64) -> Result<(), ConfigError> {
        if let Some((line, v)) = self.number(key) {
            if !(v >= 0.0) {
                return Err(ConfigError::at(line, format!("{key} must be >= 0")));
            }
            *target = v;
        }
        Ok(())
    }

    fn integer(&mut self, key: &str) -> Option<(usize, u64)> {
        match self.take(key) {
            Some((l, Value::Integer(v))) => Some((l, v)),
            _ => None,
        }
    }

    fn text(&mut self, key: &str) -> Option<(usize, String)> {
        match self.take(key) {
            Some((l, Value::Text(v))) => Some((l, v)),
            _ => None,
        }
    }

    fn choice<T>(&mut self, key: &str, parse: impl Fn(&str) -> Option<T>, options: &str) -> Result<Option<T>, ConfigError> {
        match self.text(key) {
            Some((line, v)) => parse(&v)
                .map(Some)
                .ok_or_else(|| ConfigError::at(line, format!("{key}: '{v}' is not one of {options}"))),
            None => Ok(None),
        }
    }

    /// Keys present in the file that the chosen experiment never read.
    pub fn unused(&self) -> Vec<(usize, String)> {
        let mut v: Vec<_> = self
            .entries
            .iter()
            .filter(|(_, e)| !e.used)
            .map(|(k, e)| (e.line, k.clone()))
            .collect();
        v.sort();
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Experiment {
    Dephasing {
        spec: DephasingSpec,
        schemes: Vec<DriveScheme>,
    },
    Trace(SensingSpec),
    Spectrum {
        spec: SpectrumSpec,
        /// Grid center and half width (rad/us) the grid was built from.
        center: f64,
        half_width: f64,
    },
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Dephasing { .. } => "dephasing_comparison",
            Experiment::Trace(_) => "ac_sensing_trace",
            Experiment::Spectrum { .. } => "ac_spectrum",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Threads {
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub output_dir: PathBuf,
    pub threads: Option<Threads>,
    /// Keys set in the file but not used by this experiment.
    pub unused: Vec<(usize, String)>,
}

fn parse_calibration(s: &str) -> Option<DephasingCalibration> {
    match s {
        "diffusion_formula" => Some(DephasingCalibration::DiffusionFormula),
        "clock_gap" => Some(DephasingCalibration::ClockGap),
        _ => None,
    }
}

pub fn calibration_name(c: DephasingCalibration) -> &'static str {
    match c {
        DephasingCalibration::DiffusionFormula => "diffusion_formula",
        DephasingCalibration::ClockGap => "clock_gap",
    }
}

fn parse_initial(s: &str) -> Option<InitialCondition> {
    match s {
        "zero" => Some(InitialCondition::Zero),
        "stationary" => Some(InitialCondition::Stationary),
        // a fixed starting offset in rad/us
        _ => s.parse().ok().filter(|v: &f64| v.is_finite()).map(InitialCondition::Value),
    }
}

pub fn initial_name(c: InitialCondition) -> String {
    match c {
        InitialCondition::Zero => "zero".into(),
        InitialCondition::Stationary => "stationary".into(),
        InitialCondition::Value(v) => format!("{v}"),
    }
}

fn parse_fit(s: &str) -> Option<FitMethod> {
    [FitMethod::Envelope1e, FitMethod::StretchedExp].into_iter().find(|f| f.tag() == s)
}

const SCHEME_NAMES: &str = "none, linear, orthogonal, phase_modulated";

fn common_noise(
    raw: &mut RawConfig,
    t2_star: &mut f64,
    tau: &mut f64,
    calibration: &mut DephasingCalibration,
    delta_omega: &mut f64,
    tau_omega: &mut f64,
    amplitude_initial: &mut InitialCondition,
) -> Result<(), ConfigError> {
    raw.positive("T2_star", t2_star)?;
    raw.positive("tau", tau)?;
    if let Some(c) = raw.choice("calibration", parse_calibration, "diffusion_formula, clock_gap")? {
        *calibration = c;
    }
    raw.non_negative("delta_omega", delta_omega)?;
    raw.positive("tau_omega", tau_omega)?;
    if let Some(c) = raw.choice("amplitude_initial", parse_initial, "zero, stationary or a number")? {
        *amplitude_initial = c;
    }
    Ok(())
}

fn dephasing(raw: &mut RawConfig) -> Result<Experiment, ConfigError> {
    let mut spec = DephasingSpec::default();
    raw.positive("D", &mut spec.d)?;
    raw.positive("Ex", &mut spec.ex)?;
    raw.positive("omega1", &mut spec.omega1)?;
    raw.non_negative("omega2", &mut spec.omega2)?;
    common_noise(
        raw,
        &mut spec.t2_star,
        &mut spec.tau,
        &mut spec.calibration,
        &mut spec.delta_omega,
        &mut spec.tau_omega,
        &mut spec.amplitude_initial,
    )?;
    if let Some(f) = raw.choice("frame", Frame::parse, "lab, rot_rwa, rot_exact")? {
        spec.frame = f;
    }
    if let Some(f) = raw.choice("fit", parse_fit, "envelope_1e, stretched_exp_fit")? {
        spec.fit = f;
    }
    if let Some(s) = raw.choice("stepper", Stepper::parse, "magnus4, midpoint")? {
        spec.stepper = s;
    }
    if let Some((_, n)) = raw.integer("n_trials") {
        spec.n_trials = n as usize;
    }
    if let Some((_, s)) = raw.integer("base_seed") {
        spec.base_seed = s;
    }
    if let Some((line, dt)) = raw.number("dt") {
        if !(dt > 0.0) {
            return Err(ConfigError::at(line, "dt must be > 0"));
        }
        spec.dt = Some(dt);
    }
    for key in PER_SCHEME {
        let target: &mut [f64; 4] = match *key {
            "t_end" => &mut spec.t_end,
            "sample_interval" => &mut spec.sample_interval,
            _ => &mut spec.guard,
        };
        let mut all = f64::NAN;
        raw.positive(key, &mut all)?;
        if !all.is_nan() {
            *target = [all; 4];
        }
        for (k, scheme) in DriveScheme::ALL.iter().enumerate() {
            raw.positive(&format!("{key}.{}", scheme.name()), &mut target[k])?;
        }
    }
    let schemes = match raw.text("schemes") {
        Some((line, list)) => list
            .split(',')
            .map(|s| {
                DriveScheme::parse(s.trim())
                    .ok_or_else(|| ConfigError::at(line, format!("schemes: '{}' is not one of {SCHEME_NAMES}", s.trim())))
            })
            .collect::<Result<Vec<_>, _>>()?,
        None => DriveScheme::ALL.to_vec(),
    };
    Ok(Experiment::Dephasing { spec, schemes })
}

fn sensing(raw: &mut RawConfig) -> Result<SensingSpec, ConfigError> {
    let mut spec = SensingSpec::default();
    raw.positive("D", &mut spec.d)?;
    raw.positive("Ex", &mut spec.ex)?;
    raw.positive("omega_ac", &mut spec.omega_ac)?;
    raw.non_negative("g", &mut spec.g)?;
    raw.positive("ratio", &mut spec.ratio)?;
    common_noise(
        raw,
        &mut spec.t2_star,
        &mut spec.tau,
        &mut spec.calibration,
        &mut spec.delta_omega,
        &mut spec.tau_omega,
        &mut spec.amplitude_initial,
    )?;
    if let Some(m) = raw.choice("model", SensingModel::parse, "effective, full3")? {
        spec.model = m;
    }
    if let Some(i) = raw.choice("initial_state", SensingInitial::parse, "ket0, superposition_scheme_basis")? {
        spec.initial = i;
    }
    if let Some(s) = raw.choice("stepper", Stepper::parse, "magnus4, midpoint")? {
        spec.stepper = s;
    }
    if let Some((_, n)) = raw.integer("n_trials") {
        spec.n_trials = n as usize;
    }
    if let Some((_, s)) = raw.integer("base_seed") {
        spec.base_seed = s;
    }
    raw.positive("t_end", &mut spec.t_end)?;
    raw.positive("sample_interval", &mut spec.sample_interval)?;
    raw.positive("guard", &mut spec.guard)?;
    if let Some((line, dt)) = raw.number("dt") {
        if !(dt > 0.0) {
            return Err(ConfigError::at(line, "dt must be > 0"));
        }
        spec.dt = Some(dt);
    }
    Ok(spec)
}

fn spectrum(raw: &mut RawConfig) -> Result<Experiment, ConfigError> {
    let sensing = sensing(raw)?;
    let mut t_probe = 40.0;
    raw.positive("t_probe", &mut t_probe)?;
    let variable = raw
        .choice("sweep", SweepVariable::parse, "omega1, omega_ac")?
        .unwrap_or_default();
    let center = match raw.number("sweep_center") {
        Some((_, v)) => v,
        None => match sensing.resonant_drive() {
            Ok(d) => match variable {
                SweepVariable::Omega1 => d.omega1,
                SweepVariable::OmegaAc => d.omega_ac,
            },
            // left to validation, which reports the physics guard
            Err(_) => f64::NAN,
        },
    };
    let mut half_width = 0.15;
    raw.positive("sweep_half_width", &mut half_width)?;
    let points = match raw.integer("sweep_points") {
        Some((line, n)) if n < 3 => return Err(ConfigError::at(line, "sweep_points must be >= 3")),
        Some((_, n)) => n as usize,
        None => 25,
    };
    Ok(Experiment::Spectrum {
        spec: SpectrumSpec {
            sensing,
            t_probe,
            variable,
            grid: SpectrumSpec::linear_grid(center, half_width, points),
        },
        center,
        half_width,
    })
}

impl RunConfig {
    /// Parses a scenario; a relative `output_dir` is taken relative to the
    /// config file's directory.
    pub fn from_text(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut raw = RawConfig::parse(text)?;
        let (line, kind) = raw
            .text("experiment")
            .ok_or_else(|| ConfigError::global("missing 'experiment' (dephasing_comparison, ac_sensing_trace or ac_spectrum)"))?;
        let experiment = match kind.as_str() {
            "dephasing_comparison" => dephasing(&mut raw)?,
            "ac_sensing_trace" => Experiment::Trace(sensing(&mut raw)?),
            "ac_spectrum" => spectrum(&mut raw)?,
            other => {
                return Err(ConfigError::at(
                    line,
                    format!("unknown experiment '{other}' (dephasing_comparison, ac_sensing_trace or ac_spectrum)"),
                ))
            }
        };
        let output_dir = match raw.text("output_dir") {
            Some((_, d)) => base_dir.join(d),
            None => base_dir.join("out"),
        };
        let threads = match raw.text("n_threads") {
            None => None,
            Some((_, t)) if t == "auto" => Some(Threads::Auto),
            Some((line, t)) => match t.parse::<usize>() {
                Ok(n) if n > 0 => Some(Threads::Fixed(n)),
                _ => return Err(ConfigError::at(line, format!("n_threads: '{t}' is not 'auto' or a positive integer"))),
            },
        };
        Ok(RunConfig {
            experiment,
            output_dir,
            threads,
            unused: raw.unused(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::global(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_text(&text, base)
    }
}
