//! Experiment configuration: schema, parsing with positions, and semantic
//! validation that reports every problem with the path of the offending field.

use std::fmt;
use std::path::Path;

use psbr::analysis::Observable;
use psbr::dipole_geometry::alignment_set_4ls;
use psbr::propagation::{linear_grid, log_grid};
use psbr::{AlignmentSet, DipoleVector, GeneratorOptions, RampProfile, RateInput, ReducedState, SystemSpec};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const DEFAULT_T_MIN: f64 = 1e-2;
pub const DEFAULT_T_END: f64 = 1e4;
/// End of the grid used for steady-state checks.
pub const STEADY_T_END: f64 = 1e6;
pub const DEFAULT_N_TIMES: usize = 601;
pub const DEFAULT_TOLERANCE: f64 = 1e-12;
/// Decay fits stop two decades below the peak, before sub-percent tails fed
/// by the other manifold take over.
pub const DEFAULT_DECAY_FLOOR: f64 = 1e-2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// Free text; presets use it to record their parameter choices.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub comment: String,
    pub system: SystemSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alignment: Option<AlignmentSet>,
    /// Dipoles of g1e1, g1e2, g2e1, g2e2, used only for the alignments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dipoles: Option<Vec<DipoleVector>>,
    #[serde(default)]
    pub generator: GeneratorOptions,
    /// pop_g1, pop_g2, pop_e1, pop_e2, Re/Im ρ_g1g2, Re/Im ρ_e1e2. Defaults
    /// to the ground-state mixture.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<[f64; 8]>,
    #[serde(default)]
    pub propagation: PropagationConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    /// Eigendecomposition, falling back to the ODE integrator.
    #[default]
    Auto,
    Eigen,
    Ode,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    /// `n_times` points from `t_min` to `t_end`, log spaced.
    #[default]
    Log,
    /// `n_times` points from 0 to `t_end`.
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationConfig {
    #[serde(default)]
    pub method: MethodChoice,
    #[serde(default)]
    pub grid: GridKind,
    #[serde(default = "default_t_min")]
    pub t_min: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_n_times")]
    pub n_times: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_ramp")]
    pub ramp: RampProfile,
}

fn default_t_min() -> f64 {
    DEFAULT_T_MIN
}
fn default_t_end() -> f64 {
    DEFAULT_T_END
}
fn default_n_times() -> usize {
    DEFAULT_N_TIMES
}
fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}
fn default_ramp() -> RampProfile {
    RampProfile::SUDDEN
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self {
            method: MethodChoice::Auto,
            grid: GridKind::Log,
            t_min: DEFAULT_T_MIN,
            t_end: DEFAULT_T_END,
            n_times: DEFAULT_N_TIMES,
            tolerance: DEFAULT_TOLERANCE,
            ramp: RampProfile::SUDDEN,
        }
    }
}

impl PropagationConfig {
    pub fn times(&self) -> psbr::Result<Vec<f64>> {
        match self.grid {
            GridKind::Log => log_grid(self.t_min, self.t_end, self.n_times),
            GridKind::Linear => linear_grid(0.0, self.t_end, self.n_times),
        }
    }

    pub fn t_start(&self) -> f64 {
        match self.grid {
            GridKind::Log => self.t_min,
            GridKind::Linear => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default = "default_observables")]
    pub observables: Vec<Observable>,
    /// Window for oscillation metrics; none skips them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oscillation_window: Option<(f64, f64)>,
    #[serde(default = "default_true")]
    pub plateaus: bool,
    #[serde(default = "default_min_decades")]
    pub plateau_min_decades: f64,
    /// Decay fits stop once the observable drops below this fraction of its peak.
    #[serde(default = "default_decay_floor")]
    pub decay_floor: f64,
}

fn default_observables() -> Vec<Observable> {
    vec![Observable::PopG1, Observable::CohGAbs, Observable::CohEAbs]
}
fn default_true() -> bool {
    true
}
fn default_min_decades() -> f64 {
    psbr::analysis::PLATEAU_MIN_DECADES
}
fn default_decay_floor() -> f64 {
    DEFAULT_DECAY_FLOOR
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            observables: default_observables(),
            oscillation_window: None,
            plateaus: true,
            plateau_min_decades: default_min_decades(),
            decay_floor: DEFAULT_DECAY_FLOOR,
        }
    }
}

/// One parameter varied over a grid; `parameter` is a path into the config
/// such as `system.delta_e` or `system.bath.occupation[1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub tau_c: f64,
    #[serde(default = "default_realizations")]
    pub n_realizations: usize,
    /// Pulse durations for the pulse-coherence table.
    pub tau_p: Vec<f64>,
    /// Window separations in units of τ_c for the visibility table.
    pub separations: Vec<f64>,
}

fn default_realizations() -> usize {
    10_000
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Used when no --out is given on the command line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: None,
            formats: default_formats(),
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

// ---------------------------------------------------------------------------
// Errors

#[derive(Clone, Debug, PartialEq)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConfigError {
    /// Not valid JSON, or not of the expected shape.
    Parse {
        line: usize,
        column: usize,
        path: Option<String>,
        message: String,
    },
    /// Well-formed but semantically invalid; every problem found.
    Invalid(Vec<Issue>),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse {
                line,
                column,
                path,
                message,
            } => {
                write!(f, "parse error at line {line}, column {column}")?;
                if let Some(p) = path {
                    write!(f, " ({p})")?;
                }
                write!(f, ": {message}")
            }
            ConfigError::Invalid(issues) => {
                write!(f, "{} invalid setting(s):", issues.len())?;
                for i in issues {
                    write!(f, "\n  {i}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    pub fn issues(&self) -> &[Issue] {
        match self {
            ConfigError::Invalid(v) => v,
            ConfigError::Parse { .. } => &[],
        }
    }
}

// ---------------------------------------------------------------------------
// Loading

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    // Syntax first, so a shape error is never reported for broken JSON.
    if let Err(e) = serde_json::from_str::<Value>(text) {
        return Err(ConfigError::Parse {
            line: e.line(),
            column: e.column(),
            path: None,
            message: e.to_string(),
        });
    }
    let mut de = serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        ConfigError::Parse {
            line: inner.line(),
            column: inner.column(),
            path: (path != ".").then_some(path),
            message: inner.to_string(),
        }
    })?;
    let issues = cfg.validate();
    if issues.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError::Invalid(issues))
    }
}

#[derive(Debug)]
pub enum LoadError {
    Io(std::io::Error),
    Config(ConfigError),
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, LoadError> {
    let text = std::fs::read_to_string(path).map_err(LoadError::Io)?;
    parse_config(&text).map_err(LoadError::Config)
}

pub fn to_json(cfg: &ExperimentConfig) -> String {
    let mut s = serde_json::to_string_pretty(cfg).expect("config serialises");
    s.push('\n');
    s
}

// ---------------------------------------------------------------------------
// Validation

struct Issues(Vec<Issue>);

impl Issues {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(Issue {
            path: path.into(),
            message: message.into(),
        });
    }
}

impl ExperimentConfig {
    /// All semantic problems, in field order. Empty means valid.
    pub fn validate(&self) -> Vec<Issue> {
        let mut out = Issues(Vec::new());
        self.validate_point(&mut out);
        if let Some(sw) = &self.sweep {
            self.validate_sweep(sw, &mut out);
        }
        if let Some(f) = &self.field {
            validate_field(f, &mut out);
        }
        out.0
    }

    fn validate_point(&self, out: &mut Issues) {
        if self.name.trim().is_empty() {
            out.push("name", "must not be empty");
        }
        for i in self.system.validate().errors {
            out.push(format!("system.{}", i.field), i.message);
        }

        let physical = matches!(self.system.rates, RateInput::Physical { .. });
        let given = [self.alignment.is_some(), self.dipoles.is_some(), physical]
            .iter()
            .filter(|b| **b)
            .count();
        if given != 1 {
            out.push(
                "alignment",
                "give exactly one of `alignment`, `dipoles`, or dipoles in `system` (physical mode)",
            );
        }
        if let Some(a) = &self.alignment {
            for name in a.out_of_range() {
                out.push(format!("alignment.{name}"), "must lie in [-1, 1]");
            }
        }
        if let Some(d) = &self.dipoles {
            if d.len() != 4 {
                out.push("dipoles", format!("expected 4 dipoles (g1e1, g1e2, g2e1, g2e2), got {}", d.len()));
            }
            for (k, v) in d.iter().enumerate() {
                if v.is_forbidden() {
                    out.push(format!("dipoles[{k}]"), "dipole has zero norm");
                }
            }
        }

        if let Some(x) = &self.initial_state {
            let s = ReducedState::from_array(*x);
            if x.iter().any(|v| !v.is_finite()) {
                out.push("initial_state", "components must be finite");
            } else if let Err(e) = s.check_physical(1e-9, 1e-9) {
                out.push("initial_state", e.to_string());
            }
        }

        let p = &self.propagation;
        if !(p.t_end > 0.0 && p.t_end.is_finite()) {
            out.push("propagation.t_end", format!("must be > 0, got {}", p.t_end));
        }
        if p.grid == GridKind::Log && !(p.t_min > 0.0 && p.t_min < p.t_end) {
            out.push("propagation.t_min", format!("must lie in (0, t_end), got {}", p.t_min));
        }
        if p.n_times < 2 {
            out.push("propagation.n_times", format!("need at least 2 times, got {}", p.n_times));
        }
        if !(p.tolerance > 0.0 && p.tolerance < 1.0) {
            out.push("propagation.tolerance", format!("must lie in (0, 1), got {}", p.tolerance));
        }
        if let Err(e) = p.ramp.validate() {
            out.push("propagation.ramp", e.to_string());
        }
        if p.ramp.tau_r > 0.0 && p.method == MethodChoice::Eigen {
            out.push("propagation.method", "a ramped drive needs the ODE integrator");
        }

        let a = &self.analysis;
        if let Some((lo, hi)) = a.oscillation_window {
            if !(hi > lo) || lo < p.t_start() || hi > p.t_end {
                out.push(
                    "analysis.oscillation_window",
                    format!("[{lo}, {hi}] must be a non-empty part of [{}, {}]", p.t_start(), p.t_end),
                );
            }
        }
        if !(a.plateau_min_decades >= 0.0) {
            out.push("analysis.plateau_min_decades", "must be ≥ 0");
        }
        if !(a.decay_floor > 0.0 && a.decay_floor < 1.0) {
            out.push("analysis.decay_floor", "must lie in (0, 1)");
        }
        if self.output.formats.is_empty() {
            out.push("output.formats", "choose at least one of csv, json");
        }
    }

    fn validate_sweep(&self, sw: &SweepConfig, out: &mut Issues) {
        if sw.values.is_empty() {
            out.push("sweep.values", "grid is empty");
        }
        if let Some(k) = sw.values.iter().position(|v| !v.is_finite()) {
            out.push(format!("sweep.values[{k}]"), "must be finite");
        }
        let value = serde_json::to_value(self).expect("config serialises");
        match lookup(&value, &sw.parameter) {
            Err(msg) => out.push("sweep.parameter", msg),
            Ok(v) if !v.is_number() => out.push(
                "sweep.parameter",
                format!("`{}` is not a number", sw.parameter),
            ),
            Ok(_) => {
                for (k, &x) in sw.values.iter().enumerate() {
                    match self.with_parameter(&sw.parameter, x) {
                        Ok(point) => {
                            let mut inner = Issues(Vec::new());
                            point.validate_point(&mut inner);
                            for i in inner.0 {
                                out.push(format!("sweep.values[{k}]"), format!("{}: {}", i.path, i.message));
                            }
                        }
                        Err(e) => out.push(format!("sweep.values[{k}]"), e),
                    }
                }
            }
        }
    }

    pub fn alignment_set(&self) -> psbr::Result<AlignmentSet> {
        if let Some(a) = self.alignment {
            return Ok(a);
        }
        if let Some(d) = &self.dipoles {
            if let [a, b, c, e] = d.as_slice() {
                return alignment_set_4ls(a, b, c, e);
            }
            return Err(psbr::Error::Config(format!("expected 4 dipoles, got {}", d.len())));
        }
        self.system
            .dipole_alignments()
            .unwrap_or_else(|| Err(psbr::Error::Config("no alignment given".into())))
    }

    pub fn initial(&self) -> ReducedState {
        self.initial_state
            .map(ReducedState::from_array)
            .unwrap_or_else(ReducedState::ground_mixture)
    }

    /// Copy with the number at `path` replaced by `x`. The sweep section is
    /// dropped from the copy.
    pub fn with_parameter(&self, path: &str, x: f64) -> Result<ExperimentConfig, String> {
        let mut value = serde_json::to_value(self).expect("config serialises");
        let slot = lookup_mut(&mut value, path)?;
        if !slot.is_number() {
            return Err(format!("`{path}` is not a number"));
        }
        *slot = serde_json::Number::from_f64(x)
            .map(Value::Number)
            .ok_or_else(|| format!("{x} is not representable"))?;
        if let Value::Object(m) = &mut value {
            m.remove("sweep");
        }
        serde_json::from_value(value).map_err(|e| format!("`{path}` = {x}: {e}"))
    }
}

fn validate_field(f: &FieldConfig, out: &mut Issues) {
    if !(f.tau_c > 0.0 && f.tau_c.is_finite()) {
        out.push("field.tau_c", format!("must be finite and > 0, got {}", f.tau_c));
    }
    if f.n_realizations < psbr::semiclassical_field::MIN_REALIZATIONS {
        out.push(
            "field.n_realizations",
            format!("need at least {}", psbr::semiclassical_field::MIN_REALIZATIONS),
        );
    }
    if f.tau_p.is_empty() {
        out.push("field.tau_p", "grid is empty");
    }
    for (k, t) in f.tau_p.iter().enumerate() {
        if !(*t > 0.0 && t.is_finite()) {
            out.push(format!("field.tau_p[{k}]"), "must be finite and > 0");
        }
    }
    for (k, s) in f.separations.iter().enumerate() {
        if !(*s >= 0.0 && s.is_finite()) {
            out.push(format!("field.separations[{k}]"), "must be finite and ≥ 0");
        }
    }
}

enum Segment<'a> {
    Key(&'a str),
    Index(usize),
}

fn segments(path: &str) -> Result<Vec<Segment<'_>>, String> {
    let mut out = Vec::new();
    for part in path.split('.') {
        let (key, mut rest) = match part.find('[') {
            Some(i) => (&part[..i], &part[i..]),
            None => (part, ""),
        };
        if key.is_empty() {
            return Err(format!("malformed path `{path}`"));
        }
        out.push(Segment::Key(key));
        while !rest.is_empty() {
            let close = rest.find(']').ok_or_else(|| format!("malformed path `{path}`"))?;
            let idx = rest[1..close]
                .parse()
                .map_err(|_| format!("malformed index in `{path}`"))?;
            out.push(Segment::Index(idx));
            rest = &rest[close + 1..];
            if !rest.is_empty() && !rest.starts_with('[') {
                return Err(format!("malformed path `{path}`"));
            }
        }
    }
    Ok(out)
}

fn lookup<'v>(value: &'v Value, path: &str) -> Result<&'v Value, String> {
    let mut v = value;
    for s in segments(path)? {
        v = match s {
            Segment::Key(k) => v.get(k),
            Segment::Index(i) => v.get(i),
        }
        .ok_or_else(|| format!("`{path}` does not name a field of this config"))?;
    }
    Ok(v)
}

fn lookup_mut<'v>(value: &'v mut Value, path: &str) -> Result<&'v mut Value, String> {
    let mut v = value;
    for s in segments(path)? {
        v = match s {
            Segment::Key(k) => v.get_mut(k),
            Segment::Index(i) => v.get_mut(i),
        }
        .ok_or_else(|| format!("`{path}` does not name a field of this config"))?;
    }
    Ok(v)
}
