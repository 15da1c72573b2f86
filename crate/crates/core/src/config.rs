//! Experiment configuration: one JSON schema shared by every subcommand.
//!
//! Parsing is strict. Unknown keys and out-of-range values are all collected
//! into a single [`Error::Validation`]; malformed JSON and wrongly typed values
//! become [`Error::Parse`] with the line and column of the problem.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::barriers::BarrierSpec;
use crate::error::{Error, Result};
use crate::flow::{Sampling, StepParams, StopCondition};
use crate::geometry::{FrameKind, GridSpec};
use crate::metrics::ScheduleParams;
use crate::perturb::EscapeOptions;
use crate::spectral::Parity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Spectrum,
    Classify,
    Escape,
    BarrierCheck,
    Sweep,
    Audit,
}

/// Named families of initial data, selected by the `family` key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum InitialData {
    /// Constant graph `v = offset`.
    Cylinder {
        #[serde(default)]
        offset: f64,
    },
    /// Unrescaled dumbbell with radius `bell` far out and `neck` at `y = 0`.
    Dumbbell {
        #[serde(default = "default_neck")]
        neck: f64,
        #[serde(default = "one")]
        bell: f64,
        #[serde(default = "default_width")]
        width: f64,
    },
    /// `c + amplitude (y^2 - 2) / (1 + y^2 / length^2)` in the rescaled frame.
    NeckProfile {
        c: f64,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default = "default_length")]
        length: f64,
    },
    /// Cylinder plus `eta (y^3 - 6 y)`.
    NearDegenerate {
        #[serde(default = "default_eta")]
        eta: f64,
    },
    /// `amplitude` times one eigenfunction.
    Mode {
        m: u32,
        #[serde(default)]
        n: u32,
        #[serde(default = "cos")]
        parity: Parity,
        amplitude: f64,
    },
    /// Profile in the `y, theta, v` CSV format.
    Csv { path: PathBuf },
}

fn default_neck() -> f64 {
    0.5
}
fn one() -> f64 {
    1.0
}
fn default_width() -> f64 {
    1.5
}
fn default_amplitude() -> f64 {
    0.3
}
fn default_length() -> f64 {
    4.0
}
fn default_eta() -> f64 {
    2e-4
}
fn cos() -> Parity {
    Parity::Cos
}

impl InitialData {
    fn known_keys(family: &str) -> Option<&'static [&'static str]> {
        Some(match family {
            "cylinder" => &["family", "offset"],
            "dumbbell" => &["family", "neck", "bell", "width"],
            "neck_profile" => &["family", "c", "amplitude", "length"],
            "near_degenerate" => &["family", "eta"],
            "mode" => &["family", "m", "n", "parity", "amplitude"],
            "csv" => &["family", "path"],
            _ => return None,
        })
    }

    /// Frame the family lives in unless overridden.
    pub fn natural_frame(&self) -> FrameKind {
        match self {
            InitialData::Dumbbell { .. } => FrameKind::Unrescaled,
            _ => FrameKind::Rescaled,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub half_length: f64,
    pub n_y: usize,
    pub n_theta: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            half_length: 12.0,
            n_y: 241,
            n_theta: 1,
        }
    }
}

impl GridConfig {
    pub fn spec(&self) -> Result<GridSpec> {
        GridSpec::symmetric(self.half_length, self.n_y, self.n_theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BarrierConfig {
    pub eps: f64,
    pub spec: BarrierSpec,
    /// Spacing of the recorded snapshots.
    pub interval: f64,
    /// Number of randomized perturbations checked against the sandwich.
    pub trials: usize,
}

impl Default for BarrierConfig {
    fn default() -> Self {
        BarrierConfig {
            eps: 1e-3,
            spec: BarrierSpec {
                t_start: 0.02,
                t_end: 0.08,
                ..Default::default()
            },
            interval: 0.0025,
            trials: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditConfig {
    pub eps: Vec<f64>,
    /// Explicit `(a, alpha)` pairs; a compliant synthetic set per `eps`
    /// when absent.
    pub pairs: Option<Vec<(f64, f64)>>,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            eps: vec![1e-1, 1e-2, 1e-3],
            pairs: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub cutoff: (u32, u32),
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig { cutoff: (6, 3) }
    }
}

fn default_stop() -> StopCondition {
    StopCondition::tau_max(10.0)
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_initial() -> InitialData {
    InitialData::Cylinder { offset: 0.0 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default = "default_initial")]
    pub initial: InitialData,
    #[serde(default)]
    pub frame: Option<FrameKind>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub schedule: ScheduleParams,
    #[serde(default)]
    pub step: StepParams,
    #[serde(default = "default_stop")]
    pub stop: StopCondition,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default)]
    pub escape: EscapeOptions,
    #[serde(default)]
    pub a: Option<f64>,
    #[serde(default)]
    pub a_grid: Option<String>,
    #[serde(default)]
    pub barrier: BarrierConfig,
    #[serde(default)]
    pub audit: AuditConfig,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config deserializes")
    }
}

const TOP_KEYS: &[&str] = &[
    "command",
    "initial",
    "frame",
    "grid",
    "schedule",
    "step",
    "stop",
    "sampling",
    "escape",
    "a",
    "a_grid",
    "barrier",
    "audit",
    "spectrum",
    "output_dir",
    "seed",
];

fn keys_of<T: Serialize>(value: &T) -> Vec<String> {
    match serde_json::to_value(value) {
        Ok(Value::Object(m)) => m.keys().cloned().collect(),
        _ => Vec::new(),
    }
}

fn check_keys(obj: &Value, known: &[String], prefix: &str, out: &mut Vec<String>) {
    if let Value::Object(m) = obj {
        for k in m.keys() {
            if !known.iter().any(|s| s == k) {
                out.push(format!("unknown key {prefix}{k}"));
            }
        }
    }
}

fn unknown_keys(root: &Value) -> Vec<String> {
    let mut out = Vec::new();
    let Value::Object(m) = root else {
        out.push("config must be a JSON object".into());
        return out;
    };
    let top: Vec<String> = TOP_KEYS.iter().map(|s| s.to_string()).collect();
    check_keys(root, &top, "", &mut out);
    let sections: [(&str, Vec<String>); 9] = [
        ("grid", keys_of(&GridConfig::default())),
        ("schedule", keys_of(&ScheduleParams::default())),
        ("step", keys_of(&StepParams::default())),
        ("stop", keys_of(&StopCondition::default())),
        ("sampling", keys_of(&Sampling::default())),
        ("escape", keys_of(&EscapeOptions::default())),
        ("barrier", keys_of(&BarrierConfig::default())),
        ("audit", keys_of(&AuditConfig::default())),
        ("spectrum", keys_of(&SpectrumConfig::default())),
    ];
    for (name, known) in &sections {
        if let Some(v) = m.get(*name) {
            check_keys(v, known, &format!("{name}."), &mut out);
        }
    }
    if let Some(Value::Object(b)) = m.get("barrier") {
        if let Some(spec) = b.get("spec") {
            check_keys(spec, &keys_of(&BarrierSpec::default()), "barrier.spec.", &mut out);
        }
    }
    if let Some(Value::Object(s)) = m.get("stop") {
        if let Some(g) = s.get("graphicality") {
            let known = vec!["delta".to_string(), "radius".to_string()];
            check_keys(g, &known, "stop.graphicality.", &mut out);
        }
    }
    if let Some(init @ Value::Object(i)) = m.get("initial") {
        match i.get("family").and_then(Value::as_str) {
            Some(f) => match InitialData::known_keys(f) {
                Some(known) => {
                    let known: Vec<String> = known.iter().map(|s| s.to_string()).collect();
                    check_keys(init, &known, "initial.", &mut out);
                }
                None => out.push(format!("initial.family: unknown family {f}")),
            },
            None => out.push("initial.family is missing".into()),
        }
    }
    out
}

fn strip_unknown(root: &mut Value, unknown: &[String]) {
    for u in unknown {
        let Some(path) = u.strip_prefix("unknown key ") else {
            continue;
        };
        let mut parts: Vec<&str> = path.split('.').collect();
        let Some(last) = parts.pop() else { continue };
        let pointer: String = parts.iter().map(|p| format!("/{p}")).collect();
        let Some(node) = root.pointer_mut(&pointer) else { continue };
        if let Value::Object(m) = node {
            m.remove(last);
        }
    }
}

/// Parses an a-grid such as `1e-4:1e-2:log10` (one value per decade) or
/// `0.1:0.5:lin5` (five evenly spaced values).
pub fn parse_a_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidInput(format!("a_grid {text:?} is not lo:hi:log10 or lo:hi:linN"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(bad());
    }
    match parts[2].trim() {
        "log10" => {
            if !(lo > 0.0) {
                return Err(bad());
            }
            let decades = (hi / lo).log10();
            let n = decades.round() as usize;
            if (decades - n as f64).abs() > 1e-9 {
                return Err(bad());
            }
            Ok((0..=n).map(|k| lo * 10f64.powi(k as i32)).collect())
        }
        s => {
            let n: usize = s.strip_prefix("lin").ok_or_else(bad)?.parse().map_err(|_| bad())?;
            match n {
                0 => Err(bad()),
                1 => Ok(vec![lo]),
                _ => Ok((0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()),
            }
        }
    }
}

impl ExperimentConfig {
    /// Every violated constraint, prefixed by its key path.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for s in self.schedule.violations() {
            out.push(format!("schedule.{s}"));
        }
        for s in self.step.violations() {
            out.push(format!("step.{s}"));
        }
        out.extend(self.stop.violations());
        out.extend(self.escape.violations());
        if let Err(e) = self.grid.spec() {
            out.push(format!("grid: {e}"));
        }
        let s = &self.sampling;
        if !(s.interval > 0.0) {
            out.push(format!("sampling.interval = {} must be positive", s.interval));
        }
        if !(s.kappa2 > 0.0) {
            out.push(format!("sampling.kappa2 = {} must be positive", s.kappa2));
        }
        if !(s.r0 > 0.0) {
            out.push(format!("sampling.r0 = {} must be positive", s.r0));
        }
        if !(s.cap > 0.0) {
            out.push(format!("sampling.cap = {} must be positive", s.cap));
        }
        match &self.initial {
            InitialData::Csv { path } if !path.exists() => {
                out.push(format!("initial.path {} does not exist", path.display()));
            }
            InitialData::Dumbbell { neck, bell, width } => {
                if !(*neck > 0.0 && *bell > 0.0 && *width > 0.0) {
                    out.push("initial: dumbbell radii and width must be positive".into());
                }
            }
            InitialData::NeckProfile { length, .. } if !(*length > 0.0) => {
                out.push(format!("initial.length = {length} must be positive"));
            }
            _ => {}
        }
        if let Some(a) = self.a {
            if !a.is_finite() {
                out.push(format!("a = {a} must be finite"));
            }
        }
        if let Some(g) = &self.a_grid {
            if let Err(e) = parse_a_grid(g) {
                out.push(format!("a_grid: {e}"));
            }
        }
        let b = &self.barrier;
        if !(b.eps >= 0.0) {
            out.push(format!("barrier.eps = {} must be non-negative", b.eps));
        }
        if !(b.interval > 0.0) {
            out.push(format!("barrier.interval = {} must be positive", b.interval));
        }
        if !(b.spec.y_inner > 0.0 && b.spec.y_outer > b.spec.y_inner) {
            out.push("barrier.spec: need 0 < y_inner < y_outer".into());
        }
        if !(b.spec.t_end > b.spec.t_start && b.spec.t_start - b.eps >= 0.0) {
            out.push("barrier.spec: need eps <= t_start < t_end".into());
        }
        for e in &self.audit.eps {
            if !(*e > 0.0 && *e < 1.0) {
                out.push(format!("audit.eps entry {e} must lie in (0, 1)"));
            }
        }
        out
    }

    /// Time origin of the flow: `0` in either frame.
    pub fn frame_kind(&self) -> FrameKind {
        self.frame.unwrap_or_else(|| self.initial.natural_frame())
    }
}

/// Parses config text; see the module docs for the error contract.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    parse_in(text, None)
}

/// Reads and parses a config file. Relative CSV paths are resolved against
/// the config's directory.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)?;
    parse_in(&text, path.parent())
}

fn parse_in(text: &str, base: Option<&Path>) -> Result<ExperimentConfig> {
    let syntax = |e: serde_json::Error| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    };
    let root: Value = serde_json::from_str(text).map_err(syntax)?;
    let unknown = unknown_keys(&root);
    if !unknown.is_empty() {
        let mut all = unknown.clone();
        let mut pruned = root;
        strip_unknown(&mut pruned, &unknown);
        if let Ok(cfg) = serde_json::from_value::<ExperimentConfig>(pruned) {
            all.extend(cfg.violations());
        }
        return Err(Error::Validation(all));
    }
    let mut cfg: ExperimentConfig = serde_json::from_str(text).map_err(syntax)?;
    if let (InitialData::Csv { path }, Some(base)) = (&mut cfg.initial, base) {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
    let v = cfg.violations();
    if !v.is_empty() {
        return Err(Error::Validation(v));
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse_config_str(r#"{"command": "simulate"}"#).unwrap();
        assert_eq!(c.command, Some(Command::Simulate));
        assert_eq!(c.grid, GridConfig::default());
        assert_eq!(c.schedule, ScheduleParams::default());
        assert_eq!(c.stop.tau_max, Some(10.0));
        assert_eq!(c.frame_kind(), FrameKind::Rescaled);
    }

    #[test]
    fn negative_kappa2_is_named() {
        match parse_config_str(r#"{"sampling": {"kappa2": -3}}"#) {
            Err(Error::Validation(v)) => assert!(v.iter().any(|s| s.contains("kappa2")), "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_all_reported() {
        match parse_config_str(r#"{"bogus": 1, "grid": {"n_z": 3}, "initial": {"family": "cylinder", "x": 1}, "sampling": {"kappa2": -3}}"#) {
            Err(Error::Validation(v)) => {
                assert_eq!(v.len(), 4, "{v:?}");
                assert_eq!(v.iter().filter(|s| s.starts_with("unknown key")).count(), 3);
                assert!(v[3].contains("kappa2"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn all_violations_are_collected() {
        match parse_config_str(r#"{"schedule": {"kappa": 2}, "step": {"dt_safety": 0.5}, "sampling": {"kappa2": -1}}"#) {
            Err(Error::Validation(v)) => assert!(v.len() >= 3, "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_error_has_position() {
        match parse_config_str("{\n  \"a\": 1e-3,\n  oops\n}") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn a_grids() {
        assert_eq!(parse_a_grid("1e-4:1e-2:log10").unwrap().len(), 3);
        let v = parse_a_grid("0:1:lin5").unwrap();
        assert_eq!(v, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(parse_a_grid("1:2").is_err());
    }
}
