//! Experiment configuration documents (TOML).
//!
//! Angles, forces and momentum widths are written in units of π:
//! `theta1 = -0.5` means −π/2.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;
use toml::{Table, Value};

use crate::transport::Readout;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("malformed config: {0}")]
    Malformed(String),
    #[error("missing key `protocol`")]
    MissingProtocol,
    #[error("unknown protocol `{0}`")]
    UnknownProtocol(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}` does not apply to protocol {protocol}")]
    Irrelevant { key: String, protocol: Protocol },
    #[error("key `{key}`: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        message: message.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Protocol {
    Bands,
    PhaseDiagram,
    ChernBloch,
    CurvatureMap,
    Recurrence,
    Edge,
    Ribbon,
    BulkBoundary,
}

impl Protocol {
    pub const ALL: [Protocol; 8] = [
        Protocol::Bands,
        Protocol::PhaseDiagram,
        Protocol::ChernBloch,
        Protocol::CurvatureMap,
        Protocol::Recurrence,
        Protocol::Edge,
        Protocol::Ribbon,
        Protocol::BulkBoundary,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Protocol::Bands => "bands",
            Protocol::PhaseDiagram => "phase-diagram",
            Protocol::ChernBloch => "chern-bloch",
            Protocol::CurvatureMap => "curvature-map",
            Protocol::Recurrence => "recurrence",
            Protocol::Edge => "edge",
            Protocol::Ribbon => "ribbon",
            Protocol::BulkBoundary => "bulk-boundary",
        }
    }

    /// Parameter keys this protocol accepts.
    pub fn keys(&self) -> &'static [&'static str] {
        match self {
            Protocol::Bands => &["theta1", "theta2", "grid"],
            Protocol::PhaseDiagram => &["theta_grid", "chern_grid"],
            Protocol::ChernBloch => &[
                "theta1", "theta2", "lattice", "force", "steps", "n_kx", "dk", "k_yc", "readout",
            ],
            Protocol::CurvatureMap => &[
                "theta1",
                "theta2",
                "lattice",
                "force",
                "steps",
                "force_steps",
                "grid",
                "dk",
                "readout",
            ],
            Protocol::Recurrence => &[
                "theta1", "theta2", "lattice", "force", "steps", "dk", "k_xc", "k_yc",
            ],
            Protocol::Edge => &[
                "theta1",
                "theta2_left",
                "theta2_right",
                "lattice",
                "steps",
                "edge_width",
                "start_x",
                "start_y",
                "start_spin",
            ],
            Protocol::Ribbon => &["theta1", "theta2_left", "theta2_right", "width", "ky_samples"],
            Protocol::BulkBoundary => &[
                "theta1",
                "theta2_left",
                "theta2_right",
                "width",
                "ky_samples",
                "lattice",
                "steps",
                "edge_width",
            ],
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| ConfigError::UnknownProtocol(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl Format {
    pub fn name(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Svg => "svg",
        }
    }
}

impl FromStr for Format {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "svg" | "svg-heatmap" => Ok(Format::Svg),
            other => Err(invalid("formats", format!("unknown format `{other}`"))),
        }
    }
}

/// Parses a comma-separated format list such as `csv,json,svg`.
pub fn parse_formats(s: &str) -> Result<BTreeSet<Format>, ConfigError> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(Format::from_str)
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StartSpin {
    Up,
    Down,
}

/// Resolved protocol parameters. Angles, `force`, `dk`, `k_xc`, `k_yc` are in units of π.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub theta1: f64,
    pub theta2: f64,
    pub theta2_left: f64,
    pub theta2_right: f64,
    pub lattice: usize,
    pub force: f64,
    pub steps: usize,
    pub force_steps: usize,
    pub n_kx: usize,
    pub dk: f64,
    pub k_xc: f64,
    pub k_yc: f64,
    pub grid: usize,
    pub readout: Readout,
    pub edge_width: usize,
    pub start_x: i64,
    pub start_y: i64,
    pub start_spin: StartSpin,
    pub width: usize,
    pub ky_samples: usize,
    pub theta_grid: usize,
    pub chern_grid: usize,
}

impl Params {
    /// Defaults for a protocol.
    pub fn defaults(protocol: Protocol) -> Self {
        let mut p = Params {
            theta1: -0.5,
            theta2: 0.5,
            theta2_left: 1.0,
            theta2_right: 0.2,
            lattice: 64,
            force: 0.1,
            steps: 10,
            force_steps: 10,
            n_kx: 11,
            dk: 0.095,
            k_xc: 0.0,
            k_yc: 0.0,
            grid: 11,
            readout: Readout::ProjectedMoment,
            edge_width: 4,
            start_x: 0,
            start_y: 0,
            start_spin: StartSpin::Up,
            width: 24,
            ky_samples: 400,
            theta_grid: 24,
            chern_grid: 16,
        };
        match protocol {
            Protocol::Bands => p.grid = 64,
            Protocol::CurvatureMap => {
                p.force = 1.0 / 45.0;
                p.force_steps = 9;
                p.dk = 0.04;
            }
            Protocol::Edge | Protocol::Ribbon | Protocol::BulkBoundary => {
                p.theta1 = -0.25;
                p.steps = 12;
            }
            _ => {}
        }
        p
    }

    fn set(&mut self, key: &str, v: &Value) -> Result<(), ConfigError> {
        match key {
            "theta1" => self.theta1 = real(key, v)?,
            "theta2" => self.theta2 = real(key, v)?,
            "theta2_left" => self.theta2_left = real(key, v)?,
            "theta2_right" => self.theta2_right = real(key, v)?,
            "lattice" => self.lattice = count(key, v)?,
            "force" => self.force = real(key, v)?,
            "steps" => self.steps = count(key, v)?,
            "force_steps" => self.force_steps = count(key, v)?,
            "n_kx" => self.n_kx = count(key, v)?,
            "dk" => self.dk = real(key, v)?,
            "k_xc" => self.k_xc = real(key, v)?,
            "k_yc" => self.k_yc = real(key, v)?,
            "grid" => self.grid = count(key, v)?,
            "readout" => {
                let s = string(key, v)?;
                self.readout = Readout::parse(s)
                    .ok_or_else(|| invalid(key, format!("unknown readout `{s}`")))?;
            }
            "edge_width" => self.edge_width = count(key, v)?,
            "start_x" => self.start_x = integer(key, v)?,
            "start_y" => self.start_y = integer(key, v)?,
            "start_spin" => {
                self.start_spin = match string(key, v)? {
                    "up" => StartSpin::Up,
                    "down" => StartSpin::Down,
                    s => return Err(invalid(key, format!("expected \"up\" or \"down\", got `{s}`"))),
                }
            }
            "width" => self.width = count(key, v)?,
            "ky_samples" => self.ky_samples = count(key, v)?,
            "theta_grid" => self.theta_grid = count(key, v)?,
            "chern_grid" => self.chern_grid = count(key, v)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    fn get(&self, key: &str) -> Value {
        match key {
            "theta1" => Value::Float(self.theta1),
            "theta2" => Value::Float(self.theta2),
            "theta2_left" => Value::Float(self.theta2_left),
            "theta2_right" => Value::Float(self.theta2_right),
            "lattice" => Value::Integer(self.lattice as i64),
            "force" => Value::Float(self.force),
            "steps" => Value::Integer(self.steps as i64),
            "force_steps" => Value::Integer(self.force_steps as i64),
            "n_kx" => Value::Integer(self.n_kx as i64),
            "dk" => Value::Float(self.dk),
            "k_xc" => Value::Float(self.k_xc),
            "k_yc" => Value::Float(self.k_yc),
            "grid" => Value::Integer(self.grid as i64),
            "readout" => Value::String(self.readout.name().to_string()),
            "edge_width" => Value::Integer(self.edge_width as i64),
            "start_x" => Value::Integer(self.start_x),
            "start_y" => Value::Integer(self.start_y),
            "start_spin" => Value::String(
                match self.start_spin {
                    StartSpin::Up => "up",
                    StartSpin::Down => "down",
                }
                .to_string(),
            ),
            "width" => Value::Integer(self.width as i64),
            "ky_samples" => Value::Integer(self.ky_samples as i64),
            "theta_grid" => Value::Integer(self.theta_grid as i64),
            "chern_grid" => Value::Integer(self.chern_grid as i64),
            _ => unreachable!("unknown parameter key {key}"),
        }
    }
}

fn real(key: &str, v: &Value) -> Result<f64, ConfigError> {
    let x = match v {
        Value::Float(f) => *f,
        Value::Integer(i) => *i as f64,
        other => {
            return Err(invalid(
                key,
                format!("expected a number, got {}", other.type_str()),
            ))
        }
    };
    if !x.is_finite() {
        return Err(invalid(key, "must be finite"));
    }
    Ok(x)
}

fn integer(key: &str, v: &Value) -> Result<i64, ConfigError> {
    match v {
        Value::Integer(i) => Ok(*i),
        other => Err(invalid(
            key,
            format!("expected an integer, got {}", other.type_str()),
        )),
    }
}

fn count(key: &str, v: &Value) -> Result<usize, ConfigError> {
    let i = integer(key, v)?;
    usize::try_from(i).map_err(|_| invalid(key, format!("must be nonnegative, got {i}")))
}

fn string<'a>(key: &str, v: &'a Value) -> Result<&'a str, ConfigError> {
    v.as_str().ok_or_else(|| {
        invalid(
            key,
            format!("expected a string, got {}", v.type_str()),
        )
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub protocol: Protocol,
    pub params: Params,
    pub output: PathBuf,
    pub formats: BTreeSet<Format>,
    /// Worker threads; `None` uses all cores.
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(protocol: Protocol) -> Self {
        ExperimentConfig {
            protocol,
            params: Params::defaults(protocol),
            output: PathBuf::from("results").join(protocol.name()),
            formats: [Format::Csv, Format::Json, Format::Svg].into_iter().collect(),
            workers: None,
        }
    }

    /// Applies `key = value` entries from a table (not `protocol`).
    pub fn apply(&mut self, table: &Table) -> Result<(), ConfigError> {
        for (key, v) in table {
            match key.as_str() {
                "protocol" => {}
                "output" => self.output = PathBuf::from(string(key, v)?),
                "formats" => {
                    self.formats = match v {
                        Value::String(s) => parse_formats(s)?,
                        Value::Array(items) => items
                            .iter()
                            .map(|i| string(key, i).and_then(Format::from_str))
                            .collect::<Result<_, _>>()?,
                        other => {
                            return Err(invalid(
                                key,
                                format!("expected a list of formats, got {}", other.type_str()),
                            ))
                        }
                    }
                }
                "workers" => {
                    let w = count(key, v)?;
                    if w == 0 {
                        return Err(invalid(key, "must be at least 1"));
                    }
                    self.workers = Some(w);
                }
                k => {
                    if !self.protocol.keys().contains(&k) {
                        // Distinguish misspellings from keys of another protocol.
                        let known = Protocol::ALL.iter().any(|p| p.keys().contains(&k));
                        return Err(if known {
                            ConfigError::Irrelevant {
                                key: k.to_string(),
                                protocol: self.protocol,
                            }
                        } else {
                            ConfigError::UnknownKey(k.to_string())
                        });
                    }
                    self.params.set(k, v)?;
                }
            }
        }
        Ok(())
    }

    /// Checks ranges and cross-key constraints.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.params;
        let keys = self.protocol.keys();
        let uses = |k: &str| keys.contains(&k);
        if uses("lattice") && (p.lattice < 4 || !p.lattice.is_multiple_of(2)) {
            return Err(invalid("lattice", "must be even and at least 4"));
        }
        if uses("dk") && !(p.dk > 0.0) {
            return Err(invalid("dk", "must be positive"));
        }
        if uses("dk") {
            let extent = 1.0 / (p.dk * std::f64::consts::PI);
            if extent > p.lattice as f64 / 6.0 {
                return Err(invalid(
                    "dk",
                    format!(
                        "packet extent 1/dk = {extent:.2} sites exceeds lattice/6 = {:.2}",
                        p.lattice as f64 / 6.0
                    ),
                ));
            }
        }
        match self.protocol {
            Protocol::Bands if p.grid < 8 => return Err(invalid("grid", "must be at least 8")),
            Protocol::PhaseDiagram => {
                if p.theta_grid == 0 {
                    return Err(invalid("theta_grid", "must be positive"));
                }
                if p.chern_grid < 8 {
                    return Err(invalid("chern_grid", "must be at least 8"));
                }
            }
            Protocol::ChernBloch => {
                if p.n_kx == 0 {
                    return Err(invalid("n_kx", "must be positive"));
                }
                let span = p.force * p.steps as f64;
                if (span.abs() - 1.0).abs() > 1e-9 {
                    return Err(invalid(
                        "force",
                        format!("F * steps = {span} pi; a full-zone drive needs exactly 1 pi"),
                    ));
                }
            }
            Protocol::CurvatureMap => {
                if p.grid == 0 {
                    return Err(invalid("grid", "must be positive"));
                }
                if p.force_steps > p.steps {
                    return Err(invalid(
                        "force_steps",
                        format!("{} exceeds steps = {}", p.force_steps, p.steps),
                    ));
                }
                let span = p.force * p.force_steps as f64;
                if span == 0.0 {
                    return Err(invalid("force", "F * force_steps must be nonzero"));
                }
                if span.abs() > 1.0 + 1e-12 {
                    return Err(invalid(
                        "force",
                        format!("F * force_steps = {span} pi exceeds pi"),
                    ));
                }
            }
            Protocol::Recurrence => {
                let span = p.force * p.steps as f64;
                if span.abs() > 1.0 + 1e-12 {
                    return Err(invalid("force", format!("F * steps = {span} pi exceeds pi")));
                }
            }
            Protocol::Edge | Protocol::BulkBoundary => {
                if p.edge_width == 0 {
                    return Err(invalid("edge_width", "must be positive"));
                }
                if p.lattice < 4 * p.steps {
                    return Err(invalid(
                        "lattice",
                        format!("{} < 4 x steps = {}", p.lattice, 4 * p.steps),
                    ));
                }
            }
            _ => {}
        }
        if matches!(self.protocol, Protocol::Ribbon | Protocol::BulkBoundary) {
            if p.width < 2 {
                return Err(invalid("width", "must be at least 2"));
            }
            if p.ky_samples < 8 {
                return Err(invalid("ky_samples", "must be at least 8"));
            }
        }
        Ok(())
    }

    /// Serializes to a document that parses back to an equal config.
    pub fn to_toml(&self) -> String {
        let mut t = Table::new();
        t.insert("protocol".into(), Value::String(self.protocol.name().into()));
        t.insert(
            "output".into(),
            Value::String(self.output.to_string_lossy().into_owned()),
        );
        t.insert(
            "formats".into(),
            Value::Array(
                self.formats
                    .iter()
                    .map(|f| Value::String(f.name().into()))
                    .collect(),
            ),
        );
        if let Some(w) = self.workers {
            t.insert("workers".into(), Value::Integer(w as i64));
        }
        for k in self.protocol.keys() {
            t.insert((*k).into(), self.params.get(k));
        }
        toml::to_string(&t).expect("config table serializes")
    }

    /// Resolved parameters as a table (protocol keys only).
    pub fn parameter_table(&self) -> Table {
        self.protocol
            .keys()
            .iter()
            .map(|k| ((*k).to_string(), self.params.get(k)))
            .collect()
    }
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Malformed(e.message().to_string()))?;
    let protocol = match table.get("protocol") {
        None => return Err(ConfigError::MissingProtocol),
        Some(v) => string("protocol", v)?.parse::<Protocol>()?,
    };
    let mut config = ExperimentConfig::new(protocol);
    config.apply(&table)?;
    config.validate()?;
    Ok(config)
}

/// Parses `key=value` overrides, reading each value as a TOML value and
/// falling back to a bare string.
pub fn parse_overrides<S: AsRef<str>>(items: &[S]) -> Result<Table, ConfigError> {
    let mut t = Table::new();
    for item in items {
        let item = item.as_ref();
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| ConfigError::Malformed(format!("expected key=value, got `{item}`")))?;
        let (k, v) = (k.trim(), v.trim());
        let value = format!("v = {v}")
            .parse::<Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| Value::String(v.to_string()));
        t.insert(k.to_string(), value);
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config("protocol = \"chern-bloch\"\ntheta1 = -0.5\ntheta2 = 0.5\n").unwrap();
        assert_eq!(c.protocol, Protocol::ChernBloch);
        assert_eq!(c.params.lattice, 64);
        assert_eq!(c.params.force, 0.1);
        assert_eq!(c.params.steps, 10);
        assert_eq!(c.params.dk, 0.095);
        assert_eq!(c.params.n_kx, 11);
    }

    #[test]
    fn bad_value_names_key() {
        let e = parse_config("protocol = \"chern-bloch\"\ntheta2 = \"abc\"\n").unwrap_err();
        assert!(e.to_string().contains("theta2"), "{e}");
        assert!(matches!(e, ConfigError::Invalid { ref key, .. } if key == "theta2"));
    }

    #[test]
    fn unknown_and_irrelevant_keys_rejected() {
        let e = parse_config("protocol = \"bands\"\nthetaa = 1\n").unwrap_err();
        assert_eq!(e, ConfigError::UnknownKey("thetaa".into()));
        let e = parse_config("protocol = \"bands\"\nedge_width = 3\n").unwrap_err();
        assert!(matches!(e, ConfigError::Irrelevant { .. }));
    }

    #[test]
    fn malformed_and_missing() {
        assert!(matches!(parse_config("protocol = "), Err(ConfigError::Malformed(_))));
        assert_eq!(parse_config("theta1 = 1"), Err(ConfigError::MissingProtocol));
        assert!(matches!(
            parse_config("protocol = \"nope\""),
            Err(ConfigError::UnknownProtocol(_))
        ));
    }

    #[test]
    fn drive_limits_reported_with_key() {
        let e = parse_config("protocol = \"chern-bloch\"\nsteps = 12\n").unwrap_err();
        assert!(matches!(e, ConfigError::Invalid { ref key, .. } if key == "force"), "{e}");
        let e = parse_config("protocol = \"curvature-map\"\nforce = 0.2\n").unwrap_err();
        assert!(matches!(e, ConfigError::Invalid { ref key, .. } if key == "force"), "{e}");
    }

    #[test]
    fn curvature_map_grid() {
        let c = parse_config("protocol = \"curvature-map\"\ntheta1 = 0.5\ntheta2 = 0.5\n").unwrap();
        assert_eq!(c.params.grid, 11);
        assert_eq!(c.params.force_steps, 9);
        assert!((c.params.force * c.params.force_steps as f64 - 0.2).abs() < 1e-15);
    }

    #[test]
    fn round_trip_all_protocols() {
        for p in Protocol::ALL {
            let mut c = ExperimentConfig::new(p);
            c.workers = Some(3);
            let back = parse_config(&c.to_toml()).unwrap();
            assert_eq!(back, c, "{p}");
        }
    }

    #[test]
    fn overrides_parse_values() {
        let t = parse_overrides(&["theta1=-0.25", "readout=fit", "steps = 8"]).unwrap();
        assert_eq!(t["theta1"], Value::Float(-0.25));
        assert_eq!(t["readout"], Value::String("fit".into()));
        assert_eq!(t["steps"], Value::Integer(8));
        assert!(parse_overrides(&["novalue"]).is_err());
    }

    #[test]
    fn formats_parse() {
        let f = parse_formats("csv,svg").unwrap();
        assert!(f.contains(&Format::Csv) && f.contains(&Format::Svg) && !f.contains(&Format::Json));
        assert!(parse_formats("csv,png").is_err());
    }
}
