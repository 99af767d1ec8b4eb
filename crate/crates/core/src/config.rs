//! Flat `key=value` run configuration with dotted section keys.
//!
//! ```text
//! # comments and blank lines are ignored
//! scenario=thm2
//! domain.shape=disk
//! domain.size=1
//! domain.h=0.1
//! nonlinearity.name=quartic-well
//! nonlinearity.delta=0.1
//! ```
//!
//! Parameters of the coefficient and the nonlinearity are any further keys
//! under their section. [`RunConfig::to_text`] writes every field, so the
//! echo reparses to the same value.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use crate::assembly::CoefficientField;
use crate::error::{Error, Result};
use crate::nonlinearity::{builtin, Nonlinearity};

const MODULE: &str = "cli";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Thm1,
    Thm2,
    Thm3Probe,
    Thm4,
    SpectrumOnly,
    AuditOnly,
}

impl Scenario {
    pub const ALL: [Scenario; 6] =
        [Scenario::Thm1, Scenario::Thm2, Scenario::Thm3Probe, Scenario::Thm4, Scenario::SpectrumOnly, Scenario::AuditOnly];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Thm1 => "thm1",
            Scenario::Thm2 => "thm2",
            Scenario::Thm3Probe => "thm3_probe",
            Scenario::Thm4 => "thm4",
            Scenario::SpectrumOnly => "spectrum_only",
            Scenario::AuditOnly => "audit_only",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Scenario::ALL.into_iter().find(|sc| sc.name() == s)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Disk,
    Square,
    File,
}

impl Shape {
    pub fn name(&self) -> &'static str {
        match self {
            Shape::Disk => "disk",
            Shape::Square => "square",
            Shape::File => "file",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        [Shape::Disk, Shape::Square, Shape::File].into_iter().find(|sh| sh.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub shape: Shape,
    /// Radius of the disk or side of the square.
    pub size: f64,
    pub h: f64,
    pub refinements: usize,
    /// Mesh file for `shape=file`.
    pub path: Option<PathBuf>,
}

/// A library name with numeric parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedSpec {
    pub name: String,
    pub params: BTreeMap<String, f64>,
}

impl NamedSpec {
    pub fn new(name: &str) -> Self {
        NamedSpec { name: name.to_string(), params: BTreeMap::new() }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSpec {
    pub tol: f64,
    pub max_iters: usize,
    pub n_path: usize,
    /// Number of Steklov pairs computed.
    pub n_eigs: usize,
}

/// Coefficients of the initial points `s·φ₁ + w·φ₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct StartSpec {
    pub phi1: f64,
    pub phi2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSpec {
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditSpec {
    pub u_max: f64,
    pub n_samples: usize,
    pub growth_exponent: f64,
    /// `sobolev` or `trace` exponent bound for the growth check.
    pub growth_convention: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub domain: DomainSpec,
    pub coefficient: NamedSpec,
    pub nonlinearity: NamedSpec,
    pub solver: SolverSpec,
    pub start: StartSpec,
    pub probe: ProbeSpec,
    pub audit: AuditSpec,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: Scenario::SpectrumOnly,
            domain: DomainSpec { shape: Shape::Disk, size: 1.0, h: 0.1, refinements: 0, path: None },
            coefficient: NamedSpec::new("constant").with("value", 1.0),
            nonlinearity: NamedSpec::new("zero"),
            solver: SolverSpec { tol: 1e-8, max_iters: 5000, n_path: 21, n_eigs: 6 },
            start: StartSpec { phi1: 0.5, phi2: 0.1 },
            probe: ProbeSpec { samples: 200 },
            audit: AuditSpec { u_max: 20.0, n_samples: 2001, growth_exponent: 2.0, growth_convention: "sobolev" },
            seed: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

fn parse_f64(line: usize, key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>().map_err(|_| Error::Parse { line, detail: format!("{key}: expected a number, got `{v}`") })
}

fn parse_usize(line: usize, key: &str, v: &str) -> Result<usize> {
    v.parse::<usize>().map_err(|_| Error::Parse { line, detail: format!("{key}: expected a count, got `{v}`") })
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut coefficient_params = BTreeMap::new();
        let mut nonlinearity_params = BTreeMap::new();
        let mut coefficient_name = None;
        let mut seen = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            let (key, value) = s
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Parse { line, detail: format!("expected key=value, got `{s}`") })?;
            if let Some(prev) = seen.insert(key.to_string(), line) {
                return Err(Error::Parse { line, detail: format!("duplicate key `{key}` (first on line {prev})") });
            }
            match key {
                "scenario" => {
                    cfg.scenario = Scenario::from_name(value)
                        .ok_or_else(|| Error::Parse { line, detail: format!("unknown scenario `{value}`") })?
                }
                "seed" => {
                    cfg.seed = value.parse().map_err(|_| Error::Parse { line, detail: format!("bad seed `{value}`") })?
                }
                "output.dir" => cfg.output_dir = PathBuf::from(value),
                "domain.shape" => {
                    cfg.domain.shape = Shape::from_name(value)
                        .ok_or_else(|| Error::Parse { line, detail: format!("unknown domain shape `{value}`") })?
                }
                "domain.size" => cfg.domain.size = parse_f64(line, key, value)?,
                "domain.h" => cfg.domain.h = parse_f64(line, key, value)?,
                "domain.refinements" => cfg.domain.refinements = parse_usize(line, key, value)?,
                "domain.path" => cfg.domain.path = Some(PathBuf::from(value)),
                "coefficient.name" => coefficient_name = Some(value.to_string()),
                "nonlinearity.name" => cfg.nonlinearity.name = value.to_string(),
                "solver.tol" => cfg.solver.tol = parse_f64(line, key, value)?,
                "solver.max_iters" => cfg.solver.max_iters = parse_usize(line, key, value)?,
                "solver.n_path" => cfg.solver.n_path = parse_usize(line, key, value)?,
                "solver.n_eigs" => cfg.solver.n_eigs = parse_usize(line, key, value)?,
                "start.phi1" => cfg.start.phi1 = parse_f64(line, key, value)?,
                "start.phi2" => cfg.start.phi2 = parse_f64(line, key, value)?,
                "probe.samples" => cfg.probe.samples = parse_usize(line, key, value)?,
                "audit.u_max" => cfg.audit.u_max = parse_f64(line, key, value)?,
                "audit.n_samples" => cfg.audit.n_samples = parse_usize(line, key, value)?,
                "audit.growth_exponent" => cfg.audit.growth_exponent = parse_f64(line, key, value)?,
                "audit.growth_convention" => {
                    cfg.audit.growth_convention = ["sobolev", "trace"]
                        .into_iter()
                        .find(|c| *c == value)
                        .ok_or_else(|| Error::Parse { line, detail: format!("unknown growth convention `{value}`") })?
                }
                _ => {
                    if let Some(p) = key.strip_prefix("coefficient.") {
                        coefficient_params.insert(p.to_string(), parse_f64(line, key, value)?);
                    } else if let Some(p) = key.strip_prefix("nonlinearity.") {
                        nonlinearity_params.insert(p.to_string(), parse_f64(line, key, value)?);
                    } else {
                        return Err(Error::Parse { line, detail: format!("unknown key `{key}`") });
                    }
                }
            }
        }
        if let Some(name) = coefficient_name {
            cfg.coefficient = NamedSpec { name, params: coefficient_params };
        } else if !coefficient_params.is_empty() {
            cfg.coefficient.params = coefficient_params;
        }
        cfg.nonlinearity.params = nonlinearity_params;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::parse(&text)
    }

    /// Every field in a fixed order; floats use the shortest round-trip form.
    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// `(key, value)` pairs as written by [`RunConfig::to_text`].
    pub fn entries(&self) -> Vec<(String, String)> {
        let mut e: Vec<(String, String)> = vec![
            ("scenario".into(), self.scenario.name().into()),
            ("seed".into(), self.seed.to_string()),
            ("output.dir".into(), self.output_dir.display().to_string()),
            ("domain.shape".into(), self.domain.shape.name().into()),
            ("domain.size".into(), format!("{:?}", self.domain.size)),
            ("domain.h".into(), format!("{:?}", self.domain.h)),
            ("domain.refinements".into(), self.domain.refinements.to_string()),
        ];
        if let Some(p) = &self.domain.path {
            e.push(("domain.path".into(), p.display().to_string()));
        }
        e.push(("coefficient.name".into(), self.coefficient.name.clone()));
        for (k, v) in &self.coefficient.params {
            e.push((format!("coefficient.{k}"), format!("{v:?}")));
        }
        e.push(("nonlinearity.name".into(), self.nonlinearity.name.clone()));
        for (k, v) in &self.nonlinearity.params {
            e.push((format!("nonlinearity.{k}"), format!("{v:?}")));
        }
        e.extend([
            ("solver.tol".into(), format!("{:?}", self.solver.tol)),
            ("solver.max_iters".into(), self.solver.max_iters.to_string()),
            ("solver.n_path".into(), self.solver.n_path.to_string()),
            ("solver.n_eigs".into(), self.solver.n_eigs.to_string()),
            ("start.phi1".into(), format!("{:?}", self.start.phi1)),
            ("start.phi2".into(), format!("{:?}", self.start.phi2)),
            ("probe.samples".into(), self.probe.samples.to_string()),
            ("audit.u_max".into(), format!("{:?}", self.audit.u_max)),
            ("audit.n_samples".into(), self.audit.n_samples.to_string()),
            ("audit.growth_exponent".into(), format!("{:?}", self.audit.growth_exponent)),
            ("audit.growth_convention".into(), self.audit.growth_convention.into()),
        ]);
        e
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.domain;
        if !(d.h > 0.0) || !d.h.is_finite() {
            return Err(Error::param(MODULE, format!("domain.h must be positive, got {}", d.h)));
        }
        if d.shape != Shape::File && !(d.size > 0.0 && d.size.is_finite()) {
            return Err(Error::param(MODULE, format!("domain.size must be positive, got {}", d.size)));
        }
        if d.shape == Shape::File && d.path.is_none() {
            return Err(Error::param(MODULE, "domain.shape=file needs domain.path"));
        }
        if !(self.solver.tol > 0.0) {
            return Err(Error::param(MODULE, format!("solver.tol must be positive, got {}", self.solver.tol)));
        }
        if self.solver.n_eigs < 2 {
            return Err(Error::param(MODULE, format!("solver.n_eigs must be at least 2, got {}", self.solver.n_eigs)));
        }
        if self.solver.n_path < 3 {
            return Err(Error::param(MODULE, format!("solver.n_path must be at least 3, got {}", self.solver.n_path)));
        }
        if !(self.audit.u_max > 0.0) || self.audit.n_samples < 2 {
            return Err(Error::param(MODULE, "audit.u_max must be positive and audit.n_samples at least 2"));
        }
        self.coefficient_field()?;
        self.build_nonlinearity()?;
        Ok(())
    }

    pub fn coefficient_field(&self) -> Result<CoefficientField> {
        let c = &self.coefficient;
        let get = |key: &str, default: f64| c.params.get(key).copied().unwrap_or(default);
        let allowed: &[&str] = match c.name.as_str() {
            "constant" => &["value"],
            "radial" => &["base", "slope"],
            other => return Err(Error::param(MODULE, format!("unknown coefficient `{other}` (constant, radial)"))),
        };
        if let Some(k) = c.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::param(MODULE, format!("coefficient `{}` has no parameter `{k}`", c.name)));
        }
        let field = match c.name.as_str() {
            "constant" => CoefficientField::constant(get("value", 1.0)),
            _ => CoefficientField::radial(get("base", 1.0), get("slope", 0.0)),
        };
        Ok(field)
    }

    pub fn build_nonlinearity(&self) -> Result<Nonlinearity> {
        builtin(&self.nonlinearity.name, &self.nonlinearity.params)
    }
}
