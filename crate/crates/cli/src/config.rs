//! Flat `key = value` configuration, merged with command-line flags.

use sha2::{Digest, Sha256};
use sheetlab::grid::Axis;
use sheetlab::initial_functions::TestFunction;
use sheetlab::moments::MomentRoute;
use sheetlab::samplers::{FieldKind, RngStream};
use sheetlab::solutions::{Functional, QuadratureSpec};
use sheetlab::FractionalOrder;
use std::collections::BTreeMap;
use std::fmt;

pub const KEYS: &[&str] = &[
    "command",
    "kind",
    "beta",
    "nu",
    "n",
    "d",
    "j",
    "f",
    "f-c",
    "f-alpha",
    "t",
    "x",
    "functional",
    "route",
    "k",
    "samples",
    "seed",
    "system",
    "h",
    "tau",
    "tolerance",
    "inner",
    "outer",
    "radius",
    "polynomial-growth",
    "output",
    "points-output",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: Option<String>,
    pub msg: String,
}

impl ConfigError {
    fn at(key: &str, msg: impl Into<String>) -> Self {
        Self { key: Some(key.to_string()), msg: msg.into() }
    }

    fn general(msg: impl Into<String>) -> Self {
        Self { key: None, msg: msg.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.key {
            Some(k) => write!(f, "{k}: {}", self.msg),
            None => write!(f, "{}", self.msg),
        }
    }
}

type Res<T> = std::result::Result<T, ConfigError>;

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_file(text: &str) -> Res<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::general(format!("line {}: expected key = value", i + 1)));
        };
        let k = k.trim().replace('_', "-");
        if !KEYS.contains(&k.as_str()) {
            return Err(ConfigError::at(&k, format!("unknown key on line {}", i + 1)));
        }
        if out.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(ConfigError::at(&k, format!("repeated on line {}", i + 1)));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Density,
    Moments,
    Solve,
    McCompare,
    Residual,
    Equivalence,
}

impl Command {
    pub fn parse(s: &str) -> Res<Self> {
        Ok(match s {
            "density" => Command::Density,
            "moments" => Command::Moments,
            "solve" => Command::Solve,
            "mc-compare" => Command::McCompare,
            "residual" => Command::Residual,
            "equivalence" => Command::Equivalence,
            _ => return Err(ConfigError::at("command", format!("unknown command {s:?}"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::Density => "density",
            Command::Moments => "moments",
            Command::Solve => "solve",
            Command::McCompare => "mc-compare",
            Command::Residual => "residual",
            Command::Equivalence => "equivalence",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum System {
    FourthOrder,
    HalfFractional,
    BetaFractional,
    Order2Nu,
}

impl System {
    pub fn name(&self) -> &'static str {
        match self {
            System::FourthOrder => "fourth-order",
            System::HalfFractional => "half-fractional",
            System::BetaFractional => "beta-fractional",
            System::Order2Nu => "order-2nu",
        }
    }
}

/// Validated run description.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub kind: FieldKind,
    pub order: Option<FractionalOrder>,
    pub n: usize,
    pub d: usize,
    pub j: usize,
    pub f: TestFunction,
    pub t_axes: Vec<Axis>,
    pub x_axes: Vec<Axis>,
    pub functional: Functional,
    pub route: MomentRoute,
    pub moment_k: f64,
    pub samples: u64,
    pub seed: u64,
    pub system: Option<System>,
    pub h: f64,
    pub tau: f64,
    pub quadrature: QuadratureSpec,
    pub output: Option<String>,
    pub points_output: Option<String>,
    /// Hex SHA-256 of the canonical effective configuration.
    pub hash: String,
}

fn num<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str, default: T) -> Res<T> {
    match map.get(key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|_| ConfigError::at(key, format!("cannot parse {v:?}"))),
    }
}

/// `v` or `start:end:points`.
fn parse_axis(key: &str, s: &str) -> Res<Axis> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let f = |p: &str| p.parse::<f64>().map_err(|_| ConfigError::at(key, format!("cannot parse {p:?}")));
    match parts.as_slice() {
        [v] => Ok(Axis::point(f(v)?)),
        [a, b, k] => {
            let k: usize = k.parse().map_err(|_| ConfigError::at(key, format!("cannot parse point count {k:?}")))?;
            Axis::new(f(a)?, f(b)?, k).map_err(|e| ConfigError::at(key, e.to_string()))
        }
        _ => Err(ConfigError::at(key, format!("expected v or start:end:points, got {s:?}"))),
    }
}

/// Comma-separated axes; a single axis is repeated `count` times.
fn parse_axes(key: &str, s: &str, count: usize) -> Res<Vec<Axis>> {
    let axes = s.split(',').map(|p| parse_axis(key, p)).collect::<Res<Vec<_>>>()?;
    match axes.len() {
        1 => Ok(vec![axes[0]; count]),
        m if m == count => Ok(axes),
        m => Err(ConfigError::at(key, format!("{m} axes given, {count} needed"))),
    }
}

fn parse_functional(s: &str, j: usize, nu: Option<u32>) -> Res<Functional> {
    Ok(match s {
        "u" => Functional::U,
        "scriptU" | "script-u" => Functional::ScriptU(j),
        "scriptV" | "script-v" => Functional::ScriptV(j),
        "scriptUnu" | "script-u-nu" => match nu {
            Some(nu) => Functional::ScriptUNu(j, nu),
            None => return Err(ConfigError::at("functional", "scriptUnu needs kind = isltbs with beta = 1/nu")),
        },
        _ => return Err(ConfigError::at("functional", format!("unknown functional {s:?}"))),
    })
}

fn default_lattice(command: Command, key: &str) -> &'static str {
    match (command, key) {
        (Command::Residual | Command::Equivalence, "t") => "0.5:2:7",
        (Command::Residual | Command::Equivalence, _) => "-1:1:5",
        (_, "t") => "1",
        (Command::Density, _) => "1",
        _ => "0",
    }
}

impl RunConfig {
    pub fn from_map(map: &BTreeMap<String, String>) -> Res<Self> {
        let command = Command::parse(map.get("command").map(String::as_str).unwrap_or(""))?;
        let order = match (map.get("beta"), map.get("nu")) {
            (Some(_), Some(_)) => return Err(ConfigError::at("beta", "give beta or nu, not both")),
            (Some(b), None) => {
                Some(b.parse::<FractionalOrder>().map_err(|e| ConfigError::at("beta", e.to_string()))?)
            }
            (None, Some(nu)) => {
                let nu: u32 = nu.parse().map_err(|_| ConfigError::at("nu", format!("cannot parse {nu:?}")))?;
                Some(FractionalOrder::from_nu(nu).map_err(|e| ConfigError::at("nu", e.to_string()))?)
            }
            (None, None) => None,
        };
        let kind = match map.get("kind").map(String::as_str).unwrap_or("btbs") {
            "btbs" => FieldKind::Btbs,
            "isltbs" => FieldKind::Isltbs(order.ok_or_else(|| ConfigError::at("beta", "kind = isltbs needs beta or nu"))?),
            other => return Err(ConfigError::at("kind", format!("unknown kind {other:?}"))),
        };
        let n: usize = num(map, "n", 1)?;
        let d: usize = num(map, "d", 1)?;
        let j: usize = num(map, "j", 1)?;
        if n == 0 || d == 0 {
            return Err(ConfigError::at("n", "n and d must be at least 1"));
        }
        if j == 0 || j > n {
            return Err(ConfigError::at("j", format!("j = {j} outside 1..={n}")));
        }
        let fname = map.get("f").map(String::as_str).unwrap_or("quadratic");
        let f = TestFunction::from_name(fname, d, num(map, "f-c", 1.0)?, num(map, "f-alpha", 1.0)?)
            .map_err(|e| ConfigError::at("f", e.to_string()))?;
        let t_spec = map.get("t").map(String::as_str).unwrap_or(default_lattice(command, "t"));
        let x_spec = map.get("x").map(String::as_str).unwrap_or(default_lattice(command, "x"));
        let t_axes = parse_axes("t", t_spec, n)?;
        let x_axes = parse_axes("x", x_spec, d)?;
        if t_axes.iter().any(|a| a.start < 0.0) {
            return Err(ConfigError::at("t", "times must be nonnegative"));
        }
        let nu = kind.order().and_then(|o| o.nu());
        let functional = parse_functional(map.get("functional").map(String::as_str).unwrap_or("u"), j, nu)?;
        let samples: u64 = num(map, "samples", 100_000)?;
        let seed: u64 = num(map, "seed", 0)?;
        let route = match map.get("route").map(String::as_str).unwrap_or("closed-form") {
            "closed-form" => MomentRoute::ClosedForm,
            "quadrature" => MomentRoute::Quadrature,
            "monte-carlo" => MomentRoute::MonteCarlo { samples, stream: RngStream::new(seed, 0) },
            other => return Err(ConfigError::at("route", format!("unknown route {other:?}"))),
        };
        let system = match map.get("system").map(String::as_str) {
            None => None,
            Some("fourth-order") => Some(System::FourthOrder),
            Some("half-fractional") => Some(System::HalfFractional),
            Some("beta-fractional") => Some(System::BetaFractional),
            Some("order-2nu") => Some(System::Order2Nu),
            Some(other) => return Err(ConfigError::at("system", format!("unknown system {other:?}"))),
        };
        let mut quadrature = QuadratureSpec::for_n(n).with_polynomial_growth(num(map, "polynomial-growth", true)?);
        quadrature.tolerance = num(map, "tolerance", quadrature.tolerance)?;
        quadrature.inner = num(map, "inner", quadrature.inner)?;
        quadrature.outer = num(map, "outer", quadrature.outer)?;
        if map.contains_key("radius") {
            quadrature.radius = Some(num(map, "radius", 0.0)?);
        }
        let cfg = RunConfig {
            command,
            kind,
            order,
            n,
            d,
            j,
            f,
            t_axes,
            x_axes,
            functional,
            route,
            moment_k: num(map, "k", 1.0)?,
            samples,
            seed,
            system,
            h: num(map, "h", 0.1)?,
            tau: num(map, "tau", 1e-3)?,
            quadrature,
            output: map.get("output").cloned(),
            points_output: map.get("points-output").cloned(),
            hash: config_hash(map),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Res<()> {
        if self.command == Command::Moments && self.order.is_none() {
            return Err(ConfigError::at("beta", "moments needs beta or nu"));
        }
        match self.command {
            Command::McCompare if self.samples < 2 => return Err(ConfigError::at("samples", "need at least two samples")),
            Command::Residual => {
                let system = self.system.ok_or_else(|| ConfigError::at("system", "residual needs a system"))?;
                let ok = match system {
                    System::FourthOrder | System::HalfFractional => self.kind == FieldKind::Btbs,
                    System::BetaFractional => matches!(self.kind, FieldKind::Isltbs(_)),
                    System::Order2Nu => self.kind.order().and_then(|o| o.nu()).is_some(),
                };
                if !ok {
                    return Err(ConfigError::at("system", format!("{} does not apply to kind = {}", system.name(), self.kind.name())));
                }
            }
            Command::Equivalence => {
                if let FieldKind::Isltbs(o) = self.kind {
                    if o.nu().is_none() {
                        return Err(ConfigError::at("beta", "equivalence needs beta = 1/nu"));
                    }
                }
            }
            _ => {}
        }
        if matches!(self.command, Command::Residual | Command::Equivalence) && !(self.h > 0.0 && self.tau > 0.0) {
            return Err(ConfigError::at("h", "stencil steps h and tau must be positive"));
        }
        Ok(())
    }
}

/// SHA-256 over the sorted `key=value` lines, output paths excluded.
pub fn config_hash(map: &BTreeMap<String, String>) -> String {
    let mut h = Sha256::new();
    for (k, v) in map.iter().filter(|(k, _)| !k.ends_with("output")) {
        h.update(format!("{k}={v}\n").as_bytes());
    }
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn file_format() {
        let m = parse_file("# comment\ncommand = solve\n\nkind=isltbs # trailing\nbeta = 1/3\n").unwrap();
        assert_eq!(m["kind"], "isltbs");
        assert_eq!(m["beta"], "1/3");
        assert!(parse_file("bogus = 1").is_err());
        assert!(parse_file("kind = a\nkind = b").is_err());
        assert!(parse_file("no equals sign").is_err());
    }

    #[test]
    fn rational_beta_stays_exact() {
        let c = RunConfig::from_map(&map(&[("command", "solve"), ("kind", "isltbs"), ("beta", "1/3")])).unwrap();
        assert_eq!(c.order.unwrap().nu(), Some(3));
    }

    #[test]
    fn axes_repeat_and_validate() {
        let c = RunConfig::from_map(&map(&[("command", "solve"), ("n", "2"), ("t", "0.5:1:3")])).unwrap();
        assert_eq!(c.t_axes.len(), 2);
        assert!(RunConfig::from_map(&map(&[("command", "solve"), ("n", "3"), ("t", "1,2")])).is_err());
        assert!(RunConfig::from_map(&map(&[("command", "solve"), ("t", "-1")])).is_err());
    }

    #[test]
    fn inconsistent_configs_are_rejected() {
        assert!(RunConfig::from_map(&map(&[("command", "solve"), ("kind", "isltbs")])).is_err());
        assert!(RunConfig::from_map(&map(&[("command", "residual")])).is_err());
        assert!(RunConfig::from_map(&map(&[("command", "residual"), ("system", "order-2nu")])).is_err());
        assert!(RunConfig::from_map(&map(&[("command", "solve"), ("j", "2")])).is_err());
        assert!(RunConfig::from_map(&map(&[("command", "moments")])).is_err());
    }

    #[test]
    fn hash_ignores_output_paths() {
        let a = map(&[("command", "solve"), ("output", "a.csv")]);
        let b = map(&[("command", "solve"), ("output", "b.csv")]);
        assert_eq!(config_hash(&a), config_hash(&b));
        assert_ne!(config_hash(&a), config_hash(&map(&[("command", "moments")])));
        assert_eq!(config_hash(&a).len(), 64);
    }
}
