//! Run configuration: flat `key = value` files with a `[scenario]` header,
//! domain and weight descriptors, and their construction.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use crate::conformal::{pullback_field, ConformalMap};
use crate::error::{Error, Result};
use crate::fields::{solve_liouville_dirichlet, u_lambda_field, ScalarField};
use crate::geometry::Point;
use crate::mesh::{mesh_annulus, mesh_disk, mesh_mapped_disk, mesh_rectangle, shared, Mesh};

/// Parses `1.5`, `sqrt(8)`, `pi`, `4pi`, `0.5*pi`.
pub fn parse_number(s: &str) -> Result<f64> {
    let s = s.trim();
    let bad = || Error::Config(format!("cannot parse number `{s}`"));
    if let Some(inner) = s.strip_prefix("sqrt(").and_then(|r| r.strip_suffix(')')) {
        return Ok(parse_number(inner)?.sqrt());
    }
    if let Some(head) = s.strip_suffix("pi") {
        let head = head.trim().trim_end_matches('*').trim();
        let k = if head.is_empty() { 1.0 } else { head.parse::<f64>().map_err(|_| bad())? };
        return Ok(k * std::f64::consts::PI);
    }
    let v: f64 = s.parse().map_err(|_| bad())?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

fn parse_list(s: &str, n: usize, what: &str) -> Result<Vec<f64>> {
    let v: Vec<f64> = s.split(',').map(parse_number).collect::<Result<_>>()?;
    if v.len() != n {
        return Err(Error::Config(format!("{what} expects {n} numbers, got `{s}`")));
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq)]
pub enum DomainSpec {
    Disk { radius: f64 },
    Annulus { inner: f64, outer: f64 },
    Rectangle { lower: Point, upper: Point },
    /// Image of the unit disk under the configured map.
    Mapped,
}

impl FromStr for DomainSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        match kind.trim() {
            "disk" => Ok(DomainSpec::Disk { radius: parse_list(args, 1, "disk")?[0] }),
            "annulus" => {
                let v = parse_list(args, 2, "annulus")?;
                Ok(DomainSpec::Annulus { inner: v[0], outer: v[1] })
            }
            "rect" => {
                let v = parse_list(args, 4, "rect")?;
                Ok(DomainSpec::Rectangle { lower: Point::new(v[0], v[1]), upper: Point::new(v[2], v[3]) })
            }
            "mapped" => Ok(DomainSpec::Mapped),
            other => Err(Error::Config(format!("unknown domain kind `{other}`"))),
        }
    }
}

impl fmt::Display for DomainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainSpec::Disk { radius } => write!(f, "disk:{radius}"),
            DomainSpec::Annulus { inner, outer } => write!(f, "annulus:{inner},{outer}"),
            DomainSpec::Rectangle { lower, upper } => write!(f, "rect:{},{},{},{}", lower.x, lower.y, upper.x, upper.y),
            DomainSpec::Mapped => write!(f, "mapped"),
        }
    }
}

impl DomainSpec {
    pub fn build(&self, h: f64, map: Option<&ConformalMap>) -> Result<Mesh> {
        match self {
            DomainSpec::Disk { radius } => mesh_disk(*radius, h),
            DomainSpec::Annulus { inner, outer } => mesh_annulus(*inner, *outer, h),
            DomainSpec::Rectangle { lower, upper } => mesh_rectangle(*lower, *upper, h),
            DomainSpec::Mapped => {
                let map = map.ok_or_else(|| Error::Config("domain `mapped` needs a map".into()))?;
                mesh_mapped_disk(map, h)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightSpec {
    /// `U_λ` centred at the origin.
    ULambda(f64),
    Constant(f64),
    /// Pullback of `U_λ` through the configured map.
    Pullback(f64),
    /// Minimal solution of `-Δw = e^w` with constant boundary value.
    Liouville(f64),
}

impl FromStr for WeightSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        let one = |what| parse_list(args, 1, what).map(|v| v[0]);
        match kind.trim() {
            "u" => Ok(WeightSpec::ULambda(one("u")?)),
            "const" => Ok(WeightSpec::Constant(one("const")?)),
            "zero" => Ok(WeightSpec::Constant(0.0)),
            "pullback" => Ok(WeightSpec::Pullback(one("pullback")?)),
            "liouville" => Ok(WeightSpec::Liouville(one("liouville")?)),
            other => Err(Error::Config(format!("unknown weight kind `{other}`"))),
        }
    }
}

impl fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightSpec::ULambda(l) => write!(f, "u:{l}"),
            WeightSpec::Constant(c) => write!(f, "const:{c}"),
            WeightSpec::Pullback(l) => write!(f, "pullback:{l}"),
            WeightSpec::Liouville(g) => write!(f, "liouville:{g}"),
        }
    }
}

impl WeightSpec {
    pub fn build(&self, mesh: &Arc<Mesh>, map: Option<&ConformalMap>) -> Result<ScalarField> {
        match self {
            WeightSpec::ULambda(l) => u_lambda_field(*l, mesh.clone()),
            WeightSpec::Constant(c) => Ok(ScalarField::constant(mesh.clone(), *c)),
            WeightSpec::Pullback(l) => {
                let map = map.ok_or_else(|| Error::Config("weight `pullback` needs a map".into()))?;
                pullback_field(map, *l, mesh)
            }
            WeightSpec::Liouville(g) => {
                let nb = mesh.boundary_nodes().len();
                solve_liouville_dirichlet(mesh, &vec![*g; nb], 50, 1e-10)
            }
        }
    }
}

/// Everything a scenario or subcommand run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Option<String>,
    pub domain: Option<DomainSpec>,
    pub weight: Option<WeightSpec>,
    pub map: Option<ConformalMap>,
    pub h: f64,
    pub refinements: usize,
    pub levels: usize,
    /// Named tolerance overrides, e.g. `tol_nu = 1e-3`.
    pub tolerances: Vec<(String, f64)>,
    pub out: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scenario: None,
            domain: None,
            weight: None,
            map: None,
            h: 0.05,
            refinements: 0,
            levels: 40,
            tolerances: Vec::new(),
            out: None,
        }
    }
}

impl ScenarioConfig {
    /// Tolerance override or the given default.
    pub fn tolerance(&self, name: &str, default: f64) -> f64 {
        self.tolerances.iter().rev().find(|(k, _)| k == name).map_or(default, |(_, v)| *v)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "name" | "scenario" => self.scenario = Some(value.to_string()),
            "domain" => self.domain = Some(value.parse()?),
            "weight" => self.weight = Some(value.parse()?),
            "map" => self.map = Some(value.parse().map_err(|e: Error| Error::Config(e.to_string()))?),
            "h" => {
                let h = parse_number(value)?;
                if !(h > 0.0) {
                    return Err(Error::Config("h must be positive".into()));
                }
                self.h = h;
            }
            "refinements" => {
                self.refinements = value.parse().map_err(|_| Error::Config(format!("bad refinements `{value}`")))?
            }
            "levels" => {
                let n: usize = value.parse().map_err(|_| Error::Config(format!("bad levels `{value}`")))?;
                if n < 2 {
                    return Err(Error::Config("levels must be at least 2".into()));
                }
                self.levels = n;
            }
            "out" => self.out = Some(PathBuf::from(value)),
            k if k.starts_with("tol_") => {
                let v = parse_number(value)?;
                if !(v > 0.0) {
                    return Err(Error::Config(format!("tolerance `{k}` must be positive")));
                }
                self.tolerances.push((k.to_string(), v));
            }
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<ScenarioConfig> {
        let mut cfg = ScenarioConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                if line != "[scenario]" {
                    return Err(Error::Config(format!("line {}: unknown section `{line}`", n + 1)));
                }
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            cfg.set(k.trim(), v).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("line {}: {m}", n + 1)),
                other => other,
            })?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ScenarioConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        ScenarioConfig::parse(&text)
    }

    /// Mesh of the configured domain, refined `refinements` times.
    pub fn build_mesh(&self) -> Result<Arc<Mesh>> {
        let domain = self.domain.as_ref().ok_or_else(|| Error::Config("no domain given".into()))?;
        let mut mesh = domain.build(self.h, self.map.as_ref())?;
        for _ in 0..self.refinements {
            mesh = mesh.refine();
        }
        Ok(shared(mesh))
    }

    pub fn build_weight(&self, mesh: &Arc<Mesh>) -> Result<ScalarField> {
        let weight = self.weight.as_ref().ok_or_else(|| Error::Config("no weight given".into()))?;
        weight.build(mesh, self.map.as_ref())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers() {
        assert_eq!(parse_number("1.5").unwrap(), 1.5);
        assert!((parse_number("sqrt(8)").unwrap() - 8f64.sqrt()).abs() < 1e-15);
        assert!((parse_number("4pi").unwrap() - 4.0 * std::f64::consts::PI).abs() < 1e-15);
        assert!((parse_number("0.5*pi").unwrap() - 0.5 * std::f64::consts::PI).abs() < 1e-15);
        assert!(parse_number("abc").is_err());
        assert!(parse_number("inf").is_err());
    }

    #[test]
    fn specs_round_trip() {
        for s in ["disk:2", "annulus:1,2", "rect:0,0,1,2", "mapped"] {
            assert_eq!(s.parse::<DomainSpec>().unwrap().to_string(), s);
        }
        for s in ["u:1", "const:0.5", "pullback:2", "liouville:0"] {
            assert_eq!(s.parse::<WeightSpec>().unwrap().to_string(), s);
        }
        assert_eq!("zero".parse::<WeightSpec>().unwrap(), WeightSpec::Constant(0.0));
        assert!("disk:1,2".parse::<DomainSpec>().is_err());
        assert!("blob:1".parse::<WeightSpec>().is_err());
    }

    #[test]
    fn file_format() {
        let cfg = ScenarioConfig::parse(
            "# comment\n[scenario]\nname = equality_disk\nh = 0.1\ndomain = disk:sqrt(8)\nweight = u:1\ntol_nu = 1e-2 # trailing\n",
        )
        .unwrap();
        assert_eq!(cfg.scenario.as_deref(), Some("equality_disk"));
        assert_eq!(cfg.h, 0.1);
        assert_eq!(cfg.tolerance("tol_nu", 5e-3), 1e-2);
        assert_eq!(cfg.tolerance("tol_mass", 1e-3), 1e-3);
    }

    #[test]
    fn file_errors() {
        assert!(matches!(ScenarioConfig::parse("colour = red"), Err(Error::Config(_))));
        assert!(matches!(ScenarioConfig::parse("[other]\nh = 1"), Err(Error::Config(_))));
        assert!(matches!(ScenarioConfig::parse("tol_nu = -1"), Err(Error::Config(_))));
        assert!(matches!(ScenarioConfig::parse("h = 0"), Err(Error::Config(_))));
        assert!(matches!(ScenarioConfig::parse("just text"), Err(Error::Config(_))));
    }
}
