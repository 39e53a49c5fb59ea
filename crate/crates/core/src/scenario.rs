//! Named experiments, their checks, and the CSV tables shared with the
//! command-line subcommands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::config::ScenarioConfig;
use crate::conformal::{pullback_field, transported_profile, ConformalMap};
use crate::error::{Error, Result};
use crate::fields::{
    liouville_residual, normalize_gauge, solve_liouville_dirichlet, u_lambda_at, u_lambda_field, ScalarField,
};
use crate::geometry::Point;
use crate::levelset::{
    appendix_audit, bol_defect, decompose, level_profile, level_stats, polar_audit_setup, AuditBranch, AuditReport,
    LevelSetProfile,
};
use crate::mesh::{mesh_disk, mesh_mapped_disk, mesh_polar_zones, shared, Mesh};
use crate::rearrange::{rayleigh_chain_report, ChainReport};
use crate::spectral::{first_eigenpair, EigenPair, DEFAULT_EIGEN_TOL};
use crate::EIGHT_PI;

const PI: f64 = std::f64::consts::PI;

/// CSV text with the schema comment line.
#[derive(Debug, Clone)]
pub struct Csv(String);

impl Csv {
    pub fn new(header: &str) -> Csv {
        Csv(format!("# schema=1\n{header}\n"))
    }

    pub fn comment(&mut self, text: &str) {
        writeln!(self.0, "# {text}").unwrap();
    }

    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) {
        let line: Vec<&str> = fields.iter().map(|f| f.as_ref()).collect();
        writeln!(self.0, "{}", line.join(",")).unwrap();
    }

    pub fn into_string(self) -> String {
        self.0
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

/// Fixed-precision scientific notation used in every table.
pub fn num(v: f64) -> String {
    format!("{v:.10e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Lt,
    Ge,
    Gt,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Lt => "<",
            Relation::Ge => ">=",
            Relation::Gt => ">",
        }
    }

    fn holds(self, value: f64, bound: f64) -> bool {
        match self {
            Relation::Le => value <= bound,
            Relation::Lt => value < bound,
            Relation::Ge => value >= bound,
            Relation::Gt => value > bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub bound: f64,
    pub ok: bool,
}

#[derive(Debug, Clone)]
pub struct ScenarioReport {
    pub name: String,
    pub statement: String,
    pub checks: Vec<Check>,
    /// `(suffix, csv)` data tables.
    pub tables: Vec<(String, Csv)>,
}

impl ScenarioReport {
    fn new(name: &str, statement: &str) -> Self {
        ScenarioReport { name: name.into(), statement: statement.into(), checks: Vec::new(), tables: Vec::new() }
    }

    fn check(&mut self, name: &str, value: f64, relation: Relation, bound: f64) {
        let ok = relation.holds(value, bound);
        self.checks.push(Check { name: name.into(), value, relation, bound, ok });
    }

    fn flag(&mut self, name: &str, ok: bool) {
        self.check(name, if ok { 1.0 } else { 0.0 }, Relation::Ge, 1.0);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.ok).collect()
    }

    /// `check,value,relation,bound,ok`.
    pub fn checks_csv(&self) -> Csv {
        let mut csv = Csv::new("check,value,relation,bound,ok");
        csv.comment(&format!("scenario: {}", self.name));
        csv.comment(&format!("statement: {}", self.statement));
        for c in &self.checks {
            csv.row(&[c.name.clone(), num(c.value), c.relation.symbol().into(), num(c.bound), c.ok.to_string()]);
        }
        csv
    }

    /// Writes `<name>.csv` and `<name>_<suffix>.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let main = dir.join(format!("{}.csv", self.name));
        std::fs::write(&main, self.checks_csv().as_str())?;
        written.push(main);
        for (suffix, csv) in &self.tables {
            let p = dir.join(format!("{}_{suffix}.csv", self.name));
            std::fs::write(&p, csv.as_str())?;
            written.push(p);
        }
        Ok(written)
    }
}

type Runner = fn(&ScenarioConfig) -> Result<ScenarioReport>;

pub struct ScenarioInfo {
    pub name: &'static str,
    pub statement: &'static str,
    run: Runner,
}

static SCENARIOS: &[ScenarioInfo] = &[
    ScenarioInfo {
        name: "equality_disk",
        statement: "equality case of the first-eigenvalue theorem: on (B_√8, U₁) the mass is 4π, ν̂₁ = 0 with eigenfunction (8-|x|²)/(8+|x|²), and Bol is an equality on every level set",
        run: equality_disk,
    },
    ScenarioInfo {
        name: "annulus_positive",
        statement: "multiply connected domains with mass at most 4π have ν̂₁ > 0 (A(1,2), w = ln(4/3))",
        run: annulus_positive,
    },
    ScenarioInfo {
        name: "threshold_sweep",
        statement: "ν̂₁ ≥ 0 whenever ∫e^w ≤ 4π, with ν̂₁ = 0 only at mass 4π (U₁ on disks of mass 2π, 3π, 3.8π, 4π)",
        run: threshold_sweep,
    },
    ScenarioInfo {
        name: "conformal_equality",
        statement: "equality transport: for a univalent Φ the pullback of U_√8 has mass 4π, ν̂₁ = 0 and eigenfunction (1-|Ψ|²)/(1+|Ψ|²)",
        run: conformal_equality,
    },
    ScenarioInfo {
        name: "appendix_audit_annulus",
        statement: "strict Bol inequality on multiply connected ω: ω = A(1.2,1.8) in Ω = A(1,2), w ≡ 0, filled-mass-below-8π branch",
        run: appendix_audit_annulus,
    },
    ScenarioInfo {
        name: "appendix_audit_disconnected",
        statement: "strict Bol inequality for a disconnected ω: two disjoint unit disks with U₁, 8πm - m² + 2m₁m₂ algebra",
        run: appendix_audit_disconnected,
    },
    ScenarioInfo {
        name: "appendix_audit_union",
        statement: "strict Bol inequality when the hole of ω lies inside Ω: ω = A(0.8,1.5) in B₂ with U₁, filled-union chain",
        run: appendix_audit_union,
    },
    ScenarioInfo {
        name: "bol_strict_constant",
        statement: "Bol inequality is strict for strict subsolutions: w ≡ ln 4 on B₁ (mass 4π) has defect 8π² at the whole-domain level",
        run: bol_strict_constant,
    },
    ScenarioInfo {
        name: "rearrangement_chain",
        statement: "equimeasurable rearrangement against e^U: preserved weighted norm, non-increasing energy, R₀ = √8 at mass 4π",
        run: rearrangement_chain,
    },
    ScenarioInfo {
        name: "gauge_invariance",
        statement: "w_c(x) = w(e^{-c/2}x) - c preserves ∫e^w and ∫e^{w/2}dσ",
        run: gauge_invariance,
    },
    ScenarioInfo {
        name: "closed_form_integrals",
        statement: "∫_{B_δ} e^{U_λ} = πδ²λ²/(1+λ²δ²/8) and ∫_{∂B_δ} e^{U_λ/2} = 2πδλ/(1+λ²δ²/8)",
        run: closed_form_integrals,
    },
    ScenarioInfo {
        name: "newton_minimal_branch",
        statement: "minimal solutions of -Δw = e^w on B₁ with constant boundary data are the U_λ restrictions; none exist for large data",
        run: newton_minimal_branch,
    },
];

pub fn list_scenarios() -> &'static [ScenarioInfo] {
    SCENARIOS
}

pub fn find_scenario(name: &str) -> Option<&'static ScenarioInfo> {
    SCENARIOS.iter().find(|s| s.name == name)
}

/// Runs the scenario named in `cfg`.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let name = cfg.scenario.as_deref().ok_or_else(|| Error::Config("no scenario name given".into()))?;
    let info = find_scenario(name).ok_or_else(|| Error::Config(format!("unknown scenario `{name}`")))?;
    (info.run)(cfg)
}

fn refined(mut mesh: Mesh, times: usize) -> Arc<Mesh> {
    for _ in 0..times {
        mesh = mesh.refine();
    }
    shared(mesh)
}

/// Largest `|φ/max φ - ref/max ref|`.
pub fn profile_error(phi: &ScalarField, reference: &ScalarField) -> f64 {
    let (a, b) = (phi.max(), reference.max());
    phi.values().iter().zip(reference.values()).map(|(p, r)| (p / a - r / b).abs()).fold(0.0, f64::max)
}

fn info(name: &str) -> &'static ScenarioInfo {
    find_scenario(name).expect("registered scenario")
}

fn start(name: &str) -> ScenarioReport {
    ScenarioReport::new(name, info(name).statement)
}

/// `t,m,mu,ell,defect,components,holes`; `defect` is empty where the mass
/// leaves `[0, 8π]`.
pub fn profile_csv(profile: &LevelSetProfile) -> Csv {
    let mut csv = Csv::new("t,m,mu,ell,defect,components,holes");
    for k in 0..profile.len() {
        let mu = profile.base_mass.as_ref().map_or(String::new(), |v| num(v[k]));
        let defect = bol_defect(profile.ell[k], profile.mass[k]).map_or(String::new(), num);
        csv.row(&[
            num(profile.levels[k]),
            num(profile.mass[k]),
            mu,
            num(profile.ell[k]),
            defect,
            profile.components[k].to_string(),
            profile.holes[k].to_string(),
        ]);
    }
    csv
}

/// Largest `|ℓ² - ½m(8π-m)| / (8π)²` over a profile.
fn worst_relative_defect(profile: &LevelSetProfile) -> f64 {
    profile.bol_defects().iter().map(|d| d.map_or(f64::INFINITY, |d| d.abs() / (EIGHT_PI * EIGHT_PI))).fold(0.0, f64::max)
}

fn min_relative_defect(profile: &LevelSetProfile) -> f64 {
    // empty levels are trivially tight and say nothing about strictness
    profile
        .bol_defects()
        .iter()
        .zip(&profile.mass)
        .filter(|(_, &m)| m > 0.0)
        .map(|(d, _)| d.map_or(f64::NEG_INFINITY, |d| d / (EIGHT_PI * EIGHT_PI)))
        .fold(f64::INFINITY, f64::min)
}

/// `name,lhs,rhs,margin,ok`.
pub fn audit_csv(report: &AuditReport) -> Csv {
    let mut csv = Csv::new("name,lhs,rhs,margin,ok");
    csv.comment(&format!("branch: {}", report.branch.label()));
    for r in &report.rows {
        csv.row(&[r.name.clone(), num(r.lhs), num(r.rhs), num(r.margin), r.ok.to_string()]);
    }
    csv
}

/// `t,m,R,phi_star` per level, then a summary block.
pub fn rearrange_csv(report: &ChainReport) -> Csv {
    let r = &report.rearranged;
    let mut csv = Csv::new("t,m,R,phi_star");
    for k in 0..r.levels.len() {
        csv.row(&[num(r.levels[k]), num(r.masses[k]), num(r.radii[k]), num(r.value(r.radii[k]))]);
    }
    csv.comment("summary");
    csv.row(&["R0", "norm", "norm_star", "energy", "energy_star"]);
    csv.row(&[
        num(r.radius_r0),
        num(report.norm),
        num(report.rearranged_norm),
        num(report.energy),
        num(report.rearranged_energy),
    ]);
    csv
}

/// `h,nu_hat,residual_norm` along `refinements` halvings.
pub fn eig_series(cfg: &ScenarioConfig) -> Result<(Csv, EigenPair)> {
    let domain = cfg.domain.as_ref().ok_or_else(|| Error::Config("no domain given".into()))?;
    let mut mesh = domain.build(cfg.h, cfg.map.as_ref())?;
    let mut csv = Csv::new("h,nu_hat,residual_norm");
    let mut last = None;
    for k in 0..=cfg.refinements {
        if k > 0 {
            mesh = mesh.refine();
        }
        let m = shared(mesh.clone());
        let w = cfg.build_weight(&m)?;
        let pair = first_eigenpair(&w, DEFAULT_EIGEN_TOL)?;
        csv.row(&[num(m.resolution_h()), num(pair.nu_hat), num(pair.residual_norm)]);
        last = Some(pair);
    }
    Ok((csv, last.expect("at least one mesh")))
}

fn eigen_on(w: &ScalarField) -> Result<EigenPair> {
    first_eigenpair(w, DEFAULT_EIGEN_TOL)
}

fn equality_disk(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let mut rep = start("equality_disk");
    let mesh = refined(mesh_disk(8f64.sqrt(), cfg.h)?, cfg.refinements);
    let w = u_lambda_field(1.0, mesh.clone())?;
    let mass = w.total_mass();
    let pair = eigen_on(&w)?;
    let psi = ScalarField::from_fn(mesh, |p| (8.0 - p.norm_sq()) / (8.0 + p.norm_sq()))?;
    let profile = level_profile(&pair.eigenfunction, &w, cfg.levels.max(22), None)?;
    rep.check("abs_nu_hat", pair.nu_hat.abs(), Relation::Le, cfg.tolerance("tol_nu", 5e-3));
    rep.check("mass_rel_error", (mass - 4.0 * PI).abs() / (4.0 * PI), Relation::Le, cfg.tolerance("tol_mass", 1e-3));
    rep.check("eigenfunction_sup_error", profile_error(&pair.eigenfunction, &psi), Relation::Le, cfg.tolerance("tol_profile", 1e-2));
    rep.check("max_rel_bol_defect", worst_relative_defect(&profile), Relation::Le, cfg.tolerance("tol_bol", 2e-3));
    rep.tables.push(("levels".into(), profile_csv(&profile)));
    Ok(rep)
}

fn annulus_positive(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let mut rep = start("annulus_positive");
    let mesh = refined(crate::mesh::mesh_annulus(1.0, 2.0, cfg.h)?, cfg.refinements);
    let w = ScalarField::constant(mesh, (4.0f64 / 3.0).ln());
    let sub = liouville_residual(&w, 0.0)?;
    let pair = eigen_on(&w)?;
    rep.flag("is_subsolution", sub.is_subsolution);
    rep.check("mass_over_4pi", w.total_mass() / (4.0 * PI), Relation::Le, 1.0 + cfg.tolerance("tol_mass", 1e-3));
    rep.check("nu_hat", pair.nu_hat, Relation::Gt, cfg.tolerance("tol_margin", 0.1));
    let mut csv = Csv::new("h,nu_hat,residual_norm");
    csv.row(&[num(w.mesh().resolution_h()), num(pair.nu_hat), num(pair.residual_norm)]);
    rep.tables.push(("eig".into(), csv));
    Ok(rep)
}

/// Masses (in units of π) of the threshold family.
pub const SWEEP_MASSES: [f64; 4] = [2.0, 3.0, 3.8, 4.0];

fn threshold_sweep(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let mut rep = start("threshold_sweep");
    let mut csv = Csv::new("mass_over_pi,radius,nu_hat,residual_norm");
    let mut values = Vec::new();
    for k in SWEEP_MASSES {
        let m = k * PI;
        let radius = (8.0 * m / (EIGHT_PI - m)).sqrt();
        let mesh = refined(mesh_disk(radius, cfg.h)?, cfg.refinements);
        let w = u_lambda_field(1.0, mesh)?;
        let pair = eigen_on(&w)?;
        csv.row(&[num(k), num(radius), num(pair.nu_hat), num(pair.residual_norm)]);
        values.push(pair.nu_hat);
    }
    for (k, v) in SWEEP_MASSES.iter().zip(&values).take(3) {
        rep.check(&format!("nu_hat_mass_{k}pi"), *v, Relation::Gt, 0.0);
    }
    rep.check("abs_nu_hat_mass_4pi", values[3].abs(), Relation::Le, cfg.tolerance("tol_nu", 5e-3));
    let steps = values.windows(2).map(|p| p[1] - p[0]).fold(f64::NEG_INFINITY, f64::max);
    rep.check("largest_step_along_sweep", steps, Relation::Lt, 0.0);
    rep.tables.push(("sweep".into(), csv));
    Ok(rep)
}

fn conformal_equality(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let mut rep = start("conformal_equality");
    let map = match &cfg.map {
        Some(m) => m.clone(),
        None => ConformalMap::polynomial(&[1.0, 0.3])?,
    };
    let univalent = map.univalence_check().is_ok();
    rep.flag("univalent", univalent);
    let mesh = refined(mesh_mapped_disk(&map, cfg.h)?, cfg.refinements);
    let w = pullback_field(&map, 8f64.sqrt(), &mesh)?;
    let mass = w.total_mass();
    let pair = eigen_on(&w)?;
    let reference = transported_profile(&map, &mesh)?;
    let profile = level_profile(&pair.eigenfunction, &w, cfg.levels.max(22), None)?;
    rep.check("mass_rel_error", (mass - 4.0 * PI).abs() / (4.0 * PI), Relation::Le, cfg.tolerance("tol_mass", 2e-3));
    rep.check("abs_nu_hat", pair.nu_hat.abs(), Relation::Le, cfg.tolerance("tol_nu", 1e-2));
    rep.check("eigenfunction_sup_error", profile_error(&pair.eigenfunction, &reference), Relation::Le, cfg.tolerance("tol_profile", 2e-2));
    rep.check("max_rel_bol_defect", worst_relative_defect(&profile), Relation::Le, cfg.tolerance("tol_bol", 5e-3));
    rep.tables.push(("levels".into(), profile_csv(&profile)));
    Ok(rep)
}

fn audit_checks(rep: &mut ScenarioReport, audit: &AuditReport, expected: AuditBranch) {
    rep.flag(&format!("branch_is_{}", expected.label()), audit.branch == expected);
    for r in &audit.rows {
        rep.flag(&format!("row_{}", r.name), r.ok);
    }
    rep.check("final_defect", audit.final_defect, Relation::Gt, 0.0);
    rep.tables.push(("audit".into(), audit_csv(audit)));
}

/// `ω = A(a, b)` inside `Ω = A(ri, ro)` (or the disk when `ri = 0`), weight
/// given on `Ω`; ambient mesh fills the hole of `Ω`.
pub fn annular_audit(
    ri: f64,
    a: f64,
    b: f64,
    ro: f64,
    h: f64,
    refinements: usize,
    weight: impl Fn(Point) -> f64,
) -> Result<AuditReport> {
    if !(0.0 <= ri && ri < a && a < b && b < ro) {
        return Err(Error::invalid("need 0 ≤ ri < a < b < ro"));
    }
    let breaks: Vec<f64> = if ri > 0.0 { vec![0.0, ri, a, b, ro] } else { vec![0.0, a, b, ro] };
    let ambient = refined(mesh_polar_zones(&breaks, h)?, refinements);
    let (w, dom, om) = polar_audit_setup(&ambient, weight, |p| p.norm() > ri, |p| {
        let r = p.norm();
        r > a && r < b
    })?;
    appendix_audit(&w, &dom, &om)
}

fn appendix_audit_annulus(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let mut rep = start("appendix_audit_annulus");
    let audit = annular_audit(1.0, 1.2, 1.8, 2.0, cfg.h, cfg.refinements, |_| 0.0)?;
    audit_checks(&mut rep, &audit, AuditBranch::SmallFill);
    Ok(rep)
}

fn appendix_audit_union(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let mut rep = start("appendix_audit_union");
    let audit = annular_audit(0.0, 0.8, 1.5, 2.0, cfg.h, cfg.refinements, |p| u_lambda_at(1.0, p))?;
    audit_checks(&mut rep, &audit, AuditBranch::InteriorHoles);
    Ok(rep)
}

fn appendix_audit_disconnected(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let mut rep = start("appendix_audit_disconnected");
    let disk = mesh_disk(1.0, cfg.h)?;
    let shift = Point::new(3.0, 0.0);
    let pair = refined(disk.disjoint_union(&disk.translated(shift)?)?, cfg.refinements);
    let w = ScalarField::from_fn(pair.clone(), |p| {
        let c = if p.x > 1.5 { shift } else { Point::new(0.0, 0.0) };
        u_lambda_at(1.0, p - c)
    })?;
    let all = vec![true; pair.triangles().len()];
    let audit = appendix_audit(&w, &all, &all)?;
    let m = 16.0 * PI / 9.0;
    let l = 2.0 * 2.0 * PI / (1.0 + 1.0 / 8.0);
    let exact = l * l - 0.5 * m * (EIGHT_PI - m);
    rep.check(
        "final_defect_rel_error",
        (audit.final_defect - exact).abs() / exact,
        Relation::Le,
        cfg.tolerance("tol_mass", 1e-3),
    );
    audit_checks(&mut rep, &audit, AuditBranch::Disconnected);
    Ok(rep)
}

fn bol_strict_constant(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let mut rep = start("bol_strict_constant");
    let mesh = refined(mesh_disk(1.0, cfg.h)?, cfg.refinements);
    let w = ScalarField::constant(mesh, 4f64.ln());
    let whole = level_stats(&w, &w, None, w.min())?;
    let defect = bol_defect(whole.ell, whole.mass)?;
    rep.check("whole_domain_defect", defect, Relation::Ge, 0.5);
    let pair = eigen_on(&w)?;
    let profile = level_profile(&pair.eigenfunction, &w, cfg.levels.max(22), None)?;
    rep.check("min_rel_bol_defect", min_relative_defect(&profile), Relation::Ge, -cfg.tolerance("tol_bol", 2e-3));
    rep.tables.push(("levels".into(), profile_csv(&profile)));
    Ok(rep)
}

fn rearrangement_chain(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let mut rep = start("rearrangement_chain");
    let mesh = refined(mesh_disk(1.0, cfg.h)?, cfg.refinements);
    let w = ScalarField::constant(mesh, 4f64.ln());
    let pair = eigen_on(&w)?;
    let chain = rayleigh_chain_report(&pair.eigenfunction, &w, crate::rearrange::DEFAULT_LEVELS)?;
    let r = &chain.rearranged;
    let tol = cfg.tolerance("tol_rearrange", 1e-3);
    rep.check("equimeasurability_error", r.equimeasurability_error(), Relation::Le, tol);
    rep.check("norm_rel_gap", (chain.rearranged_norm - chain.norm).abs() / chain.norm, Relation::Le, tol);
    rep.check("energy_excess_rel", (chain.rearranged_energy - chain.energy) / chain.energy, Relation::Le, tol);
    rep.check("r0_rel_error", (r.radius_r0 - 8f64.sqrt()).abs() / 8f64.sqrt(), Relation::Le, tol);
    rep.check("worst_chain_margin", chain.worst_margin(), Relation::Ge, -cfg.tolerance("tol_bol", 1e-2));
    rep.check("source_gap_minus_rearranged_gap", chain.source_gap() - chain.rearranged_gap(), Relation::Ge, -tol * chain.energy);
    rep.tables.push(("rearrange".into(), rearrange_csv(&chain)));
    Ok(rep)
}

/// Gauge constants exercised by the invariance scenario.
pub const GAUGE_CONSTANTS: [f64; 3] = [-1.0, 0.5, 2.0];

fn gauge_invariance(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let mut rep = start("gauge_invariance");
    let disk = shared(mesh_disk(8f64.sqrt(), cfg.h)?);
    let annulus = shared(crate::mesh::mesh_annulus(1.0, 2.0, cfg.h)?);
    let map = ConformalMap::polynomial(&[1.0, 0.3])?;
    let mapped = shared(mesh_mapped_disk(&map, cfg.h)?);
    let cases = [
        ("u1_disk", u_lambda_field(1.0, disk.clone())?),
        ("const_annulus", ScalarField::constant(annulus.clone(), (4.0f64 / 3.0).ln())),
        ("pullback_mapped", pullback_field(&map, 8f64.sqrt(), &mapped)?),
    ];
    let mut csv = Csv::new("field,c,m,m_c,ell,ell_c");
    let tol = cfg.tolerance("tol_gauge", 1e-10);
    for (name, w) in &cases {
        let probe = ScalarField::from_fn(w.mesh().clone(), |p| (-p.norm_sq()).exp())?;
        for c in GAUGE_CONSTANTS {
            let wc = normalize_gauge(w, c)?;
            let probe_c = ScalarField::new(wc.mesh().clone(), probe.values().to_vec())?;
            let (m, mc) = (w.total_mass(), wc.total_mass());
            let (l, lc) = (w.boundary_weight(), wc.boundary_weight());
            let s = level_stats(&probe, w, None, 0.5 * (probe.max() + probe.min()))?;
            let sc = level_stats(&probe_c, &wc, None, 0.5 * (probe.max() + probe.min()))?;
            let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(f64::MIN_POSITIVE);
            let worst = rel(m, mc).max(rel(l, lc)).max(rel(s.mass, sc.mass)).max(rel(s.ell, sc.ell));
            rep.check(&format!("{name}_c{c}_rel_change"), worst, Relation::Le, tol);
            csv.row(&[name.to_string(), num(c), num(m), num(mc), num(l), num(lc)]);
        }
    }
    rep.tables.push(("gauge".into(), csv));
    Ok(rep)
}

/// `(λ, δ)` pairs of the closed-form checks.
pub const CLOSED_FORM_CASES: [(f64, f64); 4] = [(1.0, 1.0), (1.0, 2.828_427_124_746_190_1), (2.828_427_124_746_190_1, 1.0), (2.0, 2.0)];

/// `(mass error, boundary error)`, relative, for `U_λ` on `B_δ`.
pub fn closed_form_errors(lambda: f64, delta: f64, mesh: Arc<Mesh>) -> Result<(f64, f64)> {
    let w = u_lambda_field(lambda, mesh)?;
    let q = 1.0 + lambda * lambda * delta * delta / 8.0;
    let mass = PI * delta * delta * lambda * lambda / q;
    let ell = 2.0 * PI * delta * lambda / q;
    Ok(((w.total_mass() - mass).abs() / mass, (w.boundary_weight() - ell).abs() / ell))
}

fn closed_form_integrals(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let mut rep = start("closed_form_integrals");
    let tol = cfg.tolerance("tol_mass", 1e-3);
    let mut csv = Csv::new("lambda,delta,h,mass_rel_error,ell_rel_error");
    for (lambda, delta) in CLOSED_FORM_CASES {
        let coarse = refined(mesh_disk(delta, cfg.h)?, cfg.refinements);
        let fine = shared(coarse.refine());
        let (mc, lc) = closed_form_errors(lambda, delta, coarse.clone())?;
        let (mf, lf) = closed_form_errors(lambda, delta, fine.clone())?;
        csv.row(&[num(lambda), num(delta), num(coarse.resolution_h()), num(mc), num(lc)]);
        csv.row(&[num(lambda), num(delta), num(fine.resolution_h()), num(mf), num(lf)]);
        let tag = format!("l{lambda:.3}_d{delta:.3}");
        rep.check(&format!("{tag}_mass_rel_error"), mc, Relation::Le, tol);
        rep.check(&format!("{tag}_ell_rel_error"), lc, Relation::Le, tol);
        rep.check(&format!("{tag}_mass_error_ratio"), mc / mf, Relation::Ge, 3.0);
        rep.check(&format!("{tag}_mass_error_ratio_upper"), mc / mf, Relation::Le, 5.5);
    }
    rep.tables.push(("integrals".into(), csv));
    Ok(rep)
}

fn newton_minimal_branch(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let mut rep = start("newton_minimal_branch");
    let mesh = refined(mesh_disk(1.0, cfg.h)?, cfg.refinements);
    let nb = mesh.boundary_nodes().len();
    let centre = (0..mesh.vertex_count())
        .min_by(|&a, &b| mesh.vertices()[a].norm().total_cmp(&mesh.vertices()[b].norm()))
        .expect("nonempty mesh");
    let tol = cfg.tolerance("tol_newton", 2e-3);
    let mut csv = Csv::new("boundary_value,lambda,centre_value,expected,sup_error");
    let lambda_minimal = 4.0 - 2.0 * 2f64.sqrt();
    for (g, lambda) in [(-2.0 * (9.0f64 / 8.0).ln(), 1.0), (0.0, lambda_minimal)] {
        let w = solve_liouville_dirichlet(&mesh, &vec![g; nb], 50, 1e-10)?;
        let exact = u_lambda_field(lambda, mesh.clone())?;
        let err = w.values().iter().zip(exact.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        csv.row(&[num(g), num(lambda), num(w.values()[centre]), num(exact.values()[centre]), num(err)]);
        rep.check(&format!("sup_error_g{g:.4}"), err, Relation::Le, tol);
    }
    let diverged = matches!(solve_liouville_dirichlet(&mesh, &vec![10.0; nb], 50, 1e-10), Err(Error::NewtonDiverged { .. }));
    rep.flag("no_solution_for_g10", diverged);
    rep.tables.push(("newton".into(), csv));
    Ok(rep)
}

/// Level profile for the `bol` subcommand: levels of `u` from the
/// decomposition of `w` (with `μ`), or of the first eigenfunction.
pub fn bol_profile(w: &ScalarField, levels: usize, eigen: bool) -> Result<LevelSetProfile> {
    if eigen {
        let pair = eigen_on(w)?;
        level_profile(&pair.eigenfunction, w, levels, None)
    } else {
        let d = decompose(w)?;
        level_profile(&d.u, w, levels, Some(&d.h))
    }
}
