use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use liouville_lab::config::{DomainSpec, ScenarioConfig};
use liouville_lab::levelset::polar_audit_setup;
use liouville_lab::mesh::{mesh_polar_zones, shared};
use liouville_lab::rearrange::{rayleigh_chain_report, DEFAULT_LEVELS};
use liouville_lab::scenario::{
    audit_csv, bol_profile, eig_series, list_scenarios, profile_csv, rearrange_csv, run_scenario, Csv,
};
use liouville_lab::spectral::{first_eigenpair, DEFAULT_EIGEN_TOL};
use liouville_lab::{Error, ScalarField};

#[derive(Parser, Debug)]
#[command(name = "liouville-lab", version, about = "Numerical checks for the linearized Liouville eigenvalue problem and the Alexandrov-Bol inequality")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Config file (`key = value` lines under `[scenario]`); flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Domain: disk:R, annulus:a,b, rect:x0,y0,x1,y1 or mapped.
    #[arg(long, global = true)]
    domain: Option<String>,
    /// Weight: u:λ, const:c, zero, pullback:λ or liouville:g.
    #[arg(long, global = true)]
    weight: Option<String>,
    /// Conformal map: poly:1,0.3 or scale:δ,θ or mobius:re,im,θ,s.
    #[arg(long, global = true)]
    map: Option<String>,
    /// Target mesh size.
    #[arg(long, global = true)]
    h: Option<String>,
    #[arg(long, global = true)]
    refinements: Option<usize>,
    #[arg(long, global = true)]
    levels: Option<usize>,
    /// Output directory (default: $LIOUVILLE_LAB_OUT, else stdout).
    #[arg(long, global = true, env = "LIOUVILLE_LAB_OUT")]
    out: Option<PathBuf>,
    /// Write the mesh in dump format to this file.
    #[arg(long, global = true)]
    dump_mesh: Option<PathBuf>,
    /// Write the computed field (one value per line) to this file.
    #[arg(long, global = true)]
    dump_field: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// First eigenvalue ν̂₁ along a refinement series.
    Eig,
    /// Level-set profile with Bol defects.
    Bol {
        /// Take levels of the first eigenfunction instead of `u = w - h`.
        #[arg(long)]
        eigen: bool,
    },
    /// Inequality chain for an annular ω inside the domain.
    Audit {
        /// ω as annulus:a,b.
        #[arg(long)]
        omega: String,
    },
    /// Radial rearrangement of the first eigenfunction.
    Rearrange,
    /// Named experiments.
    Scenario {
        #[command(subcommand)]
        action: ScenarioAction,
    },
}

#[derive(Subcommand, Debug)]
enum ScenarioAction {
    /// Run one scenario, or `all`.
    Run { name: String },
    /// Names and statements.
    List,
}

fn config_from(common: &Common) -> liouville_lab::Result<ScenarioConfig> {
    let mut cfg = match &common.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    let pairs = [
        ("domain", common.domain.clone()),
        ("weight", common.weight.clone()),
        ("map", common.map.clone()),
        ("h", common.h.clone()),
        ("refinements", common.refinements.map(|v| v.to_string())),
        ("levels", common.levels.map(|v| v.to_string())),
    ];
    for (k, v) in pairs {
        if let Some(v) = v {
            cfg.set(k, &v)?;
        }
    }
    if let Some(o) = &common.out {
        cfg.out = Some(o.clone());
    }
    Ok(cfg)
}

fn emit(cfg: &ScenarioConfig, file: &str, csv: &Csv) -> liouville_lab::Result<()> {
    match &cfg.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(file), csv.as_str())?;
        }
        None => print!("{}", csv.as_str()),
    }
    Ok(())
}

fn dump(common: &Common, field: &ScalarField) -> liouville_lab::Result<()> {
    if let Some(p) = &common.dump_mesh {
        std::fs::write(p, field.mesh().dump())?;
    }
    if let Some(p) = &common.dump_field {
        std::fs::write(p, field.dump())?;
    }
    Ok(())
}

fn run(cli: &Cli) -> liouville_lab::Result<bool> {
    let common = &cli.common;
    let cfg = config_from(common)?;
    match &cli.command {
        Command::Eig => {
            let (csv, pair) = eig_series(&cfg)?;
            dump(common, &pair.eigenfunction)?;
            emit(&cfg, "eig.csv", &csv)?;
        }
        Command::Bol { eigen } => {
            let mesh = cfg.build_mesh()?;
            let w = cfg.build_weight(&mesh)?;
            let profile = bol_profile(&w, cfg.levels, *eigen)?;
            dump(common, &w)?;
            emit(&cfg, "bol.csv", &profile_csv(&profile))?;
        }
        Command::Audit { omega } => {
            let (a, b) = match omega.parse::<DomainSpec>()? {
                DomainSpec::Annulus { inner, outer } => (inner, outer),
                _ => return Err(Error::Config("--omega must be annulus:a,b".into())),
            };
            let (ri, ro) = match cfg.domain.as_ref().ok_or_else(|| Error::Config("no domain given".into()))? {
                DomainSpec::Annulus { inner, outer } => (*inner, *outer),
                DomainSpec::Disk { radius } => (0.0, *radius),
                _ => return Err(Error::Config("audit needs a disk or annulus domain".into())),
            };
            if !(ri < a && a < b && b < ro) {
                return Err(Error::Config("ω must sit strictly inside the domain".into()));
            }
            let breaks: Vec<f64> = if ri > 0.0 { vec![0.0, ri, a, b, ro] } else { vec![0.0, a, b, ro] };
            let mut mesh = mesh_polar_zones(&breaks, cfg.h)?;
            for _ in 0..cfg.refinements {
                mesh = mesh.refine();
            }
            let ambient = shared(mesh);
            // the weight is evaluated on the filled ambient mesh, then zeroed in the gap
            let full = cfg.build_weight(&ambient)?;
            let lookup: std::collections::HashMap<(u64, u64), f64> = ambient
                .vertices()
                .iter()
                .zip(full.values())
                .map(|(p, &v)| ((p.x.to_bits(), p.y.to_bits()), v))
                .collect();
            let (w, dom, om) = polar_audit_setup(
                &ambient,
                |p| lookup[&(p.x.to_bits(), p.y.to_bits())],
                |p| p.norm() > ri,
                |p| p.norm() > a && p.norm() < b,
            )?;
            let report = liouville_lab::levelset::appendix_audit(&w, &dom, &om)?;
            dump(common, &w)?;
            emit(&cfg, "audit.csv", &audit_csv(&report))?;
            return Ok(report.all_ok());
        }
        Command::Rearrange => {
            let mesh = cfg.build_mesh()?;
            let w = cfg.build_weight(&mesh)?;
            let pair = first_eigenpair(&w, DEFAULT_EIGEN_TOL)?;
            let levels = common.levels.unwrap_or(DEFAULT_LEVELS);
            let report = rayleigh_chain_report(&pair.eigenfunction, &w, levels)?;
            dump(common, &pair.eigenfunction)?;
            emit(&cfg, "rearrange.csv", &rearrange_csv(&report))?;
        }
        Command::Scenario { action: ScenarioAction::List } => {
            for s in list_scenarios() {
                println!("{}\t{}", s.name, s.statement);
            }
        }
        Command::Scenario { action: ScenarioAction::Run { name } } => {
            let names: Vec<String> = if name == "all" {
                list_scenarios().iter().map(|s| s.name.to_string()).collect()
            } else {
                vec![name.clone()]
            };
            let mut all_ok = true;
            for n in names {
                let mut c = cfg.clone();
                c.scenario = Some(n.clone());
                let report = run_scenario(&c)?;
                match &cfg.out {
                    Some(dir) => {
                        report.write(dir)?;
                    }
                    None => print!("{}", report.checks_csv().as_str()),
                }
                if report.passed() {
                    eprintln!("PASS {n}");
                } else {
                    all_ok = false;
                    for f in report.failures() {
                        eprintln!("FAIL {n}: {} = {:e} (required {:?} {:e})", f.name, f.value, f.relation, f.bound);
                    }
                }
            }
            return Ok(all_ok);
        }
    }
    Ok(true)
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidInput(_) | Error::MismatchedBoundary(_) | Error::NonUnivalent(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
