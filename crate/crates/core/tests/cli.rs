use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_liouville-lab"))
        .args(args)
        .env_remove("LIOUVILLE_LAB_OUT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn scenario_list_names_every_experiment() {
    let o = lab(&["scenario", "list"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for name in ["equality_disk", "annulus_positive", "threshold_sweep", "appendix_audit_annulus", "conformal_equality"] {
        assert!(text.lines().any(|l| l.starts_with(name) && l.contains('\t')), "{name} missing");
    }
}

#[test]
fn eig_prints_versioned_csv() {
    let o = lab(&["eig", "--domain", "disk:sqrt(8)", "--weight", "u:1", "--h", "0.1", "--refinements", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# schema=1");
    assert_eq!(lines[1], "h,nu_hat,residual_norm");
    assert_eq!(lines.len(), 4);
    let nu: f64 = lines[3].split(',').nth(1).unwrap().parse().unwrap();
    assert!(nu.abs() < 5e-3, "{nu}");
}

#[test]
fn out_flag_and_environment_choose_the_directory() {
    let dir = tempfile::tempdir().unwrap();
    let flag = dir.path().join("flag");
    let o = lab(&["bol", "--domain", "disk:1", "--weight", "u:sqrt(8)", "--h", "0.1", "--out", flag.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).is_empty());
    let csv = std::fs::read_to_string(flag.join("bol.csv")).unwrap();
    assert!(csv.starts_with("# schema=1\n"));

    let env = dir.path().join("env");
    let o = Command::new(env!("CARGO_BIN_EXE_liouville-lab"))
        .args(["rearrange", "--domain", "disk:1", "--weight", "const:ln4", "--h", "0.1"])
        .env("LIOUVILLE_LAB_OUT", &env)
        .output()
        .unwrap();
    // `ln4` is not a number, so this one must fail as a config error
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_liouville-lab"))
        .args(["rearrange", "--domain", "disk:1", "--weight", "const:1.3862943611198906", "--h", "0.1"])
        .env("LIOUVILLE_LAB_OUT", &env)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(env.join("rearrange.csv")).unwrap();
    assert!(csv.starts_with("# schema=1\nt,m,R,phi_star\n"));
}

#[test]
fn dumps_mesh_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("mesh.txt");
    let field = dir.path().join("field.txt");
    let o = lab(&[
        "bol",
        "--domain",
        "annulus:1,2",
        "--weight",
        "const:0.2876820724517809",
        "--h",
        "0.2",
        "--dump-mesh",
        mesh.to_str().unwrap(),
        "--dump-field",
        field.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mesh_text = std::fs::read_to_string(&mesh).unwrap();
    let counts: Vec<i64> = mesh_text.lines().next().unwrap().split(' ').map(|t| t.parse().unwrap()).collect();
    assert_eq!(counts.len(), 4);
    assert_eq!(counts[0] - counts[1] + counts[2], 0, "annulus has Euler characteristic 0");
    assert_eq!(counts[3], 2);
    let field_text = std::fs::read_to_string(&field).unwrap();
    assert_eq!(field_text.lines().count() as i64, counts[0] + 1);
}

#[test]
fn audit_subcommand_reports_chain() {
    let o = lab(&["audit", "--domain", "annulus:1,2", "--weight", "zero", "--omega", "annulus:1.2,1.8", "--h", "0.1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("# branch: case3"));
    assert!(text.contains("name,lhs,rhs,margin,ok"));
    assert!(text.lines().filter(|l| l.starts_with("final,")).all(|l| l.ends_with(",true")));
}

#[test]
fn bad_input_exits_with_two() {
    assert_eq!(lab(&["scenario", "run", "no_such_scenario"]).status.code(), Some(2));
    assert_eq!(lab(&["eig", "--domain", "triangle:1"]).status.code(), Some(2));
    assert_eq!(lab(&["eig", "--domain", "disk:1", "--weight", "zero", "--h", "-1"]).status.code(), Some(2));
    assert_eq!(lab(&["audit", "--domain", "disk:1", "--weight", "zero", "--omega", "annulus:0.5,1.5"]).status.code(), Some(2));
    assert_eq!(lab(&["frobnicate"]).status.code(), Some(2));
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.cfg");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn config_file_unknown_key_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[scenario]\nh = 0.1\nmesh_size = 3\n");
    let o = lab(&["--config", &cfg, "scenario", "run", "equality_disk"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mesh_size"));
}

#[test]
fn failing_check_exits_with_one_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "# impossible tolerance\n[scenario]\nh = 0.1\ntol_nu = 1e-12\n");
    let o = lab(&["--config", &cfg, "scenario", "run", "equality_disk"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("FAIL equality_disk: abs_nu_hat"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[scenario]\nh = 0.1\ntol_nu = 1e-12\n");
    let o = lab(&["--config", &cfg, "eig", "--domain", "disk:1", "--weight", "zero", "--h", "0.2"]);
    assert!(o.status.success());
    let h: f64 = stdout(&o).lines().nth(2).unwrap().split(',').next().unwrap().parse().unwrap();
    assert!(h > 0.1, "{h}");
}

#[test]
fn scenario_run_writes_checks_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&["scenario", "run", "annulus_positive", "--h", "0.1", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("PASS annulus_positive"));
    let checks = std::fs::read_to_string(dir.path().join("annulus_positive.csv")).unwrap();
    assert!(checks.starts_with("# schema=1\n"));
    assert!(checks.contains("check,value,relation,bound,ok"));
    assert!(dir.path().join("annulus_positive_eig.csv").exists());
}
