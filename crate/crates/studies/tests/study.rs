use std::process::Command;

use thinpl_studies::coefficients::{coefficient_table, run_coefficient_table, CoeffConfig};
use thinpl_studies::identity::run_identity_suite;
use thinpl_studies::{run_convergence_study, StudyConfig};

const CONSTANT: &str = r#"
alpha = 1.0
beta = 0.5
gamma = 1.0
p = 2.0
eps_list = [0.125, 0.0625]
g = { period = 1.0, family = "constant", c = 1.0 }
h = { period = 1.0, family = "constant", c = 1.0 }
forcing = { kind = "x_dependent", f = { family = "constant", value = 1.0 } }
"#;

const BENCHMARK: &str = r#"
alpha = 1.0
beta = 0.5
gamma = 1.0
p = 2.0
eps_list = [0.25, 0.125, 0.0625, 0.03125, 0.015625]
g = { period = 1.0, family = "cosine", a = 2.0, b = 1.0, k = 1 }
h = { period = 1.0, family = "constant", c = 1.0 }
forcing = { kind = "x_dependent", f = { family = "constant", value = 1.0 } }
"#;

#[test]
fn constant_profiles_are_already_converged() {
    let cfg = StudyConfig::from_toml(CONSTANT).unwrap();
    let r = run_convergence_study(&cfg).unwrap();
    assert!((r.model.q - 1.0).abs() < 1e-12);
    assert!(r.rows.iter().all(|row| row.failure.is_none()));
    // u_eps is x-independent; its y-profile y^2/2 - eps^2/6 has unfolded norm eps^2/sqrt(45)
    for row in &r.rows {
        let want = row.eps * row.eps / 45f64.sqrt();
        assert!((row.e_lp - want).abs() <= 0.05 * want, "eps {}: e_lp {} vs {want}", row.eps, row.e_lp);
    }
    assert!(r.rows[1].e_lp <= 1e-3);
}

#[test]
fn cosine_benchmark_error_decreases() {
    let cfg = StudyConfig::from_toml(BENCHMARK).unwrap();
    let r = run_convergence_study(&cfg).unwrap();
    let e = r.e_lp();
    assert!(e.windows(2).all(|w| w[1] < w[0]), "e_lp {e:?}");

    let csv = r.table().to_string();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with(&format!("# thinpl {} study config_sha256={}", env!("CARGO_PKG_VERSION"), cfg.hash())));
    let header = lines.iter().position(|l| !l.starts_with('#')).unwrap();
    assert!(lines[header].starts_with("eps,dofs,"));
    assert_eq!(lines.len() - header - 1, 5);
    let width = lines[header].split(',').count();
    assert!(lines[header + 1..].iter().all(|l| l.split(',').count() == width && l.ends_with(",ok")));
}

#[test]
fn coefficient_table_rows() {
    let cfg = CoeffConfig { p_list: vec![2.0], ..CoeffConfig::default() };
    let rows = run_coefficient_table(&cfg);
    let constant = rows.iter().find(|r| r.profile == "constant").unwrap();
    assert_eq!((constant.q_sub, constant.q_res, constant.q_super), (1.0, 1.0, 1.0));
    let cosine = rows.iter().find(|r| r.profile == "cosine").unwrap();
    assert!((cosine.q_sub - 3f64.sqrt() / 2.0).abs() < 1e-8);
    assert!((cosine.q_super - 0.5).abs() < 1e-12);
    assert!(cosine.q_res > 0.5 && cosine.q_res < cosine.q_sub);
    let saw = rows.iter().find(|r| r.profile == "sawtooth").unwrap();
    assert!((saw.q_super - 0.5).abs() < 1e-12);
    let table = coefficient_table(&cfg, &rows).to_string();
    assert!(table.starts_with("# thinpl "));
    assert_eq!(table.lines().filter(|l| !l.starts_with('#')).count(), 1 + rows.len());
}

#[test]
fn identity_suite_on_constant_profiles() {
    let cfg = StudyConfig::from_toml(CONSTANT).unwrap();
    let rep = run_identity_suite(&cfg, false).unwrap();
    assert!(rep.all_pass(), "{:#?}", rep.checks.iter().filter(|c| !c.pass).collect::<Vec<_>>());
    let bad = run_identity_suite(&cfg, true).unwrap();
    assert!(!bad.find("first_unfolding", 0.125).unwrap().pass);
}

#[test]
fn command_line_writes_headed_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, CONSTANT).unwrap();
    let run = |args: &[&str], out: &str| {
        let path = dir.path().join(out);
        let out = Command::new(env!("CARGO_BIN_EXE_thinpl"))
            .args(args)
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(&path)
            .arg("--threads")
            .arg("1")
            .output()
            .unwrap();
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        std::fs::read_to_string(path).unwrap()
    };
    let study = run(&["study", "--eps-list", "0.125"], "s.csv");
    assert!(study.starts_with("# thinpl "));
    assert_eq!(study.lines().filter(|l| !l.starts_with('#')).count(), 2);
    let one = run(&["solve1d", "--alpha-case", "super"], "u.csv");
    assert!(one.lines().any(|l| l == "x,u"));
    let two = run(&["solve2d"], "v.csv");
    assert!(two.lines().any(|l| l == "x,y,u"));
    let verify = run(&["verify"], "w.csv");
    assert!(verify.contains("first_unfolding"));
}
