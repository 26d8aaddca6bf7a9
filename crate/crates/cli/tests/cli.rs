//! End-to-end tests of the `bachex` binary: exit codes, catalog
//! coverage, report determinism, and the sweep CSV layout.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bachex"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("bachex-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(dir: &PathBuf, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const CLOSED_FAMILY: &str = r#"
[surface]
kind = "typeA"
gamma = [0.0, 0.0, 1.0, 1.0, 0.0, 0.0]

[endomorphism]
kind = "nilpotent_spec"
alpha = "(1 + sin(x2)/10) * sqrt(exp(2*x1) + 1/2 + cos(x2)/5)"
xi = "0"

[evaluation]
samples = 6
seed = 11
"#;

#[test]
fn catalog_list_names_every_entry() {
    let out = bin().args(["catalog", "list"]).output().unwrap();
    assert!(out.status.success());
    let text = stdout(&out);
    for name in [
        "example_4_2",
        "example_4_3",
        "example_4_4",
        "example_4_5",
        "example_4_6",
        "example_5_1_theta_pi3",
        "example_5_1_rho_zero",
        "example_6_3",
        "example_6_4_case1",
        "s23_mixed_jordan",
    ] {
        assert!(text.contains(name), "missing {name} in:\n{text}");
    }
    assert_eq!(text.lines().count(), 10);
}

#[test]
fn every_catalog_entry_carries_a_citation() {
    let out = bin().args(["catalog", "run", "--all"]).output().unwrap();
    assert!(out.status.success(), "{}", stdout(&out));
    let text = stdout(&out);
    let json_start = text.find('{').unwrap();
    let v: serde_json::Value = serde_json::from_str(&text[json_start..]).unwrap();
    let results = v["results"].as_array().unwrap();
    assert_eq!(results.len(), 10);
    for r in results {
        assert!(
            !r["citation"].as_str().unwrap().is_empty(),
            "entry {} has no citation",
            r["name"]
        );
        assert!(!r["expected"].as_str().unwrap().is_empty());
        assert_eq!(r["pass"], true, "entry {} failed", r["name"]);
    }
}

#[test]
fn bachflat_check_passes_on_the_closed_family() {
    let dir = scratch("bf-pass");
    let cfg = write(&dir, "scen.toml", CLOSED_FAMILY);
    let out = bin()
        .args(["check", "bachflat"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
}

#[test]
fn bachflat_check_fails_on_a_generic_metric() {
    let dir = scratch("bf-fail");
    let cfg = write(
        &dir,
        "scen.toml",
        r#"
[surface]
kind = "typeA"
gamma = [0.3, 0.1, -0.2, 0.4, 0.0, 0.5]

[endomorphism]
kind = "explicit"
t11 = "1"
t22 = "2"

[evaluation]
samples = 4
seed = 3
"#,
    );
    let out = bin()
        .args(["check", "bachflat"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn malformed_expression_exits_2_with_position() {
    let dir = scratch("parse");
    let cfg = write(
        &dir,
        "scen.toml",
        r#"
[surface]
kind = "explicit"
g11_1 = "1 + * x1"
"#,
    );
    let out = bin().args(["eval"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(err.contains("position"), "{err}");
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = scratch("unknown-key");
    let cfg = write(
        &dir,
        "scen.toml",
        r#"
[surface]
kind = "typeA"
gamma = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
typo_key = 1
"#,
    );
    let out = bin().args(["eval"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reports_are_deterministic_modulo_timestamp() {
    let dir = scratch("determinism");
    let cfg = write(&dir, "scen.toml", CLOSED_FAMILY);
    let strip = |o: Output| -> String {
        stdout(&o)
            .lines()
            .filter(|l| !l.contains("\"timestamp\""))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let a = strip(bin().args(["eval"]).arg(&cfg).output().unwrap());
    let b = strip(bin().args(["eval"]).arg(&cfg).output().unwrap());
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn invariant_sweep_csv_has_the_fixed_columns() {
    let dir = scratch("sweep");
    let cfg = write(
        &dir,
        "scen.toml",
        r#"
[surface]
kind = "typeB"
gamma = [1.0, 0.0, 0.4, 0.3, -0.2, 0.6]

[evaluation.grid]
x1_min = 0.8
x1_max = 1.4
n1 = 2
x2_min = -0.5
x2_max = 0.5
n2 = 2
y1 = 0.25
y2 = -0.35
"#,
    );
    let out = bin()
        .args(["invariants", "--format", "csv"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "x1,x2,y1,y2,tau,normRho2,normR2,beta1,beta2,flags"
    );
    assert_eq!(lines.count(), 9);
}

#[test]
fn solve_pde_reports_convergence_and_dumps_fields() {
    let dir = scratch("pde");
    let cfg = write(
        &dir,
        "scen.toml",
        r#"
[surface]
kind = "typeA"
gamma = [0.0, 0.0, 1.0, 1.0, 0.0, 0.0]
"#,
    );
    let outdir = dir.join("out");
    let out = bin()
        .args(["solve", "pde", "--surface"])
        .arg(&cfg)
        .args([
            "--xi0",
            "sin(x2)/10",
            "--length",
            "0.5",
            "--n1",
            "32",
            "--n2",
            "16",
            "--out",
        ])
        .arg(&outdir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(outdir.join("pde.json")).unwrap()).unwrap();
    let ratio = rep["results"]["xi_ratio"].as_f64().unwrap();
    assert!(ratio > 3.5, "convergence ratio {ratio}");
    let csv = std::fs::read_to_string(outdir.join("pde_fields.csv")).unwrap();
    assert!(csv.starts_with("i,j,x1,x2,xi,alpha"));
    assert_eq!(csv.lines().count(), 1 + 33 * 16);
}

#[test]
fn pde_stability_abort_exits_3() {
    let dir = scratch("pde-cfl");
    let cfg = write(
        &dir,
        "scen.toml",
        r#"
[surface]
kind = "typeA"
gamma = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
"#,
    );
    let out = bin()
        .args(["solve", "pde", "--surface"])
        .arg(&cfg)
        .args(["--xi0", "2", "--length", "1.0", "--n1", "4", "--n2", "64"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn identities_command_validates_nilpotent_data() {
    let dir = scratch("identities");
    let cfg = write(
        &dir,
        "scen.toml",
        r#"
[surface]
kind = "typeA"
gamma = [0.2, -0.1, 0.3, 0.1, -0.4, 0.2]

[endomorphism]
kind = "nilpotent_spec"
alpha = "1 + x1^2/4"
xi = "x2/3"

[evaluation]
samples = 5
seed = 21
[constants]
"#,
    );
    let out = bin()
        .args(["identities", "--tol", "1e-7"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
}

#[test]
fn normalize_command_reports_small_residual() {
    let dir = scratch("normalize");
    let cfg = write(
        &dir,
        "scen.toml",
        r#"
[surface]
kind = "typeA"
gamma = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0]

[endomorphism]
kind = "nilpotent_spec"
alpha = "exp((x1 + 2*x2)/10)"
xi = "3/10 + x1/10"

[normalize]
n = 40
"#,
    );
    let out = bin().args(["normalize"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(v["results"]["max_residual"].as_f64().unwrap() < 1e-6);
}

#[test]
fn vsi_check_passes_for_nilpotent_and_fails_for_generic() {
    let dir = scratch("vsi");
    let nil = write(
        &dir,
        "nil.toml",
        r#"
[surface]
kind = "typeA"
gamma = [0.1, 0.2, -0.3, 0.1, 0.4, -0.2]

[endomorphism]
kind = "nilpotent_spec"
alpha = "1 + x1^2/5"
xi = "x2/4"

[evaluation]
samples = 3
seed = 5
"#,
    );
    let out = bin().args(["check", "vsi"]).arg(&nil).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let gen = write(
        &dir,
        "gen.toml",
        r#"
[surface]
kind = "typeA"
gamma = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0]

[endomorphism]
kind = "explicit"
t11 = "1"
t22 = "2"

[evaluation]
samples = 3
seed = 5
"#,
    );
    let out = bin().args(["check", "vsi"]).arg(&gen).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn zeros_check_holds_for_the_canonical_form() {
    let dir = scratch("zeros");
    let cfg = write(
        &dir,
        "scen.toml",
        r#"
[surface]
kind = "typeA"
gamma = [0.3, -0.2, 0.1, 0.4, -0.1, 0.2]

[evaluation]
samples = 5
seed = 9
"#,
    );
    let out = bin().args(["check", "zeros"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
}

#[test]
fn conformal_check_finds_the_known_factor() {
    // mirrors the exponential conformally Einstein case: Gamma12^2 and
    // Gamma12^1 constant, factor exp(-G122 x1 + G121 x2)
    let dir = scratch("conformal");
    let cfg = write(
        &dir,
        "scen.toml",
        r#"
[surface]
kind = "typeA"
gamma = [0.0, 0.0, 0.7, 0.4, 0.0, 0.0]

[endomorphism]
kind = "canonical"

[evaluation]
samples = 5
seed = 13
tol = 1e-8

[conformal]
candidates = [["0", "0", "exp(-2*x1/5 + 7*x2/10)"], ["0", "0", "1 + x1^2"]]
"#,
    );
    let out = bin()
        .args(["check", "conformal"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["results"]["best_candidate"], 0);
}
