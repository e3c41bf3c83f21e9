use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_deadcore");

fn schema(name: &str) -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(name);
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn check(doc: &Value, schema_name: &str) {
    let s = schema(schema_name);
    if let Err(e) = jsonschema::validate(&s, doc) {
        panic!("{schema_name}: {e} at {}\n{doc:#}", e.instance_path);
    }
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

struct Run {
    dir: PathBuf,
    out: Output,
}

impl Run {
    fn code(&self) -> i32 {
        self.out.status.code().unwrap()
    }
    fn report(&self) -> Value {
        read_json(&self.dir.join("report.json"))
    }
    fn manifest(&self) -> Value {
        read_json(&self.dir.join("manifest.json"))
    }
    fn stderr_json(&self) -> Value {
        serde_json::from_slice(&self.out.stderr).unwrap()
    }
}

fn deadcore(sub: &str, config: &str, sets: &[&str], threads: Option<&str>) -> (tempfile::TempDir, Run) {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, config).unwrap();
    let dir = tmp.path().join("out");
    let mut cmd = Command::new(BIN);
    cmd.arg(sub).arg("--config").arg(&cfg);
    cmd.arg("--set").arg(format!("output.dir={:?}", dir.to_str().unwrap()));
    for s in sets {
        cmd.arg("--set").arg(s);
    }
    match threads {
        Some(t) => cmd.env("DEADCORE_THREADS", t),
        None => cmd.env_remove("DEADCORE_THREADS"),
    };
    let out = cmd.output().unwrap();
    (tmp, Run { dir, out })
}

const SOLVE_1D: &str = "\
[problem]
nodes = 257
p = 0.5
q = 0.5

[boundary]
kind = \"radial\"
rho = 0.3
";

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    v.sort();
    v
}

#[test]
fn solve_recovers_exact_pair() {
    let (_t, r) = deadcore("solve", SOLVE_1D, &[], None);
    assert_eq!(r.code(), 0, "{}", String::from_utf8_lossy(&r.out.stderr));
    assert_eq!(
        files(&r.dir),
        ["history.csv", "manifest.json", "regions.csv", "report.json", "u.csv", "v.csv"]
    );
    let rep = r.report();
    check(&rep, "solve-report.schema.json");
    check(&r.manifest(), "manifest.schema.json");
    assert_eq!(rep["converged"], true);
    let h: f64 = 2.0 / 256.0;
    let err = rep["oracle"]["linf_error_u"].as_f64().unwrap();
    assert!(err <= 10.0 * h * h, "{err}");
    assert_eq!(rep["oracle"]["exact"], true);
    let stdout: Value = serde_json::from_slice(&r.out.stdout).unwrap();
    assert_eq!(stdout, rep);

    let u = fs::read_to_string(r.dir.join("u.csv")).unwrap();
    assert_eq!(u.lines().count(), 258);
    assert!(u.starts_with("x,value\n"));
    let regions = fs::read_to_string(r.dir.join("regions.csv")).unwrap();
    assert!(regions.starts_with("x,magnitude,label\n"));
    assert!(regions.contains(",fb\n"));
    let hist = fs::read_to_string(r.dir.join("history.csv")).unwrap();
    assert!(hist.starts_with("iter,du,dv,res_u,res_v\n"));
}

#[test]
fn csv_values_round_trip() {
    let (_t, r) = deadcore("radial", SOLVE_1D, &[], None);
    assert_eq!(r.code(), 0);
    let rep = r.report();
    let a = rep["A"].as_f64().unwrap();
    let u = fs::read_to_string(r.dir.join("u.csv")).unwrap();
    // u(1) = A with ρ = 0, printed with 17 significant digits.
    let last: f64 = u.lines().last().unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(last, a);
}

#[test]
fn max_outer_one_exits_two() {
    let (_t, r) = deadcore("solve", SOLVE_1D, &["solver.max_outer=1"], None);
    assert_eq!(r.code(), 2);
    let rep = r.report();
    check(&rep, "solve-report.schema.json");
    check(&r.manifest(), "manifest.schema.json");
    assert_eq!(rep["converged"], false);
    assert_eq!(rep["solve"]["iterations"], 1);
    assert_eq!(r.manifest()["exit_code"], 2);
}

#[test]
fn runs_are_bitwise_deterministic() {
    let (_a, r1) = deadcore("solve", SOLVE_1D, &["seed=3"], Some("1"));
    let (_b, r2) = deadcore("solve", SOLVE_1D, &["seed=3"], Some("4"));
    assert_eq!((r1.code(), r2.code()), (0, 0));
    for f in ["report.json", "u.csv", "v.csv", "regions.csv", "history.csv"] {
        assert_eq!(
            fs::read(r1.dir.join(f)).unwrap(),
            fs::read(r2.dir.join(f)).unwrap(),
            "{f} differs"
        );
    }
    let strip = |mut m: Value| {
        let o = m.as_object_mut().unwrap();
        o.remove("wall_time_s");
        o.remove("threads");
        o["config"]["output"].take();
        m
    };
    assert_eq!(r1.manifest()["threads"], 1);
    assert_eq!(r2.manifest()["threads"], 4);
    assert_eq!(strip(r1.manifest()), strip(r2.manifest()));
}

#[test]
fn seeded_radial_reports_repeat() {
    let (_a, r1) = deadcore("radial", SOLVE_1D, &["seed=11", "radial.samples=200"], None);
    let (_b, r2) = deadcore("radial", SOLVE_1D, &["seed=11", "radial.samples=200"], None);
    assert_eq!(fs::read(r1.dir.join("report.json")).unwrap(), fs::read(r2.dir.join("report.json")).unwrap());
    let rep = r1.report();
    check(&rep, "radial-report.schema.json");
    assert!(rep["identity_check"]["worst_relative_defect"].as_f64().unwrap() < 1e-12);
    assert_eq!(rep["alpha"], 4.0);
    assert!((rep["A"].as_f64().unwrap() - 1.0 / 144.0).abs() < 1e-16);
}

#[test]
fn config_errors_are_machine_readable() {
    let cases: [(&str, &[&str], &str, &str); 4] = [
        (SOLVE_1D, &["problem.q=4"], "ConstraintViolation", "problem.q"),
        (SOLVE_1D, &["problem.colour=4"], "UnknownKey", "problem.colour"),
        ("[problem]\np = 0.5\nq = 0.5\n", &[], "MissingKey", "problem.nodes"),
        (
            SOLVE_1D,
            &["operators.f.kind=pucci_minus", "operators.f.lambda=2", "operators.f.big_lambda=1"],
            "ConstraintViolation",
            "operators.f.lambda",
        ),
    ];
    for (text, sets, code, key) in cases {
        let (_t, r) = deadcore("solve", text, sets, None);
        assert_eq!(r.code(), 1);
        let e = r.stderr_json();
        check(&e, "error.schema.json");
        assert_eq!(e["code"], code, "{e}");
        assert_eq!(e["key"], key, "{e}");
        assert!(!r.dir.exists());
    }
    let (_t, r) = deadcore("solve", SOLVE_1D, &[], Some("zero"));
    assert_eq!(r.code(), 1);
    assert_eq!(r.stderr_json()["code"], "Threads");
}

#[test]
fn lab_failures_write_error_json() {
    // A grid without a dead core has no free boundary to measure.
    let cfg = "[problem]\nnodes = 65\np = 0.5\nq = 0.5\n\n[boundary]\nkind = \"constant\"\nu = 1.0\nv = 1.0\n";
    let (_t, r) = deadcore("measure", cfg, &[], None);
    assert_eq!(r.code(), 1);
    let e = read_json(&r.dir.join("error.json"));
    check(&e, "error.schema.json");
    assert_eq!(e, r.stderr_json());

    let (_t, r) = deadcore("flatten", SOLVE_1D, &["solver.max_outer=1"], None);
    assert_eq!(r.code(), 2);
    assert_eq!(read_json(&r.dir.join("error.json"))["code"], "NotConverged");
}

#[test]
fn fit_exponent_matches_growth_rate() {
    let (_t, r) = deadcore("fit-exponent", SOLVE_1D, &["problem.nodes=513"], None);
    assert_eq!(r.code(), 0, "{}", String::from_utf8_lossy(&r.out.stderr));
    let rep = r.report();
    check(&rep, "fit-exponent-report.schema.json");
    let fit = &rep["fit"];
    assert!(fit["relative_error"].as_f64().unwrap() < 0.05, "{fit}");
    assert!(fit["ratio"].as_f64().unwrap() <= 2.0);
    let growth = fs::read_to_string(r.dir.join("growth.csv")).unwrap();
    assert_eq!(growth.lines().count(), 13);
}

#[test]
fn measure_reports_density_and_dimension() {
    let cfg = "[problem]\ndim = 2\nnodes = 65\np = 0.5\nq = 0.5\n\n[boundary]\nkind = \"radial\"\nrho = 0.4\n";
    let (_t, r) = deadcore("measure", cfg, &[], None);
    assert_eq!(r.code(), 0, "{}", String::from_utf8_lossy(&r.out.stderr));
    let rep = r.report();
    check(&rep, "measure-report.schema.json");
    assert!(rep["measure"]["density_min"].as_f64().unwrap() >= 0.05);
    for f in ["density.csv", "porosity.csv", "boxes.csv", "regions.csv"] {
        assert!(r.dir.join(f).exists(), "{f}");
    }
}

#[test]
fn compare_barrier_against_solution() {
    let (_t, r) = deadcore(
        "compare",
        SOLVE_1D,
        &["operators.f.kind=pucci_minus", "operators.f.big_lambda=2", "operators.g.kind=pucci_minus", "operators.g.big_lambda=2"],
        None,
    );
    assert_eq!(r.code(), 0, "{}", String::from_utf8_lossy(&r.out.stderr));
    let rep = r.report();
    check(&rep, "compare-report.schema.json");
    assert_eq!(rep["compare"]["comparison"]["passed"], true);
}

#[test]
fn flatten_and_liouville_tables() {
    let (_t, r) = deadcore("flatten", SOLVE_1D, &["problem.nodes=129"], None);
    assert_eq!(r.code(), 0, "{}", String::from_utf8_lossy(&r.out.stderr));
    let rep = r.report();
    check(&rep, "flatten-report.schema.json");
    assert_eq!(rep["flatten"]["nonincreasing"], true);
    assert_eq!(rep["flatten"]["rows"].as_array().unwrap().len(), 4);

    let (_t, r) = deadcore("liouville", SOLVE_1D, &["problem.nodes=129", "liouville.radii=[1.0, 2.0, 4.0]"], None);
    assert_eq!(r.code(), 0, "{}", String::from_utf8_lossy(&r.out.stderr));
    let rep = r.report();
    check(&rep, "liouville-report.schema.json");
    assert_eq!(rep["liouville"]["verdict"], "consistent-with-liouville");
    assert_eq!(rep["family"]["kind"], "threshold");
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for e in fs::read_dir(dir).unwrap() {
        let path = e.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        deadcore_cli::parse_config(&text, deadcore_cli::Experiment::Solve, &[])
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert!(n >= 7);
}
