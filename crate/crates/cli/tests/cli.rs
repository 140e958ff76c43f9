use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdfm-hdg")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout_value(o: &Output, key: &str) -> Option<String> {
    String::from_utf8_lossy(&o.stdout)
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")).map(str::to_string))
}

fn scenario_file(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL: &str = r#"
name = "small"
degree = 1
matrix_permeability = 1.0
source = 0.0
outputs = ["line_cuts", "diagnostics", "conservation"]

[domain]
x0 = 0.0
y0 = 0.0
x1 = 1.0
y1 = 1.0

[boundary]
left = { dirichlet = 0.0 }
right = { dirichlet = 0.0 }
bottom = { dirichlet = 0.0 }
top = { dirichlet = 0.0 }

[mesh]
nx = 6
ny = 6
refine_steps = 1

[[fractures]]
a = [0.25, 0.5]
b = [0.75, 0.5]
thickness = 1e-3
permeability = 1e3
kind = "conductive"

[[line_cuts]]
a = [0.0, 0.3]
b = [1.0, 0.3]
n = 11
"#;

#[test]
fn builtin_run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["run", "--builtin", "example1a", "--refine-steps", "1", "--out", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("example1a_linecut_0.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "s,x,y,p_star");
    assert_eq!(lines.len(), 201);
    let vtk = fs::read_to_string(dir.path().join("example1a_fields.vtk")).unwrap();
    assert!(vtk.starts_with("# vtk DataFile Version 3.0\n"));
    for field in ["p_star", "class", "u_mag"] {
        assert!(vtk.contains(&format!("SCALARS {field} ")), "{field}");
    }
    let diag = fs::read_to_string(dir.path().join("example1a_diagnostics.txt")).unwrap();
    let conservation: f64 = diag
        .lines()
        .find_map(|l| l.strip_prefix("max_conservation_residual: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(conservation < 1e-9);
    assert_eq!(stdout_value(&o, "spd_verified").as_deref(), Some("true"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = run(&["run", "--builtin", "example1b", "--refine-steps", "2", "--out", d.path().to_str().unwrap()]);
        assert_eq!(code(&o), 0);
    }
    for f in ["example1b_linecut_0.csv", "example1b_fields.vtk"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn scenario_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario_file(dir.path(), "small.toml", SMALL);
    let out = dir.path().join("out");
    let o = run(&[
        "run",
        "--scenario",
        &path,
        "--degree",
        "2",
        "--nx",
        "5",
        "--ny",
        "4",
        "--penalties",
        "1,0,2,2",
        "--tol",
        "1e-11",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout_value(&o, "degree").as_deref(), Some("2"));
    // zero data with fractures present: the solution vanishes
    let norm: f64 = stdout_value(&o, "solution_norm").unwrap().parse().unwrap();
    assert!(norm < 1e-10, "{norm}");
    assert_eq!(fs::read_to_string(out.join("small_linecut_0.csv")).unwrap().lines().count(), 12);
    assert!(out.join("small_conservation.csv").exists());
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let missing_side = SMALL.replace("top = { dirichlet = 0.0 }\n", "");
    let bad_side = scenario_file(dir.path(), "bad.toml", &missing_side);
    let garbage = scenario_file(dir.path(), "garbage.toml", "degree = [");
    let cases: Vec<Vec<&str>> = vec![
        vec!["run", "--out", out],
        vec!["run", "--builtin", "example9", "--out", out],
        vec!["run", "--builtin", "example1a", "--degree", "3", "--out", out],
        vec!["run", "--builtin", "example1a", "--penalties", "1,0,1", "--out", out],
        vec!["run", "--builtin", "example1a", "--penalties", "1,0,-1,3", "--out", out],
        vec!["run", "--builtin", "example1a", "--tol", "0", "--out", out],
        vec!["run", "--builtin", "example1a", "--nx", "0", "--out", out],
        vec!["run", "--scenario", "/nonexistent/file.toml", "--out", out],
        vec!["run", "--scenario", &bad_side, "--out", out],
        vec!["run", "--scenario", &garbage, "--out", out],
    ];
    for args in cases {
        let o = run(&args);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = run(&["run", "--scenario", &bad_side, "--out", out]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("top"));
}

#[test]
fn singular_system_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL
        .replace("{ dirichlet = 0.0 }", "{ neumann = 0.0 }")
        .replace("source = 0.0", "source = 0.0\nallow_pure_neumann = true");
    let path = scenario_file(dir.path(), "neumann.toml", &text);
    let o = run(&["run", "--scenario", &path, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("scenario 'small'"));
}

#[test]
fn convergence_mode_prints_orders() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["run", "--convergence", "--degree", "0", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8_lossy(&o.stdout);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,h,dofs,err_p,err_u,err_p_star,order_p,order_u,order_p_star");
    assert_eq!(lines.len(), 5);
    let order_u: f64 = lines[4].split(',').nth(7).unwrap().parse().unwrap();
    assert!(order_u > 0.8, "{order_u}");
    assert_eq!(fs::read_to_string(dir.path().join("convergence_k0.csv")).unwrap(), text);
}
