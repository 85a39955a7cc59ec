use std::path::Path;
use std::process::{Command, Output};

use levy_merton::cli::parse_surface_csv;
use levy_merton::oracle::merton_closed_form;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levy-merton"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let idx = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').nth(idx).unwrap().parse().unwrap())
        .collect()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

const SMALL_GRID: [&str; 4] = ["--set", "grid.time_steps=1000", "--set", "grid.y_steps=50"];

#[test]
fn solve_writes_unit_terminal_slice_and_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let mut args = vec!["solve", "--preset", "bns-example", "--out", dir.path().to_str().unwrap()];
        args.extend(SMALL_GRID);
        let o = run(&args);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for name in ["surface.csv", "consumption.csv", "figure1.svg"] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name} differs between runs");
    }
    let consumption = read(a.path(), "consumption.csv");
    let t = column(&consumption, "t");
    let c = column(&consumption, "c_over_x");
    let last = t.iter().cloned().fold(f64::MIN, f64::max);
    let terminal: Vec<f64> = t.iter().zip(&c).filter(|(t, _)| **t == last).map(|(_, c)| *c).collect();
    assert_eq!(terminal.len(), 50);
    assert!(terminal.iter().all(|&v| v == 1.0));
}

#[test]
fn merton_solve_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["solve", "--preset", "merton-constant", "--out", dir.path().to_str().unwrap()];
    args.extend(["--set", "grid.time_steps=2000", "--set", "grid.y_steps=200"]);
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let surface = parse_surface_csv(&read(dir.path(), "surface.csv"), 0.0).unwrap();
    let l = *surface.lattice();
    for i in 0..=l.t_steps {
        let exact = merton_closed_form(0.04, 0.5, 1.0, l.t(i));
        for &v in surface.row(i) {
            assert!(((v - exact) / exact).abs() < 1e-4);
        }
    }
}

#[test]
fn verify_rejects_a_halved_surface() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut args = vec!["solve", "--preset", "bns-example", "--out", out];
    args.extend(SMALL_GRID);
    assert!(run(&args).status.success());
    let text = read(dir.path(), "surface.csv");
    let mut broken = String::new();
    for (n, line) in text.lines().enumerate() {
        if n == 0 {
            broken.push_str(line);
        } else {
            let mut cells: Vec<String> = line.split(',').map(str::to_string).collect();
            let f: f64 = cells[2].parse().unwrap();
            cells[2] = format!("{:.16e}", 0.5 * f);
            broken.push_str(&cells.join(","));
        }
        broken.push('\n');
    }
    let path = dir.path().join("broken.csv");
    std::fs::write(&path, broken).unwrap();
    let mut args = vec!["verify", "--preset", "bns-example", "--out", out, "--surface", path.to_str().unwrap()];
    args.extend(SMALL_GRID);
    args.extend(["--set", "mc.n_paths=200", "--set", "contraction.pairs=1", "--set", "contraction.n_paths=200"]);
    args.extend(["--set", "jensen.n_paths=200"]);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
    assert!(stdout(&o).contains("FAIL bounds"));
    assert!(stderr(&o).contains("FAILED: bounds"));
    assert!(read(dir.path(), "verify.csv").starts_with("check,statistic,threshold,passed,detail"));
}

#[test]
fn log_utility_consumes_one_over_remaining_time_plus_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "simulate",
        "--preset",
        "bns-example",
        "--utility",
        "log",
        "--seed",
        "11",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = read(dir.path(), "path.csv");
    for (t, r) in column(&csv, "t").iter().zip(column(&csv, "c_over_X")) {
        let exact: f64 = 1.0 / (2.0 - t);
        assert_eq!(format!("{r:.16e}"), format!("{exact:.16e}"));
    }
}

#[test]
fn constant_market_without_jumps_matches_the_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "simulate",
        "--preset",
        "merton-constant",
        "--compare-constant-vol",
        "--set",
        "grid.time_steps=100000",
        "--set",
        "grid.y_steps=20",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let a = column(&read(dir.path(), "path.csv"), "c_over_X");
    let b = column(&read(dir.path(), "constant_vol.csv"), "c_over_X");
    assert_eq!(a.len(), b.len());
    let worst = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(worst <= 1e-6, "curves differ by {worst}");
    assert!(dir.path().join("figure2.svg").exists());
}

#[test]
fn precondition_failures_name_their_keys() {
    let o = run(&[
        "constants",
        "--preset",
        "bns-example",
        "--set",
        "market.gamma=1.5",
        "--set",
        "grid.time_steps=10",
        "--set",
        "mc.n_paths=5",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("market.gamma"), "{err}");
    assert!(err.lines().all(|l| l.starts_with("error: ")), "{err}");

    let o = run(&["solve", "--preset", "bns-example", "--set", "grid.time_steps=10"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("grid.time_steps"), "{}", stderr(&o));

    let o = run(&["solve", "--preset", "bns-example", "--set", "no.such_key=1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no.such_key"));

    let o = run(&["solve"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("market.preset"));
}

#[test]
fn laplace_gate_fails_for_slow_jump_decay() {
    let o = run(&["laplace", "--preset", "bns-example"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("w,psi\n"));
    let o = run(&["laplace", "--preset", "bns-example", "--set", "subordinator.jump_rate=1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(format!("{}{}", stdout(&o), stderr(&o)).contains("subordinator.jump_rate"));
}

#[test]
fn config_file_and_overrides_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# test run\nmarket.preset = \"bns-example\"\nou.y0 = 0.3  # start higher\n").unwrap();
    let o = run(&["constants", "--config", cfg.to_str().unwrap(), "--set", "ou.lambda=0.2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("= "), "{text}");
}
