use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn ils(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ils"))
        .args(args)
        .env_remove("ILS_ORACLE_CAP")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = ils(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(s: &str) -> Value {
    serde_json::from_str(s).expect("valid JSON")
}

fn csv_rows(s: &str) -> Vec<Vec<String>> {
    s.lines().map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

fn column(rows: &[Vec<String>], name: &str) -> Vec<String> {
    let idx = rows[0].iter().position(|h| h == name).expect("column present");
    rows[1..].iter().map(|r| r[idx].clone()).collect()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// `A1 = I₃`, no negative rows, `b1 = (1, 2, 3)`.
fn identity_dir(root: &TempDir) -> std::path::PathBuf {
    let dir = root.path().join("identity");
    fs::create_dir(&dir).unwrap();
    let coo = "%%MatrixMarket matrix coordinate real general\n3 3 3\n1 1 1\n2 2 1\n3 3 1\n";
    fs::write(dir.join("a1.mtx"), coo).unwrap();
    fs::write(
        dir.join("a2.mtx"),
        "%%MatrixMarket matrix coordinate real general\n0 3 0\n",
    )
    .unwrap();
    fs::write(
        dir.join("b1.mtx"),
        "%%MatrixMarket matrix array real general\n3 1\n1\n2\n3\n",
    )
    .unwrap();
    dir
}

#[test]
fn identity_toy_problem() {
    let tmp = TempDir::new().unwrap();
    let dir = identity_dir(&tmp);
    let d = path_str(&dir);

    let exact = json(&ok(&[
        "solve",
        "--problem-dir",
        d,
        "--method",
        "palpha",
        "--alpha",
        "0",
    ]));
    assert_eq!(exact["it"], 1);
    assert!(exact["res"].as_f64().unwrap() <= 1e-12);
    assert!(exact["err"].as_f64().unwrap() <= 1e-12);

    // The operator [[I, I], [I, 0]] has two distinct eigenvalues, so GMRES is exact in two steps.
    let none = json(&ok(&["solve", "--problem-dir", d, "--method", "none"]));
    assert_eq!(none["it"], 2);
    assert_eq!(none["converged"], true);
    assert_eq!(none["system"], "unsym13");
    assert!(none["err"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn solve_report_schema() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("r.json");
    let stdout = ok(&[
        "solve",
        "--tls",
        "40,20,16",
        "--method",
        "bs2",
        "--seed",
        "7",
        "--history",
        "--out",
        path_str(&out),
    ]);
    assert!(stdout.is_empty());
    let r = json(&fs::read_to_string(&out).unwrap());
    for key in ["method", "alpha", "problem", "it", "res", "err", "wall_seconds"] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
    assert_eq!(r["method"], "bs2");
    assert_eq!(r["system"], "spdblock14");
    assert_eq!(r["alpha"], Value::Null);
    assert_eq!(r["seed"], 7);
    assert!(r["res"].as_f64().unwrap() < 1e-8);
    assert!(r["err"].as_f64().unwrap() < 1e-6);
    let it = r["it"].as_u64().unwrap() as usize;
    assert_eq!(r["res_history"].as_array().unwrap().len(), it + 1);
    let setup = r["setup_seconds"].as_f64().unwrap();
    let wall = r["wall_seconds"].as_f64().unwrap();
    assert!((r["total_seconds"].as_f64().unwrap() - setup - wall).abs() <= 1e-9);
}

#[test]
fn tls_palpha_default_alpha() {
    let r = json(&ok(&["solve", "--tls", "256,100,128"]));
    assert_eq!(r["method"], "palpha");
    assert_eq!(r["alpha"], 1e-10);
    assert!(r["it"].as_u64().unwrap() <= 4);
    assert!(r["res"].as_f64().unwrap() < 1e-8);
}

#[test]
fn incompatible_system_exits_2() {
    let out = ils(&["solve", "--tls", "12,6,4", "--method", "but", "--system", "unsym13"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn alpha_above_lambda_min_exits_2() {
    let out = ils(&["solve", "--tls", "12,6,4", "--alpha", "10"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn non_convergence_exits_3_with_report() {
    let out = ils(&["solve", "--tls", "40,20,16", "--method", "none", "--maxit", "2"]);
    assert_eq!(out.status.code(), Some(3));
    let r = json(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(r["converged"], false);
    assert_eq!(r["it"], 2);
}

#[test]
fn generate_is_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let (g1, g2) = (tmp.path().join("g1"), tmp.path().join("g2"));
    for g in [&g1, &g2] {
        ok(&["generate", "--tls", "12,6,4", "--seed", "1", "--out", path_str(g)]);
    }
    for f in ["a1.mtx", "a2.mtx", "b1.mtx", "b2.mtx", "manifest.json"] {
        assert_eq!(fs::read(g1.join(f)).unwrap(), fs::read(g2.join(f)).unwrap(), "{f}");
    }
    let m = json(&fs::read_to_string(g1.join("manifest.json")).unwrap());
    assert_eq!(m["seed"], 1);
    assert_eq!(m["params"]["kind"], "tls");
    assert_eq!(m["s_spd"], true);
    let lmin = m["lambda_min"].as_f64().unwrap();
    assert_eq!(m["alpha_max"].as_f64().unwrap(), lmin / 2.0);

    // the written files reproduce the in-memory instance
    let direct = json(&ok(&["solve", "--tls", "12,6,4", "--seed", "1"]));
    let loaded = json(&ok(&["solve", "--problem-dir", path_str(&g1), "--alpha", "1e-10"]));
    assert_eq!(direct["it"], loaded["it"]);
    let (a, b) = (direct["res"].as_f64().unwrap(), loaded["res"].as_f64().unwrap());
    assert!((a - b).abs() <= 1e-12, "{a} vs {b}");

    let other = tmp.path().join("g3");
    ok(&["generate", "--tls", "12,6,4", "--seed", "2", "--out", path_str(&other)]);
    assert_ne!(
        fs::read(g1.join("b1.mtx")).unwrap(),
        fs::read(other.join("b1.mtx")).unwrap()
    );
}

fn write_a1(path: &Path, p: usize, n: usize, scale: f64) {
    let mut s = format!("%%MatrixMarket matrix coordinate real general\n{p} {n} {}\n", p);
    for i in 0..p {
        let v = scale * if i < n { 2.0 + i as f64 } else { 1.0 };
        s.push_str(&format!("{} {} {v}\n", i + 1, i % n + 1));
    }
    fs::write(path, s).unwrap();
}

#[test]
fn sparse_source_without_negative_rows() {
    let tmp = TempDir::new().unwrap();
    let a1 = tmp.path().join("small.mtx");
    write_a1(&a1, 8, 5, 1.0);
    let dir = tmp.path().join("ls");
    ok(&["generate", "--mtx", path_str(&a1), "--q", "0", "--out", path_str(&dir)]);
    let a2 = fs::read_to_string(dir.join("a2.mtx")).unwrap();
    assert!(a2.lines().nth(1).unwrap().trim() == "0 5 0", "{a2}");
    let m = json(&fs::read_to_string(dir.join("manifest.json")).unwrap());
    assert_eq!(m["params"]["kind"], "sparse");
    assert_eq!(m["params"]["q"], 0);
    assert_eq!(m["params"]["source"], "small.mtx");

    let r = json(&ok(&["solve", "--problem-dir", path_str(&dir)]));
    assert_eq!(r["converged"], true);
    assert!(r["err"].as_f64().unwrap() <= 1e-8);

    // the default q is ceil(p/4)
    let r = json(&ok(&["solve", "--mtx", path_str(&a1)]));
    assert_eq!(r["problem"], "mtx:small,q=2");
}

#[test]
fn generate_rejects_indefinite_s() {
    let tmp = TempDir::new().unwrap();
    let a1 = tmp.path().join("weak.mtx");
    // σ_min(A1) = 0.2 < 0.3, so S = A1ᵀA1 − 0.09·I is indefinite
    write_a1(&a1, 5, 5, 0.1);
    let out = ils(&[
        "generate",
        "--mtx",
        path_str(&a1),
        "--q",
        "5",
        "--out",
        path_str(&tmp.path().join("g")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!tmp.path().join("g").exists());
}

#[test]
fn bench_empty_method_list() {
    let out = ok(&["bench", "--tls", "12,6,4", "--methods", ""]);
    assert_eq!(out.lines().count(), 1);
    assert!(out.starts_with("problem,method,system,alpha,it,res,err"));
}

#[test]
fn bench_rows_and_determinism() {
    let args = [
        "bench", "--tls", "40,20,16", "--tls", "48,24,20", "--seed", "3", "--system", "both",
    ];
    let first = csv_rows(&ok(&args));
    let second = csv_rows(&ok(&args));
    // none runs on both systems: 5 rows per problem
    assert_eq!(first.len(), 1 + 2 * 5);
    assert_eq!(column(&first, "it"), column(&second, "it"));
    assert_eq!(column(&first, "res"), column(&second, "res"));
    assert!(column(&first, "status").iter().all(|s| s == "ok"));
    let methods = column(&first, "method");
    assert_eq!(&methods[..5], ["none", "none", "bs2", "but", "palpha"]);
    let systems = column(&first, "system");
    assert_eq!(
        &systems[..5],
        ["unsym13", "spdblock14", "spdblock14", "spdblock14", "unsym13"]
    );
}

#[test]
fn bench_records_failures_and_continues() {
    let rows = csv_rows(&ok(&[
        "bench",
        "--tls",
        "12,6,4",
        "--methods",
        "bogus,palpha",
        "--alpha",
        "1e3",
    ]));
    let status = column(&rows, "status");
    assert_eq!(status.len(), 2);
    assert!(status[0].starts_with("error"), "{status:?}");
    assert!(status[1].starts_with("error"), "{status:?}");

    let rows = csv_rows(&ok(&["bench", "--tls", "12,6,4", "--methods", "bogus,bs1"]));
    let status = column(&rows, "status");
    assert!(status[0].starts_with("error"));
    assert_eq!(status[1], "ok");
}

#[test]
fn sweep_alpha_zero_is_exact() {
    let rows = csv_rows(&ok(&["sweep-alpha", "--tls", "40,20,16", "--alphas", "0"]));
    assert_eq!(column(&rows, "it"), ["1"]);
    assert_eq!(column(&rows, "status"), ["ok"]);
    assert_eq!(column(&rows, "rho")[0].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn sweep_flags_points_beyond_lambda_min() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("g");
    ok(&["generate", "--tls", "12,6,4", "--out", path_str(&dir)]);
    let m = json(&fs::read_to_string(dir.join("manifest.json")).unwrap());
    let lmin = m["lambda_min"].as_f64().unwrap();
    let grid = format!("1e-8,{},{}", 0.75 * lmin, 2.0 * lmin);
    let rows = csv_rows(&ok(&[
        "sweep-alpha",
        "--problem-dir",
        path_str(&dir),
        "--alphas",
        &grid,
    ]));
    assert_eq!(column(&rows, "flag"), ["", "above_alpha_max", "above_lambda_min"]);
    let status = column(&rows, "status");
    assert_eq!(&status[..2], ["ok", "ok"]);
    assert!(status[2].starts_with("error"));
    let rho: Vec<f64> = column(&rows, "rho").iter().map(|r| r.parse().unwrap()).collect();
    assert!(rho[0] < 1.0 && rho[1] > 1.0);
    let it: Vec<usize> = column(&rows, "it")[..2].iter().map(|r| r.parse().unwrap()).collect();
    assert!(it[0] <= it[1]);
}

fn spectrum_points(rows: &[Vec<String>], method: &str) -> Vec<(f64, f64)> {
    rows[1..]
        .iter()
        .filter(|r| r[2] == method)
        .map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap()))
        .collect()
}

#[test]
fn spectrum_small_instance() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("g");
    ok(&["generate", "--tls", "24,10,8", "--out", path_str(&dir)]);
    let lmin = json(&fs::read_to_string(dir.join("manifest.json")).unwrap())["lambda_min"]
        .as_f64()
        .unwrap();
    let alpha = (1e-2 * lmin).to_string();
    let rows = csv_rows(&ok(&["spectrum", "--problem-dir", path_str(&dir), "--alpha", &alpha]));
    assert_eq!(rows[0], ["re", "im", "method", "alpha"]);
    let dim = 24 + 10 + 8;
    for method in ["palpha", "A", "Ahat", "bs2", "but", "palpha-dense"] {
        assert_eq!(spectrum_points(&rows, method).len(), dim, "{method}");
    }
    let sorted = |m: &str| {
        let mut v: Vec<f64> = spectrum_points(&rows, m).iter().map(|z| z.0).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    for (a, b) in sorted("palpha").iter().zip(&sorted("palpha-dense")) {
        assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
    }
    assert!(spectrum_points(&rows, "palpha-dense").iter().all(|z| z.1.abs() <= 1e-8));
}

#[test]
fn spectrum_at_alpha_zero_is_one() {
    let rows = csv_rows(&ok(&["spectrum", "--tls", "12,6,4", "--alpha", "0"]));
    let pts = spectrum_points(&rows, "palpha");
    assert_eq!(pts.len(), 22);
    assert!(pts.iter().all(|&z| z == (1.0, 0.0)));
}

#[test]
fn spectrum_respects_oracle_cap() {
    let out = Command::new(env!("CARGO_BIN_EXE_ils"))
        .args(["spectrum", "--tls", "12,6,4"])
        .env("ILS_ORACLE_CAP", "10")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("oracle cap"));
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(rows.len(), 1 + 22);
    assert!(rows[1..].iter().all(|r| r[2] == "palpha"));
}
