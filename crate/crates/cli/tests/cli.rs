use std::ffi::{OsStr, OsString};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn problem(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../problems").join(format!("{name}.json"))
}

fn mflq<S: AsRef<OsStr>>(args: &[S]) -> Output {
    mflq_env(args, &[])
}

fn mflq_env<S: AsRef<OsStr>>(args: &[S], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mflq"));
    cmd.args(args).env_remove("MFLQ_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn csv_rows(p: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(p).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    (header, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

#[test]
fn validate_reports_hypotheses() {
    let o = mflq(&["validate", problem("classical").to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("H2: pass"), "{}", stdout(&o));
    let o = mflq(&["validate", problem("classical").to_str().unwrap(), "--set", "weights.R=[[-1]]"]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("H2: fail"));
}

#[test]
fn closed_loop_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cl");
    let o = mflq(&["closed-loop", problem("ex12").to_str().unwrap(), "--tol", "1e-4", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["theta_hat.csv", "gamma_diag.csv", "trace.json", "meta.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let (header, rows) = csv_rows(&out.join("theta_hat.csv"));
    assert_eq!(header, ["s", "theta_hat_0_0"]);
    // 17 significant digits in scientific notation
    for cell in rows.iter().flatten() {
        let mantissa = cell.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
        assert_eq!(mantissa.len(), 17, "{cell}");
        assert!(cell.parse::<f64>().is_ok());
    }
    let (header, _) = csv_rows(&out.join("gamma_diag.csv"));
    assert_eq!(header, ["t", "gamma_0_0", "gamma_hat_0_0"]);
    let meta = read_json(&out.join("meta.json"));
    assert_eq!(meta["problem_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(meta["tol"], 1e-4);
    assert!(!read_json(&out.join("trace.json")).as_array().unwrap().is_empty());
}

#[test]
fn artifacts_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let p = problem("meanfield");
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let o = mflq_env(
            &["simulate", p.to_str().unwrap(), "--policy", "precommit", "--paths", "2000", "--steps", "50", "--seed", "7", "--out", out.to_str().unwrap()],
            &[("MFLQ_THREADS", threads)],
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        (std::fs::read(out.join("mean.csv")).unwrap(), read_json(&out.join("cost.json")))
    };
    let (a, ca) = run("a", "1");
    let (b, cb) = run("b", "3");
    assert_eq!(a, b);
    assert_eq!(ca, cb);
    let solve = |name: &str| {
        let out = dir.path().join(name);
        let o = mflq(&["game", p.to_str().unwrap(), "--N", "3", "--h", "0.01", "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
        std::fs::read(out.join("gains.csv")).unwrap()
    };
    assert_eq!(solve("g1"), solve("g2"));
}

#[test]
fn overrides_change_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    let hash = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args: Vec<OsString> = vec!["precommit".into(), problem("ex12").into(), "--out".into(), out.into()];
        args.extend(extra.iter().map(OsString::from));
        let o = mflq(&args);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let out = dir.path().join(name);
        (read_json(&out.join("meta.json"))["problem_sha256"].clone(), read_json(&out.join("summary.json"))["value"].as_f64().unwrap())
    };
    let (h0, v0) = hash("plain", &[]);
    let (h1, v1) = hash("same", &["--set", "weights.Gbar=[[1.0]]"]);
    let (h2, v2) = hash("heavier", &["--set", "weights.Gbar=[[2]]"]);
    assert_eq!(h0, h1);
    assert_eq!(v0, v1);
    assert_ne!(h0, h2);
    assert!(v2 > v0);
    // ex12 pre-commitment value at t = 0, x = 1
    assert!((v0 - 0.5).abs() < 1e-6, "{v0}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let o = out.to_str().unwrap();
    assert_eq!(code(&mflq(&["validate", dir.path().join("none.json").to_str().unwrap()])), 2);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"n\": 1,").unwrap();
    assert_eq!(code(&mflq(&["validate", bad.to_str().unwrap()])), 2);
    assert_eq!(code(&mflq(&["frobnicate"])), 2);
    let ex12 = problem("ex12");
    let ex12 = ex12.to_str().unwrap();
    assert_eq!(code(&mflq(&["precommit", ex12, "--set", "weights.G=[[1,2]]", "--out", o])), 2);
    assert_eq!(code(&mflq(&["precommit", ex12, "--x0", "1,2", "--out", o])), 2);
    assert_eq!(code(&mflq_env(&["validate", ex12], &[("MFLQ_THREADS", "zero")])), 2);
    // P overflows before reaching t = 0
    let blow = ["--set", "coefficients.A=[[300]]", "--set", "coefficients.B=[[0]]", "--set", "T=10", "--set", "weights.G=[[1]]"];
    let mut args = vec!["precommit", ex12, "--h", "0.01", "--out", o];
    args.extend_from_slice(&blow);
    assert_eq!(code(&mflq(&args)), 3);
    // one doubling cannot reach this tolerance
    let o2 = dir.path().join("stall");
    let r = mflq(&["closed-loop", problem("meanfield").to_str().unwrap(), "--tol", "1e-12", "--max-doublings", "1", "--out", o2.to_str().unwrap()]);
    assert_eq!(code(&r), 4);
    assert_eq!(read_json(&o2.join("trace.json")).as_array().unwrap().len(), 1);
}

#[test]
fn converge_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    let o = mflq(&["converge", problem("classical").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let (header, rows) = csv_rows(&out.join("converge.csv"));
    assert_eq!(header, ["N", "sup_delta_gamma", "sup_delta_gamma_hat", "sup_delta_theta_hat"]);
    assert_eq!(rows.len(), 4);
    for r in &rows {
        for v in &r[1..] {
            assert!(v.parse::<f64>().unwrap() <= 1e-8);
        }
    }
    assert_eq!(read_json(&out.join("converge.json"))["monotone"], true);

    // zero weights: everything vanishes
    let out = dir.path().join("z");
    let o = mflq(&["converge", problem("ex12").to_str().unwrap(), "--set", "weights.Gbar=[[0]]", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let (_, rows) = csv_rows(&out.join("converge.csv"));
    assert!(rows.iter().all(|r| r[1..].iter().all(|v| v.parse::<f64>().unwrap() == 0.0)));

    // stalls: partial table and exit 4
    let out = dir.path().join("s");
    let o = mflq(&["converge", problem("meanfield").to_str().unwrap(), "--tol", "1e-9", "--max-doublings", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 4);
    let (_, rows) = csv_rows(&out.join("converge.csv"));
    assert_eq!(rows.len(), 2);
}

#[test]
fn paths_dump_has_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p");
    let o = mflq(&[
        "simulate",
        problem("classical").to_str().unwrap(),
        "--policy",
        "open-loop",
        "--paths",
        "10",
        "--steps",
        "20",
        "--x0=-1,0.5",
        "--dump-paths",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let bytes = std::fs::read(out.join("paths.bin")).unwrap();
    assert_eq!(&bytes[..4], b"MFLQ");
    let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    assert_eq!((u16_at(4), u16_at(6), u32_at(8), u32_at(12)), (1, 2, 10, 21));
    assert_eq!(bytes.len(), 16 + 8 * 2 * 10 * 21);
    let first = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
    assert_eq!(first, -1.0);
}

#[test]
fn verify_checks_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v");
    let o = mflq(&["verify", problem("classical").to_str().unwrap(), "--check", "residual", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert_eq!(read_json(&out.join("verify.json"))["passes"], true);
    let o = mflq(&[
        "verify",
        problem("ex12").to_str().unwrap(),
        "--check",
        "game",
        "--N",
        "2",
        "--paths",
        "4000",
        "--steps",
        "40",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("player 1: pass"));
}

#[test]
fn semigroup_demo_prints_both_sides() {
    let o = mflq(&["demo", "semigroup", "--t", "0", "--tau", "0.5", "--s", "1", "--paths", "20000", "--steps", "100"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(s.contains("simulated") && s.contains("closed form"), "{s}");
    let o = mflq(&["demo", "semigroup", "--t", "0.5", "--tau", "0.5", "--s", "1"]);
    assert!(stdout(&o).contains("simulated   0.000000"));
}
