use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn sdbc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdbc")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn make_channel(dir: &TempDir, family: &str, p: &str, extra: &[&str]) -> PathBuf {
    let out = dir.path().join(format!("{family}-{p}.json"));
    let mut args = vec!["channel", "make", family, "--p", p, "--out", path_str(&out)];
    args.extend_from_slice(extra);
    let o = sdbc(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn parse_csv(text: &str) -> Vec<(f64, f64, String)> {
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("r_z,r_y_max,certificate_id"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].to_string())
        })
        .collect()
}

#[test]
fn missing_channel_file_is_an_input_error() {
    let o = sdbc(&["region", "boundary", "/nonexistent/channel.json", "--kind", "cor1"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn no_side_information_certificate_needs_p_above_half() {
    let o = sdbc(&["feedback", "certify", "--p", "0.4", "--mode", "no_msi"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("p > 1/2"));
}

#[test]
fn adder_boundary_is_monotone() {
    let dir = TempDir::new().unwrap();
    let ch = make_channel(&dir, "adder_erasure", "0.6", &[]);
    let out = dir.path().join("boundary.csv");
    let o = sdbc(&[
        "region", "boundary", path_str(&ch), "--kind", "Cor1_NoMsiAtZ", "--grid", "20", "--budget", "3",
        "--iterations", "60", "--out", path_str(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = parse_csv(&std::fs::read_to_string(&out).unwrap());
    assert_eq!(rows.len(), 20);
    for w in rows.windows(2) {
        assert!(w[1].0 > w[0].0 && w[1].1 <= w[0].1, "{w:?}");
    }

    let side: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("boundary.csv.certificates.json")).unwrap())
            .unwrap();
    assert_eq!(side["config"]["grid"], json!(20));
    let ids: Vec<&str> = side["certificates"].as_array().unwrap().iter().map(|c| c["id"].as_str().unwrap()).collect();
    assert!(rows.iter().all(|r| ids.contains(&r.2.as_str())));
}

#[test]
fn single_grid_point_is_the_cap_at_zero() {
    let dir = TempDir::new().unwrap();
    let ch = make_channel(&dir, "adder_erasure", "0.6", &[]);
    let o = sdbc(&["region", "boundary", path_str(&ch), "--kind", "cor1", "--grid", "1", "--budget", "2"]);
    assert_eq!(code(&o), 0);
    let rows = parse_csv(&String::from_utf8(o.stdout).unwrap());
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].0, 0.0);
    // R_Y alone is capped by max H(Y) = log2 3
    assert!((rows[0].1 - 3f64.log2()).abs() < 1e-6);
}

#[test]
fn certificates_round_trip_through_verify() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("cert.json");
    let o = sdbc(&["feedback", "certify", "--p", "0.6", "--mode", "pmsi_y", "--out", path_str(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = sdbc(&["feedback", "verify", path_str(&out)]);
    assert_eq!(code(&o), 0);

    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let m = v["certificates"][0]["certificate"]["margin"].as_f64().unwrap();
    v["certificates"][0]["certificate"]["margin"] = json!(m + 0.05);
    let forged = dir.path().join("forged.json");
    std::fs::write(&forged, v.to_string()).unwrap();
    assert_eq!(code(&sdbc(&["feedback", "verify", path_str(&forged)])), 1);
}

#[test]
fn example2_and_elimination_checks_pass() {
    let o = sdbc(&["examples", "check", "example2"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let checks = v["examples"][0]["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 5);
    assert!(checks.iter().all(|k| k["tolerance"].as_f64().unwrap() <= 1e-3));

    let o = sdbc(&["fme", "verify", "--samples", "100", "--seed", "7"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["report"]["mutual"], json!(true));
    assert_eq!(v["config"]["seed"], json!(7));
}

#[test]
fn malformed_inputs_exit_two() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    let ch = json!({ "x_size": 2, "y_size": 1, "z_size": 2, "kernel": [["0.5", "0.5"], ["0.6", "0.5"]] });
    std::fs::write(&bad, ch.to_string()).unwrap();
    assert_eq!(code(&sdbc(&["region", "boundary", path_str(&bad), "--kind", "cor1"])), 2);

    let ok = make_channel(&dir, "bsc_pair", "0.25", &[]);
    assert_eq!(code(&sdbc(&["region", "boundary", path_str(&ok), "--kind", "nonsense"])), 2);
    assert_eq!(code(&sdbc(&["examples", "check", "example9"])), 2);
    assert_eq!(code(&sdbc(&["channel", "make", "function_erasure", "--p", "0.5"])), 2);

    let o = Command::new(env!("CARGO_BIN_EXE_sdbc"))
        .args(["fme", "verify", "--samples", "1"])
        .env("SDBC_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn eval_reports_membership_and_optimize_infeasibility() {
    let dir = TempDir::new().unwrap();
    let ch = make_channel(&dir, "bsc_pair", "0.25", &[]);
    let input = dir.path().join("input.json");
    let a = json!({ "v_size": 1, "u_size": 1, "x_size": 2, "p_vu": [[1.0]], "p_x_given_u": [[0.5, 0.5]] });
    std::fs::write(&input, a.to_string()).unwrap();
    let eval = |rates: &str| {
        sdbc(&["region", "eval", path_str(&ch), "--kind", "cor3", "--input", path_str(&input), "--rates", rates])
    };
    let o = eval("0,0.5,0,0.1,0");
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["constraints"].as_array().unwrap().len(), 3);
    assert_eq!(code(&eval("0,0.5,0,0.5,0")), 1);

    let o = sdbc(&[
        "optimize", path_str(&ch), "--kind", "cor1", "--weights", "0,1,0,0,0", "--lower", "0,0,0,0.9,0", "--budget", "2",
    ]);
    assert_eq!(code(&o), 3);
    let o = sdbc(&["optimize", path_str(&ch), "--kind", "cor4", "--weights", "0,0,1,0,1", "--budget", "2"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["value"].as_f64().unwrap() > 1.18);
}

#[test]
fn simulate_is_deterministic_and_echoes_config() {
    let dir = TempDir::new().unwrap();
    let ch: Value = serde_json::from_str(&std::fs::read_to_string(make_channel(&dir, "bsc_pair", "0.25", &[])).unwrap())
        .unwrap();
    let third = 1.0 / 3.0;
    let params = json!({
        "channel": ch,
        "input": { "v_size": 2, "u_size": 2, "x_size": 2, "p_vu": [[0.5, 0.0], [0.0, 0.5]],
                   "p_x_given_u": [[1.0 - third, third], [third, 1.0 - third]] },
        "code": { "n": 6, "rates": { "r_common": 0.0, "r_y_p": 0.2, "r_y_c": 0.0, "r_z_p": 0.01, "r_z_c": 0.0 },
                  "aux": { "r_c": 0.5, "r_y": 0.7, "r_z": 0.5 }, "epsilon": 0.4, "epsilon_tilde": 0.5, "seed": 1 },
        "ns": [6, 9],
        "trials": 200,
    });
    let file = dir.path().join("sim.json");
    std::fs::write(&file, params.to_string()).unwrap();
    let a = sdbc(&["simulate", path_str(&file)]);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    let b = sdbc(&["simulate", path_str(&file)]);
    assert_eq!(a.stdout, b.stdout);
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
    assert_eq!(v["config"]["code"]["seed"], json!(1));
    let c = sdbc(&["simulate", path_str(&file), "--seed", "5"]);
    let w: Value = serde_json::from_slice(&c.stdout).unwrap();
    assert_eq!(w["config"]["code"]["seed"], json!(5));
}
