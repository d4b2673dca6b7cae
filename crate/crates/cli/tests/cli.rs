use std::process::{Command, Output};

use serde_json::Value;

fn sharppeak(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sharppeak"))
        .args(args)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn verify_default_config_passes() {
    let out = sharppeak(&["verify"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let v = json(&out);
    assert_eq!(v["values"]["all_passed"], true);
    assert_eq!(v["seed"], 0);
}

#[test]
fn verify_failure_exits_with_three() {
    // Neutral and mutation-free: the renewal check has no irreducible chain.
    let out = sharppeak(&["verify", "--sigma", "1", "--q", "0"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(&out)["values"]["all_passed"], false);
}

#[test]
fn psi_vanishes_above_threshold() {
    let a = (2f64.ln() + 0.1).to_string();
    let out = sharppeak(&["psi", "--a", &a, "--sigma", "2", "--grid", "200"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["values"]["psi"], 0.0);
    assert_eq!(v["values"]["converged"], true);
    assert_eq!(v["converged"], true);
}

#[test]
fn psi_reports_non_convergence() {
    let out = sharppeak(&["psi", "--a", "0.3", "--grid", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["converged"], false);
}

#[test]
fn same_seed_gives_identical_csv() {
    let args = [
        "simulate",
        "--process",
        "sandwich",
        "--ell",
        "4",
        "--m",
        "6",
        "--q",
        "0.05",
        "--steps",
        "200",
        "--seed",
        "42",
    ];
    let a = sharppeak(&args);
    let b = sharppeak(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("# sharppeak simulate config_hash="));
    assert!(header.ends_with("seed=42"));
    assert!(text.lines().skip(2).all(|l| l.ends_with(",true")));

    let mut other = args.to_vec();
    *other.last_mut().unwrap() = "43";
    assert_ne!(sharppeak(&other).stdout, text.as_bytes());
}

#[test]
fn discovery_is_independent_of_thread_count() {
    let base = [
        "discovery",
        "--ell",
        "4",
        "--m",
        "4",
        "--q",
        "0.05",
        "--replicas",
        "400",
        "--seed",
        "5",
        "--csv",
    ];
    let one = sharppeak(&[&base[..], &["--threads", "1"]].concat());
    let two = sharppeak(&[&base[..], &["--threads", "3"]].concat());
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, two.stdout);

    let v = json(&sharppeak(&base[..base.len() - 1]));
    for key in [
        "mean",
        "se",
        "censored_fraction",
        "bound_m_times_Etau0",
        "bound_satisfied",
    ] {
        assert!(v["values"].get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["values"]["bound_satisfied"], true);
}

#[test]
fn config_file_reproduces_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.json");
    let out = sharppeak(&[
        "exact",
        "--ell",
        "5",
        "--m",
        "12",
        "--a",
        "0.3",
        "--theta",
        "lower",
        "--json",
        "--out",
        first.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let record: Value = serde_json::from_str(&std::fs::read_to_string(&first).unwrap()).unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, record["config"].to_string()).unwrap();

    let again = sharppeak(&["--config", config.to_str().unwrap(), "--json"]);
    assert_eq!(again.status.code(), Some(0));
    let v = json(&again);
    assert_eq!(v["config_hash"], record["config_hash"]);
    assert_eq!(v["values"], record["values"]);
}

#[test]
fn exact_kernel_dump_in_log_space() {
    let out = sharppeak(&["exact", "--ell", "3", "--m", "4", "--q", "0.1", "--log-space"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[1], "h,k,ln_p");
    assert_eq!(lines.len(), 2 + 25);
    let total: f64 = lines[2..7]
        .iter()
        .map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap().exp())
        .sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn phase_diagram_columns() {
    let out = sharppeak(&[
        "phase-diagram",
        "--a-range",
        "0.2:0.8:3",
        "--alpha-range",
        "1:4:2",
        "--grid",
        "200",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[1], "a,alpha,psi,ln_kappa_over_alpha,phase,converged");
    assert_eq!(lines.len(), 2 + 6);
    assert!(lines[2].starts_with("0.2,1,") && lines[4].starts_with("0.5,1,"));
    assert!(lines[3].ends_with("quasispecies,true"));
    // a = 0.8 is past the threshold ln 2.
    assert!(lines[6].contains("disordered") && lines[7].contains("disordered"));
}

#[test]
fn usage_errors_exit_with_one() {
    let out = sharppeak(&["psi"]);
    assert_eq!(out.status.code(), Some(1));
    let out = sharppeak(&["psi", "--a", "0.3", "--sigma", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sigma >= 1"));
    let out = sharppeak(&["hitting", "--ell", "3", "--q", "0.1", "--from", "2", "--target", "7"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(sharppeak(&[]).status.code(), Some(1));
    assert_eq!(sharppeak(&["--help"]).status.code(), Some(0));
}

#[test]
fn hitting_single_locus() {
    let out = sharppeak(&["hitting", "--ell", "1", "--q", "0.1", "--from", "1", "--target", "0"]);
    assert_eq!(out.status.code(), Some(0));
    // Back-mutation probability p/κ = q when κ = 2.
    let t = json(&out)["values"]["expected_hitting_time"].as_f64().unwrap();
    assert!((t - 10.0).abs() < 1e-10);
}
