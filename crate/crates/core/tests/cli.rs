use serde_json::Value;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::process::Command;

const PI2: f64 = std::f64::consts::PI * std::f64::consts::PI;

fn kbl(dir: &Path, args: &[&str]) -> (i32, PathBuf) {
    let out = dir.join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_kbl"))
        .args(args)
        .arg("--out")
        .arg(&out)
        .env("KBL_THREADS", "2")
        .output()
        .expect("binary runs");
    (status.status.code().unwrap_or(-1), out)
}

fn csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    (header, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let (h, rows) = csv(path);
    let j = h.iter().position(|c| c == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[j].parse().unwrap()).collect()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn checksums(out: &Path) -> Vec<(String, String)> {
    let report = json(&out.join("report.json"));
    report["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| (f["path"].as_str().unwrap().to_string(), f["sha256"].as_str().unwrap().to_string()))
        .collect()
}

#[test]
fn eigen_constant_potential_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let v = format!(r#"potential={{"kind":"constant","value":{PI2}}}"#);
    let args = ["eigen", "--set", &v, "--set", "modes=10", "--set", "n_points=2001"];
    let (code, out) = kbl(tmp.path(), &args);
    assert_eq!(code, 0);
    let mu = column(&out.join("spectrum.csv"), "mu_n");
    assert_eq!(mu.len(), 10);
    for (n, m) in mu.iter().enumerate() {
        let exact = PI2 * (1.0 + (n * n) as f64);
        assert!((m - exact).abs() / exact <= 1e-3, "mu_{n} = {m}");
    }
    let summary = json(&out.join("basis.json"));
    for key in ["m0", "i0", "c_v", "p", "v_int"] {
        assert!(summary.get(key).is_some(), "{key}");
    }
    // every listed file exists with the recorded checksum
    let first = checksums(&out);
    for (path, sum) in &first {
        let bytes = std::fs::read(out.join(path)).unwrap();
        let got: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(&got, sum, "{path}");
    }
    assert!(first.iter().any(|(p, _)| p == "modes/e9.csv"));

    let tmp2 = tempfile::tempdir().unwrap();
    let (code, out2) = kbl(tmp2.path(), &args);
    assert_eq!(code, 0);
    assert_eq!(first, checksums(&out2));
}

#[test]
fn tabulated_potential_with_zero_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let table: String = (0..101).map(|i| if i == 50 { "0\n".to_string() } else { "3\n".to_string() }).collect();
    std::fs::write(tmp.path().join("v.csv"), table).unwrap();
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"potential": {"kind": "table", "path": "v.csv"}, "n_points": 101, "modes": 10, "truncation": {"max_mode": 4, "max_order": 2}}"#).unwrap();
    let (code, out) = kbl(tmp.path(), &["eigen", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 2);
    let report = json(&out.join("report.json"));
    let err = report["error"].as_str().unwrap();
    assert!(err.contains("potential") && err.contains("strictly positive"), "{err}");
}

#[test]
fn validation_errors_name_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, out) = kbl(tmp.path(), &["eigen", "--set", "truncation.max_mode=six"]);
    assert_eq!(code, 2);
    let err = json(&out.join("report.json"))["error"].as_str().unwrap().to_string();
    assert!(err.contains("truncation.max_mode"), "{err}");
    let (code, _) = kbl(tmp.path(), &["eigen", "--set", "n_points=1000"]);
    assert_eq!(code, 2);
    let (code, _) = kbl(tmp.path(), &["eigen", "--set", "initial.kind=wave"]);
    assert_eq!(code, 2);
}

#[test]
fn burgers_from_sink_is_steady() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, out) = kbl(tmp.path(), &["evolve", "burgers", "--set", r#"initial={"kind":"sink"}"#]);
    assert_eq!(code, 0);
    let drift = column(&out.join("means.csv"), "drift");
    assert!(drift.iter().all(|d| *d <= 1e-4), "{drift:?}");
    let (h, rows) = csv(&out.join("trajectory.csv"));
    assert_eq!(h, ["t", "x", "value"]);
    assert_eq!(rows.len(), 3 * 1001);
}

#[test]
fn nheat_blowup_time_is_ln2() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "evolve",
        "nheat",
        "--set",
        r#"potential={"kind":"constant","value":1}"#,
        "--set",
        r#"initial={"kind":"constant","value":2}"#,
        "--set",
        "n_points=401",
        "--set",
        "modes=20",
        "--set",
        "times=[0,0.2,0.4,0.6,0.8]",
    ];
    let (code, out) = kbl(tmp.path(), &args);
    assert_eq!(code, 0);
    let rep = json(&out.join("blowup.json"));
    assert_eq!(rep["blew_up"], Value::Bool(true));
    assert!((rep["t_star"].as_f64().unwrap() - 2f64.ln()).abs() <= 1e-4);
    // the sample at t = 0.8 lies past the blow-up
    assert_eq!(column(&out.join("means.csv"), "t").len(), 4);

    let mut alias = args.to_vec();
    alias.drain(0..2);
    alias.insert(0, "blowup");
    let (code, out) = kbl(tmp.path(), &alias);
    assert_eq!(code, 0);
    assert!(out.join("blowup.json").exists());

    let (code, _) = kbl(tmp.path(), &["blowup", "--set", r#"initial={"kind":"constant","value":0.5}"#]);
    assert_eq!(code, 2);
}

#[test]
fn heat_matches_mean_times_nonlinear() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, out) = kbl(tmp.path(), &["evolve", "heat", "--set", r#"initial={"kind":"cosine","coeffs":[1.5,0.2,0.1]}"#]);
    assert_eq!(code, 0);
    let diff = column(&out.join("identity.csv"), "sup_abs_diff");
    assert!(diff.iter().all(|d| *d <= 1e-8), "{diff:?}");
}

#[test]
fn fd_oracle_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, out) = kbl(tmp.path(), &["evolve", "burgers-fd"]);
    assert_eq!(code, 0);
    let d = column(&out.join("means.csv"), "sink_distance");
    assert!(d.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn koopman_burgers_matches_oracle() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, out) = kbl(tmp.path(), &["koopman", "burgers"]);
    assert_eq!(code, 0);
    let err = column(&out.join("comparison.csv"), "sup_error");
    assert_eq!(err.len(), 3);
    assert!(err.iter().all(|e| *e <= 1e-2), "{err:?}");
    let certs = json(&out.join("certificate.json"));
    for key in ["tau_B", "tau_tilde_B", "k_bound", "eps", "absolutely_convergent", "C1", "truncation"] {
        assert!(certs[0].get(key).is_some(), "{key}");
    }
    let (h, rows) = csv(&out.join("decomposition.csv"));
    assert_eq!(h, ["q0", "tail", "m", "lambda", "coefficient", "mode_scale", "mode_file"]);
    assert_eq!(rows.len(), 7 * 43);
    for r in &rows {
        for f in r[6].split('*') {
            assert!(out.join(f).exists(), "{f}");
        }
    }
    let report = json(&out.join("report.json"));
    assert_eq!(report["certificates"].as_array().unwrap().len(), 3);
}

#[test]
fn uncertified_time_exits_with_cert_fail() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "koopman",
        "burgers",
        "--set",
        "times=[0.001,0.5]",
        "--set",
        r#"initial={"kind":"sink_perturbation","amplitude":3.0,"mode":1}"#,
    ];
    let (code, out) = kbl(tmp.path(), &args);
    assert_eq!(code, 3);
    let certs = json(&out.join("certificate.json"));
    assert_eq!(certs[0]["valid"], Value::Bool(false));
    assert!(!out.join("series.csv").exists());
    assert_eq!(json(&out.join("report.json"))["exit_code"], 3);

    let mut forced = args.to_vec();
    forced.extend(["--set", "allow_uncertified=true"]);
    let (code, out) = kbl(tmp.path(), &forced);
    assert_eq!(code, 0);
    assert_eq!(json(&out.join("certificate.json"))[0]["unsafe_override"], Value::Bool(true));
}

#[test]
fn constant_potential_has_no_product_terms() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "koopman",
        "heat",
        "--set",
        r#"potential={"kind":"constant","value":5}"#,
        "--set",
        r#"initial={"kind":"cosine","coeffs":[1,0.3,0.1]}"#,
    ];
    let (code, out) = kbl(tmp.path(), &args);
    assert_eq!(code, 0);
    let (_, rows) = csv(&out.join("decomposition.csv"));
    let mut product_rows = 0;
    for r in &rows {
        if r[2].parse::<usize>().unwrap() >= 1 {
            let c: f64 = r[4].parse().unwrap();
            let s: f64 = r[5].parse().unwrap();
            assert!((c * s).abs() <= 1e-10, "{r:?}");
            product_rows += 1;
        }
    }
    assert!(product_rows > 0);
}

#[test]
fn verify_passes_and_fault_injection_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, out) = kbl(tmp.path(), &["verify", "--seed", "3", "--set", "samples=4"]);
    assert_eq!(code, 0);
    let rep = json(&out.join("verify.json"));
    assert_eq!(rep["pass"], Value::Bool(true));
    let names: Vec<&str> = rep["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    for want in [
        "roundtrip_cole_hopf",
        "roundtrip_hopf_cole",
        "scaling_invariance",
        "mean_identity",
        "intertwining",
        "estimates",
        "eigen_relation_psi",
        "eigen_relation_sigma",
        "eigen_relation_phi",
        "trichotomy_below",
        "trichotomy_unit",
        "trichotomy_above",
        "blowup_time",
        "sink_fixed_points",
    ] {
        assert!(names.contains(&want), "{want} missing");
    }
    assert!(rep["checks"].as_array().unwrap().iter().all(|c| c["margin"].is_f64()));

    let (code, out) = kbl(tmp.path(), &["verify", "--set", "samples=2", "--inject-fault", "1"]);
    assert_eq!(code, 4);
    let rep = json(&out.join("verify.json"));
    assert_eq!(rep["pass"], Value::Bool(false));
    let psi = rep["checks"].as_array().unwrap().iter().find(|c| c["name"] == "eigen_relation_psi").unwrap();
    assert_eq!(psi["pass"], Value::Bool(false));
}

#[test]
fn bad_thread_count_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_kbl"))
        .args(["eigen", "--out"])
        .arg(tmp.path())
        .env("KBL_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&status.stderr).contains("KBL_THREADS"));
}
