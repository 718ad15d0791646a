use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ecomsim"));
    c.env_remove("ECOMSIM_OUT");
    c
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn shipped_configs_validate() {
    for f in ["s1.toml", "s2.toml", "s3.toml"] {
        let o = run(&["validate", "--config", shipped(f).to_str().unwrap()]);
        assert!(
            o.status.success(),
            "{f}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    assert!(run(&["validate"]).status.success());
}

#[test]
fn config_errors_exit_with_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    let group = write(
        tmp.path(),
        "group.toml",
        "[[classes]]\nname = \"rare\"\n[classes.probs]\nBrowse = 0.5\nSearch = 0.5\nFound = 0.1\nNotFound = 0.9\n\
         Add = 0.1\nNotAdd = 0.9\nContinue1 = 0.3\nCheckout1 = 0.1\nEnd1 = 0.8\nContinue2 = 0.1\n\
         Checkout2 = 0.1\nEnd2 = 0.8\nContinue3 = 0.1\nCheckout3 = 0.1\nEnd3 = 0.8\n",
    );
    let o = run(&["validate", "--config", &group]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("rare") && err.contains("1.2"), "{err}");

    let route = write(
        tmp.path(),
        "route.toml",
        "[routes]\nSearch = [\"WS\", \"Cache\", \"WS\"]\n",
    );
    let o = run(&["validate", "--config", &route]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Cache"));

    let broken = write(tmp.path(), "broken.toml", "[run\nwindow = 1\n");
    assert_eq!(
        run(&["validate", "--config", &broken]).status.code(),
        Some(3)
    );
    assert_eq!(
        run(&["validate", "--config", "/nonexistent/x.toml"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(run(&["run", "--config", &route]).status.code(), Some(3));
}

#[test]
fn zero_rate_run_has_zero_sessions() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = run(&["run", "--lambda", "0", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let s: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(s["sessions_started"], 0);
    assert_eq!(s["degenerate"], true);
    let q = std::fs::read_to_string(out.join("queue_series.csv")).unwrap();
    assert!(q.starts_with("time,FES,WS,DbS,ApS,AuS\n"));
    // header + samples at t = 0, 1, ..., 7200
    assert_eq!(q.lines().count(), 1 + 7201);
}

#[test]
fn run_writes_summary_log_and_series() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "c.toml",
        "[scenario]\npreset = \"S1\"\nlambda = 14.78\n[run]\nwindow = 600.0\nseed = 4\n",
    );
    let out = tmp.path().join("o");
    assert!(
        run(&["run", "--config", &cfg, "--out", out.to_str().unwrap()])
            .status
            .success()
    );
    let s: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(s["seed"], 4);
    assert_eq!(s["consistency"].as_array().unwrap().len(), 0);
    let n = s["report"]["response_time"]["count"].as_u64().unwrap();
    let log = std::fs::read_to_string(out.join("requests.csv")).unwrap();
    assert_eq!(log.lines().count() as u64, n + 1);
    assert!(log.starts_with("id,session,class,request_type,issued_at,response_time"));
}

#[test]
fn output_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("env_out");
    let o = bin()
        .args(["run", "--lambda", "1", "--seed", "2"])
        .env("ECOMSIM_OUT", &out)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(out.join("summary.json").exists());
}

#[test]
fn one_point_sweep_is_one_row() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "c.toml",
        "[sweep]\nlambda_from = 5.0\nlambda_to = 5.0\n[run]\nwindow = 300.0\nreplications = 2\n",
    );
    let out = tmp.path().join("o");
    assert!(
        run(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()])
            .status
            .success()
    );
    let mut rd = csv::Reader::from_path(out.join("curve.csv")).unwrap();
    let h: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        h,
        [
            "lambda",
            "mean_rt",
            "ci",
            "bucket_lt2",
            "bucket_2to4",
            "bucket_gt4",
            "util_FES",
            "util_WS",
            "util_DbS",
            "util_ApS",
            "util_AuS",
            "thr_FES",
            "thr_WS",
            "thr_DbS",
            "thr_ApS",
            "thr_AuS"
        ]
    );
    assert_eq!(rd.records().count(), 1);
    let s: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(s["critical"]["status"], "not_crossed");
    assert_eq!(s["bottleneck"], "WS");
}

#[test]
fn oracle_reports_saturation() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&[
        "oracle",
        "--config",
        shipped("s1.toml").to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(
        text.contains("bottleneck WS") && text.contains("λ_sat"),
        "{text}"
    );
    let j: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("oracle.json")).unwrap()).unwrap();
    let d = &j["demand"];
    let ws = d["per_server"]
        .as_array()
        .unwrap()
        .iter()
        .find(|x| x[0] == "WS")
        .unwrap()[1]
        .as_f64()
        .unwrap();
    assert!((d["lambda_sat"].as_f64().unwrap() - 1.0 / ws).abs() < 1e-9);

    // S1 loads the web server more than S3
    let o3 = run(&[
        "oracle",
        "--config",
        shipped("s3.toml").to_str().unwrap(),
        "--out",
        tmp.path().join("s3").to_str().unwrap(),
    ]);
    assert!(o3.status.success());
    let j3: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("s3/oracle.json")).unwrap()).unwrap();
    assert!(d["bottleneck_demand"].as_f64() > j3["demand"]["bottleneck_demand"].as_f64());
}

#[test]
fn always_leaving_class_has_single_think() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = String::from("[scenario]\nname = \"leavers\"\nclasses = [\"leaver\"]\npmf = [1.0]\n[[classes]]\nname = \"leaver\"\n[classes.probs]\n");
    for (k, v) in [
        ("Browse", 1.0),
        ("Search", 0.0),
        ("Found", 0.0),
        ("NotFound", 1.0),
        ("Add", 0.0),
        ("NotAdd", 1.0),
        ("Continue1", 0.0),
        ("Checkout1", 0.0),
        ("End1", 1.0),
        ("Continue2", 0.0),
        ("Checkout2", 0.0),
        ("End2", 1.0),
        ("Continue3", 0.0),
        ("Checkout3", 0.0),
        ("End3", 1.0),
    ] {
        cfg.push_str(&format!("{k} = {v:.1}\n"));
    }
    let path = write(tmp.path(), "c.toml", &cfg);
    let out = tmp.path().join("o");
    let o = run(&["oracle", "--config", &path, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let j: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("oracle.json")).unwrap()).unwrap();
    assert!((j["mix"]["pm4"].as_f64().unwrap() - 60.0).abs() < 1e-9);
}
