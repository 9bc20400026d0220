//! Golden-file and exit-status tests for the `kramers-zpf` binary.
//! Set UPDATE_GOLDEN=1 to rewrite the golden files.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join(name)
}

fn run(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_kramers-zpf"));
    cmd.args(args).current_dir(dir("data")).env_remove("KRAMERS_ZPF_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout_ok(args: &[&str]) -> String {
    let out = run(args, &[]);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn golden(name: &str, args: &[&str]) {
    let text = stdout_ok(args);
    let path = dir("golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &text).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing golden file {name}"));
    assert_eq!(text, expected, "{name} differs from golden output");
}

fn json(text: &str) -> serde_json::Value {
    serde_json::from_str(text).unwrap()
}

fn error_of(out: &Output) -> (i32, String) {
    let v = json(&String::from_utf8_lossy(&out.stderr));
    (out.status.code().unwrap(), v["error"]["kind"].as_str().unwrap().to_string())
}

#[test]
fn golden_outputs() {
    golden(
        "rate_zero_temperature.json",
        &["rate", "--hbar-omega-a-eV", "5.06e-3", "--delta-u-eV", "6.68e-2", "--temperature-K", "0", "--zero-point"],
    );
    golden(
        "dcoeff_zero_temperature.csv",
        &["dcoeff", "--hbar-omega-a-eV", "5.06e-3", "--temperature-K", "0", "--format", "csv"],
    );
    golden(
        "curve_compare.csv",
        &["curve", "--t-min", "10", "--t-max", "340", "--points", "100", "--compare-arrhenius"],
    );
    golden("rate_reference.json", &["rate", "--config", "reference.json"]);
    golden("potential_info.json", &["potential-info", "--config", "reference.json"]);
    golden("potential_profile.csv", &["potential-info", "--shape", "1,1.5,0.2", "--points", "21", "--format", "csv"]);
    golden(
        "simulate_histogram.csv",
        &["simulate", "--config", "reference.json", "--n-trajectories", "300", "--format", "csv"],
    );
    golden("fpe_series.csv", &["fpe", "--config", "reference.json", "--nx", "32", "--np", "32", "--format", "csv"]);
    golden("fit.json", &["fit", "--data", "rates.csv"]);
}

#[test]
fn documented_examples() {
    let r = json(&stdout_ok(&[
        "rate",
        "--hbar-omega-a-eV",
        "5.06e-3",
        "--delta-u-eV",
        "6.68e-2",
        "--temperature-K",
        "0",
        "--zero-point",
    ]));
    let k = r["kappa"].as_f64().unwrap();
    assert!((k - 4.2).abs() < 0.05, "{k}");

    let d = json(&stdout_ok(&["dcoeff", "--hbar-omega-a-eV", "5.06e-3", "--temperature-K", "0"]));
    assert_eq!(d["diffusion_eV"].as_f64().unwrap(), 2.53e-3);

    let csv = stdout_ok(&["curve", "--t-min", "10", "--t-max", "340", "--points", "100", "--compare-arrhenius"]);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("temperature_K,kappa_zp,kappa_arrhenius"));
    assert_eq!(lines.count(), 100);
}

#[test]
fn flags_override_config() {
    let from_config = json(&stdout_ok(&["rate", "--config", "reference.json", "--barrier-ratio", "4"]));
    let from_flags = json(&stdout_ok(&["rate", "--gamma", "0.5", "--barrier-ratio", "4"]));
    let (a, b) = (from_config["kappa"].as_f64().unwrap(), from_flags["kappa"].as_f64().unwrap());
    assert!(((a - b) / b).abs() < 1e-12, "{a} vs {b}");
}

#[test]
fn numerical_engines_agree_with_rate_on_shared_config() {
    let analytic = json(&stdout_ok(&["rate", "--config", "reference.json"]))["kappa"].as_f64().unwrap();
    let mc = json(&stdout_ok(&["simulate", "--config", "reference.json"]));
    let k_mc = mc["estimate"]["kappa"].as_f64().unwrap();
    assert!(((k_mc - analytic) / analytic).abs() < 0.2, "MC {k_mc} vs {analytic}");
    let fpe = json(&stdout_ok(&["fpe", "--config", "reference.json"]));
    let k_fpe = fpe["estimate"]["kappa"].as_f64().unwrap();
    assert!(((k_fpe - analytic) / analytic).abs() < 0.1, "FPE {k_fpe} vs {analytic}");
    assert_eq!(fpe["analytic"]["kappa"].as_f64().unwrap(), analytic);
}

#[test]
fn output_is_independent_of_thread_count() {
    let args = ["simulate", "--config", "reference.json", "--n-trajectories", "200"];
    let one = run(&args, &[("KRAMERS_ZPF_THREADS", "1")]);
    let four = run(&args, &[("KRAMERS_ZPF_THREADS", "4")]);
    assert!(one.status.success() && four.status.success());
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn output_file_matches_stdout() {
    let target = std::env::temp_dir().join(format!("kramers-zpf-cli-{}.csv", std::process::id()));
    let target_str = target.to_str().unwrap();
    let out = run(&["curve", "--points", "7", "-o", target_str], &[]);
    assert!(out.status.success() && out.stdout.is_empty());
    let written = std::fs::read_to_string(&target).unwrap();
    std::fs::remove_file(&target).unwrap();
    assert_eq!(written, stdout_ok(&["curve", "--points", "7"]));
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["rate", "--bogus"][..],
        &["rate", "--gamma", "-1", "--barrier-ratio", "5"],
        &["rate", "--barrier-ratio", "5"],
        &["curve", "--t-min", "300", "--t-max", "10"],
        &["simulate", "--gamma", "0.5", "--barrier-ratio", "5", "--initial-condition", "sideways"],
        &["rate", "--config", "missing.json"],
        &["dcoeff", "--temperature-K", "-3", "--hbar-omega-a-eV", "1e-3"],
        &["frobnicate"],
    ] {
        let (code, kind) = error_of(&run(args, &[]));
        assert_eq!((code, kind.as_str()), (2, "usage"), "{args:?}");
    }
    let (code, _) = error_of(&run(&["rate"], &[("KRAMERS_ZPF_THREADS", "many")]));
    assert_eq!(code, 2);
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let path = std::env::temp_dir().join(format!("kramers-zpf-bad-{}.json", std::process::id()));
    std::fs::write(&path, r#"{"gamma": 0.5, "barrier_ratio": 5, "n_trajectory": 10}"#).unwrap();
    let out = run(&["rate", "--config", path.to_str().unwrap()], &[]);
    std::fs::remove_file(&path).unwrap();
    let (code, kind) = error_of(&out);
    assert_eq!((code, kind.as_str()), (2, "usage"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_trajectory"));
}

#[test]
fn module_errors_exit_1_with_json() {
    let cases: [(&[&str], &str); 4] = [
        (&["potential-info", "--coefficients", "0,0,1", "--interval", "-1,1"], "potential"),
        (&["fit", "--data", "missing.csv"], "io"),
        (&["fpe", "--gamma", "0.5", "--barrier-ratio", "20"], "fokker_planck"),
        (
            &["simulate", "--gamma", "0.5", "--barrier-ratio", "5", "--max-time", "1", "--n-trajectories", "5"],
            "langevin",
        ),
    ];
    for (args, expected) in cases {
        let (code, kind) = error_of(&run(args, &[]));
        assert_eq!((code, kind.as_str()), (1, expected), "{args:?}");
    }
}

#[test]
fn help_exits_zero() {
    let out = run(&["--help"], &[]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["rate", "dcoeff", "simulate", "fpe", "fit", "curve", "potential-info"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
}
