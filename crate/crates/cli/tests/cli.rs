use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qkd_cli::CsvCurve;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn qkd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qkd")).args(args).output().expect("spawn qkd")
}

fn config(name: &str) -> String {
    configs().join(name).to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn lossless_bb84_has_no_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim.csv");
    let o = qkd(&["simulate", "--config", &config("bb84_lossless.toml"), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = CsvCurve::parse(&std::fs::read(out).unwrap()).unwrap();
    let row = &csv.rows[0];
    assert_eq!(csv.column("errors").unwrap()[0], 0.0);
    assert!((row[2] / row[1] - 0.5).abs() < 0.01);
}

#[test]
fn intercept_resend_is_reported_against_prediction() {
    let o = qkd(&["simulate", "--config", &config("intercept_resend.toml")]);
    assert!(o.status.success());
    let text = stdout(&o);
    let measured: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("qber measured"))
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!((measured - 0.25).abs() <= 0.01, "{measured}");
    assert!(text.contains("0.250000 (session)"), "{text}");
}

#[test]
fn invalid_mu_exits_with_two_and_names_the_field() {
    let o = qkd(&["simulate", "--config", &config("bad_mu.toml")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`mu`"));
}

#[test]
fn missing_and_malformed_configs_exit_with_two() {
    assert_eq!(qkd(&["simulate", "--config", "/nonexistent/qkd.toml"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[system]\nwavelength = 1550\n").unwrap();
    let o = qkd(&["simulate", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("wavelength"));
}

#[test]
fn unwritable_output_is_a_runtime_failure() {
    let o = qkd(&["thresholds", "--out", "/nonexistent/dir/t.csv"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn compare_exit_codes() {
    let cfg = config("intercept_resend.toml");
    assert_eq!(qkd(&["compare", "--config", &cfg]).status.code(), Some(0));
    assert_eq!(qkd(&["compare", "--config", &cfg, "--perturb", "0.05"]).status.code(), Some(3));
    assert_eq!(qkd(&["compare", "--config", &cfg, "--pulses", "1000"]).status.code(), Some(2));
}

#[test]
fn breidbart_agreement_is_reported() {
    let o = qkd(&["compare", "--config", &config("breidbart.toml")]);
    assert!(o.status.success(), "{}", stdout(&o));
    let line = stdout(&o).lines().find(|l| l.starts_with("eve_agreement")).unwrap().to_string();
    let empirical: f64 = line.split_whitespace().nth(2).unwrap().parse().unwrap();
    assert!((empirical - 0.854).abs() < 0.01, "{line}");
}

#[test]
fn sweep_csv_schema_and_cutoff() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let o = qkd(&["sweep", "--config", &config("band_1550.toml"), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let bytes = std::fs::read(&out).unwrap();
    assert!(!bytes.contains(&b'\r'));
    let csv = CsvCurve::parse(&bytes).unwrap();
    assert_eq!(
        csv.header,
        ["length", "r_sift", "qber", "qber_opt", "qber_det", "qber_acc", "i_ab", "i_ae_max", "r_net"]
    );
    let r_net = csv.column("r_net").unwrap();
    let l = csv.column("length").unwrap();
    let cut = l[r_net.iter().position(|&r| r == 0.0).unwrap()];
    assert!((70.0..=110.0).contains(&cut), "{cut}");
}

#[test]
fn zero_width_sweep_is_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("one.toml");
    std::fs::write(&cfg, "[sweep]\nvariable = \"length\"\nmin = 10\nmax = 10\nstep = 1\n").unwrap();
    let out = dir.path().join("one.csv");
    assert!(qkd(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.success());
    assert_eq!(CsvCurve::parse(&std::fs::read(out).unwrap()).unwrap().rows.len(), 1);
}

#[test]
fn repeater_curve_crosses_zero_near_ninety_km() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rep.csv");
    assert!(qkd(&["repeater", "--config", &config("repeater.toml"), "--out", out.to_str().unwrap()]).status.success());
    let csv = CsvCurve::parse(&std::fs::read(out).unwrap()).unwrap();
    let l = csv.column("length").unwrap();
    let rho = csv.column("rho_net_n1").unwrap();
    let cut = l[rho.iter().position(|&r| r == 0.0).unwrap()];
    assert!((cut - 90.0).abs() <= 3.0, "{cut}");
}

#[test]
fn thresholds_table() {
    let text = stdout(&qkd(&["thresholds"]));
    for v in ["0.110028", "0.146447", "0.250000", "0.292893"] {
        assert!(text.contains(v), "{v} missing from\n{text}");
    }
}

#[test]
fn distill_demo_runs() {
    let o = qkd(&["distill-demo", "--config", &config("distill_demo.toml")]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("advantage distillation"));
}

#[test]
fn seed_flag_changes_the_session() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str| {
        let out = dir.path().join(format!("s{seed}.csv"));
        let args = ["simulate", "--config", &config("intercept_resend.toml"), "--seed", seed, "--pulses", "20000", "--out", out.to_str().unwrap()];
        assert!(qkd(&args).status.success());
        std::fs::read(out).unwrap()
    };
    assert_eq!(run("1"), run("1"));
    assert_ne!(run("1"), run("2"));
}
