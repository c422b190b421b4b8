use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

use ternaccel::dse::presets::reference_allocation;
use ternaccel::dse::PortLayout;
use ternaccel::perf::{Coefficients, Headroom, PhaseLatencyModel};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ternaccel"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Copies the shipped config and anchor files into a scratch directory,
/// applying `edit` to the config text.
fn scratch_config(edit: impl Fn(String) -> String) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    for f in ["anchors_swap.csv", "anchors_static.csv"] {
        fs::copy(data(f), dir.path().join(f)).unwrap();
    }
    let cfg = dir.path().join("config.toml");
    fs::write(&cfg, edit(fs::read_to_string(data("kv260.toml")).unwrap())).unwrap();
    (dir, cfg)
}

fn calibrated(config: &Path, out: &Path) -> PathBuf {
    let o = run(&["calibrate", "--config", s(config), "--out-dir", s(out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    out.join("model.toml")
}

#[test]
fn verify_kernels_passes_and_catches_faults() {
    let o = run(&["verify-kernels", "--seed", "3"]);
    assert_eq!(code(&o), 0);
    let out = String::from_utf8(o.stdout).unwrap();
    for suite in ["tlmm_gemv", "flash_attention_prefill", "decode_attention"] {
        assert!(out.contains(suite), "{out}");
    }
    assert_eq!(code(&run(&["verify-kernels", "--sizes", "1x1"])), 0);
    assert_eq!(code(&run(&["verify-kernels", "--inject-fault"])), 3);
    assert_ne!(code(&run(&["verify-kernels", "--sizes", "0x4"])), 0);
}

#[test]
fn verify_kernels_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify-kernels", "--out-dir", s(dir.path())]);
    assert_eq!(code(&o), 0);
    assert!(fs::read_dir(dir.path()).unwrap().next().is_some());
}

#[test]
fn calibrate_writes_model_and_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let m = calibrated(&data("kv260.toml"), dir.path());
    let model = fs::read_to_string(&m).unwrap();
    assert!(model.contains("p_proj"));
    let res = fs::read_to_string(dir.path().join("residuals.csv")).unwrap();
    assert_eq!(res.lines().count(), 5);
}

#[test]
fn dse_reports_points_and_honours_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let m = calibrated(&data("kv260.toml"), dir.path());
    let o = run(&[
        "dse", "--config", s(&data("kv260.toml")), "--model", s(&m), "--alpha", "0.3", "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(dir.path().join("dse_report.toml")).unwrap();
    assert!(report.contains("alpha = 0.3"), "{report}");
    let csv = fs::read_to_string(dir.path().join("dse_points.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), ternaccel::dse::EVALUATED_HEADER);
    assert_eq!(csv.lines().count(), 1 + 1152);
    assert!(dir.path().join("design.toml").exists());
}

#[test]
fn dse_with_no_resources_is_infeasible() {
    let (dir, cfg) = scratch_config(|t| {
        t.replace(
            "r_total = { lut = 117120, ff = 234240, dsp = 1248, bram = 144, uram = 64 }",
            "r_total = { lut = 0, ff = 0, dsp = 0, bram = 0, uram = 0 }",
        )
    });
    let m = calibrated(&data("kv260.toml"), dir.path());
    let o = run(&["dse", "--config", s(&cfg), "--model", s(&m), "--out-dir", s(dir.path())]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no feasible design"));
    // Every point is still listed with its violation.
    let csv = fs::read_to_string(dir.path().join("dse_points.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with("resource_budget")));
}

#[test]
fn shrink_flag_runs() {
    let dir = tempfile::tempdir().unwrap();
    let m = calibrated(&data("kv260.toml"), dir.path());
    let o = run(&["dse", "--config", s(&data("kv260.toml")), "--model", s(&m), "--shrink", "--out-dir", s(dir.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unknown_config_keys_are_listed() {
    let (dir, cfg) = scratch_config(|t| t.replace("n_layers = 24", "n_layers = 24\nn_layer = 12\nflavour = 1"));
    let o = run(&["calibrate", "--config", s(&cfg), "--out-dir", s(dir.path())]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("model.n_layer") && err.contains("model.flavour"), "{err}");
}

#[test]
fn invalid_field_is_named() {
    let (dir, cfg) = scratch_config(|t| t.replace("alpha = 0.7", "alpha = 1.5"));
    let o = run(&["calibrate", "--config", s(&cfg), "--out-dir", s(dir.path())]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("dse.alpha"));
}

#[test]
fn missing_measurements_are_an_io_error() {
    let (dir, cfg) = scratch_config(|t| t.replace("anchors_swap.csv", "nowhere.csv"));
    let o = run(&["calibrate", "--config", s(&cfg), "--out-dir", s(dir.path())]);
    assert_eq!(code(&o), 1);
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let m = calibrated(&data("kv260.toml"), dir.path());
    let mut outputs = Vec::new();
    for sub in ["a", "b"] {
        let out = dir.path().join(sub);
        let o = run(&[
            "simulate", "--config", s(&data("kv260.toml")), "--model", s(&m), "--sweep", "64,256,1024", "--out-dir",
            s(&out),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(
            ["timeline.csv", "curves.csv", "simulate.toml"]
                .map(|f| fs::read(out.join(f)).unwrap()),
        );
    }
    assert_eq!(outputs[0], outputs[1]);
    let curves = String::from_utf8(outputs[0][1].clone()).unwrap();
    assert_eq!(curves.lines().count(), 4);
    let timeline = String::from_utf8(outputs[0][0].clone()).unwrap();
    assert!(timeline.contains("reconfig_start") && timeline.contains("decode_step"));
}

#[test]
fn simulate_shows_14_ms_exposed_for_45_over_31() {
    let dir = tempfile::tempdir().unwrap();
    // Each of 24 layers spends 31 ms on linear work for a 768-token prompt.
    let c = Coefficients {
        p_proj: 0.031 * 24.0 / 768.0,
        p_atten: 5e-6,
        d_proj: 0.03,
        d_atten: 3e-5,
        t_weights: 0.0,
    };
    let m = PhaseLatencyModel::new(c, reference_allocation(PortLayout::KvSplit), Headroom::default()).unwrap();
    let path = dir.path().join("model.toml");
    fs::write(&path, m.to_toml()).unwrap();
    let o = run(&["simulate", "--config", s(&data("kv260.toml")), "--model", s(&path), "--out-dir", s(dir.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary: toml::Value = toml::from_str(&fs::read_to_string(dir.path().join("simulate.toml")).unwrap()).unwrap();
    let exposed = summary["overhead"]["exposed_ms"].as_float().unwrap();
    assert!((exposed - 14.0).abs() < 1e-6, "{exposed}");
    let timeline = fs::read_to_string(dir.path().join("timeline.csv")).unwrap();
    let end = |kind: &str| -> f64 {
        timeline
            .lines()
            .filter(|l| l.starts_with(kind))
            .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
            .fold(0.0, f64::max)
    };
    assert!((end("reconfig_end") - end("prefill_ffn") - 0.014).abs() < 1e-9);
}

#[test]
fn compare_against_static_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let swap = calibrated(&data("kv260.toml"), &dir.path().join("swap"));
    let fixed = calibrated(&data("kv260_static.toml"), &dir.path().join("static"));
    let o = run(&[
        "compare", "--config", s(&data("kv260.toml")), "--model", s(&swap), "--baseline-model", s(&fixed),
        "--sweep", "64,2048", "--out-dir", s(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("compare.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn bad_model_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.toml");
    fs::write(&path, "[coefficients]\np_proj = -1.0\n").unwrap();
    let o = run(&["simulate", "--model", s(&path), "--out-dir", s(dir.path())]);
    assert_eq!(code(&o), 2);
}
