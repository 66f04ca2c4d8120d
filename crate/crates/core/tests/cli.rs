use std::path::Path;
use std::process::{Command, Output};

fn antisense(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_antisense")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SCENE: &str = "\
# single chest at bin 111
M = 600
target.0.offset = 111
target.0.component.0.amplitude = 0.4
target.0.component.0.freq_rpm = 72
target.0.component.1.amplitude = 1.2
target.0.component.1.freq_rpm = 15
target.0.component.1.phase = 1.0
snr_db = 25
";

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&antisense(&[])), 1);
    assert_eq!(code(&antisense(&["estimate", "--model", "fft"])), 1);
    assert_eq!(code(&antisense(&["estimate", "--in", "x", "--model", "resnet"])), 1);
    assert_eq!(code(&antisense(&["--help"])), 0);
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.rgrm");
    assert_eq!(code(&antisense(&["estimate", "--in", p(&missing), "--model", "fft"])), 2);
    let junk = dir.path().join("junk.rgrm");
    std::fs::write(&junk, b"not a radargram").unwrap();
    let out = antisense(&["estimate", "--in", p(&junk), "--model", "fft"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    let out = antisense(&[
        "schedule", "--f-rpm", "98", "--a-bins", "25", "--arm-mm", "250", "--duration-s", "1", "--out",
        p(&dir.path().join("s.csv")),
    ]);
    assert_eq!(code(&out), 2);
    let scene = dir.path().join("bad.cfg");
    std::fs::write(&scene, "M = 600\nbogus_key = 1\n").unwrap();
    let out = antisense(&["synth", "--config", p(&scene), "--seed", "1", "--out", p(&dir.path().join("x.rgrm"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn synth_estimate_defend_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene.cfg");
    std::fs::write(&scene, SCENE).unwrap();
    let x = dir.path().join("x.rgrm");
    assert_eq!(code(&antisense(&["synth", "--config", p(&scene), "--seed", "7", "--out", p(&x)])), 0);

    let out = antisense(&["estimate", "--in", p(&x), "--model", "fft"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let hr: f64 = text.lines().find_map(|l| l.strip_prefix("hr_bpm: ")).unwrap().parse().unwrap();
    assert!((hr - 72.0).abs() < 1.5, "{text}");

    let report = dir.path().join("defense.txt");
    let xp = dir.path().join("xp.rgrm");
    let out = antisense(&[
        "defend", "--in", p(&x), "--model", "softspec", "--target-bpm", "84", "--iters", "60", "--alpha", "0.5",
        "--seed", "3", "--report", p(&report), "--out", p(&xp),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.contains("[defense]") && text.contains("[loss_trace]"));
    assert!(text.contains("model_estimate_bpm:"));
    assert_eq!(code(&antisense(&["estimate", "--in", p(&xp), "--model", "softspec"])), 0);
}

#[test]
fn schedule_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let out = antisense(&[
        "schedule", "--f-rpm", "98", "--a-bins", "3", "--arm-mm", "100", "--duration-s", "1", "--out", p(&csv),
    ]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "t_ms,angle_deg");
    assert_eq!(rows.len(), 52);
    assert_eq!(rows[1], "0,90.00");
}

#[test]
fn train_then_eval_mlp() {
    let dir = tempfile::tempdir().unwrap();
    let preset = dir.path().join("preset.cfg");
    std::fs::write(&preset, "count = 100\nwindow_s = 20\nepochs = 20\nhidden = 8\n").unwrap();
    let params = dir.path().join("m.mlpw");
    let out = antisense(&["train", "--preset", p(&preset), "--seed", "1", "--out", p(&params)]);
    std::fs::write(&preset, "count = 6\nwindow_s = 20\niterations = 10\n").unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("train_mae_bpm:"));
    let report = dir.path().join("r.txt");
    let records = dir.path().join("r.csv");
    let args = ["eval", "--preset", p(&preset), "--model", "mlp", "--seed", "2", "--report", p(&report), "--records", p(&records)];
    assert_eq!(code(&antisense(&args)), 2);
    let mut with_params = args.to_vec();
    with_params.extend(["--params", p(&params)]);
    let out = antisense(&with_params);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&records).unwrap().lines().count(), 7);
}

#[test]
fn divergence_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let preset = dir.path().join("preset.cfg");
    std::fs::write(&preset, "count = 100\nwindow_s = 10\nepochs = 2\nhidden = 4\nlearning_rate = 1e308\n").unwrap();
    let out = antisense(&["train", "--preset", p(&preset), "--seed", "1", "--out", p(&dir.path().join("m.mlpw"))]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}
