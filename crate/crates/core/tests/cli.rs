use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dualdrive"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn summary_lists_modified_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["summary", "--model", "modified"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("total_params: 303180"), "{text}");
    assert_eq!(text.matches("SeparableConv2D").count(), 5);
    let o = run(dir.path(), &["summary", "--model", "original", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["total_params"], 801_419);
    assert_eq!(v["flatten_len"], 6656);
}

#[test]
fn oracle_drive_on_straight_road_is_fully_autonomous() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["drive", "--track", "straight", "--conditions", "day,sunny", "--driver", "oracle", "--duration", "60", "--out", "r.json"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("autonomy_percent: 100"));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("r.json")).unwrap()).unwrap();
    let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
    keys.sort();
    assert_eq!(keys, ["autonomy_percent", "collisions", "interventions", "mean_abs_offset_m", "ticks"]);
    assert_eq!(v["ticks"], 600);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["train"][..], &["drive", "--bogus"], &["teleport"], &["summary", "--model", "tiny"]] {
        let o = run(dir.path(), args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"), "{args:?}");
    }
}

#[test]
fn runtime_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["eval-offline", "--checkpoint", "missing.ddmv", "--data", "missing.ddds"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(dir.path(), &["drive", "--driver", "model"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn config_file_sets_values_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("drive.cfg"), "# short session\nduration = 20\ntrack = straight\n").unwrap();
    let o = run(dir.path(), &["drive", "--config", "drive.cfg"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("ticks: 200"));
    let o = run(dir.path(), &["drive", "--config", "drive.cfg", "--duration", "10"]);
    assert!(stdout(&o).contains("ticks: 100"));
    std::fs::write(dir.path().join("bad.cfg"), "durration = 20\n").unwrap();
    let o = run(dir.path(), &["drive", "--config", "bad.cfg"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn data_train_eval_and_feature_maps() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(run(d, &["gen-data", "--samples", "40", "--seed", "3", "--out", "d.ddds"]).status.success());
    assert_eq!(std::fs::metadata(d.join("d.ddds")).unwrap().len(), 9 + 40 * 19204);

    assert!(run(d, &["gen-data", "--samples", "40", "--raw", "--out", "raw.ddds"]).status.success());
    let o = run(d, &["balance", "--input", "raw.ddds", "--target", "20", "--mirror", "--out", "b.ddds", "--json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["samples"].as_u64().unwrap() >= 40);

    let o = run(d, &["train", "--data", "d.ddds", "--epochs", "1", "--batch-size", "20", "--out", "m.ddmv"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("steps_per_epoch: 2"));

    let o = run(d, &["eval-offline", "--checkpoint", "m.ddmv", "--data", "d.ddds"]);
    assert!(stdout(&o).contains("zero_baseline_mse"));

    let o = run(d, &["feature-maps", "--checkpoint", "m.ddmv", "--layer", "0", "--out", "maps"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let pgm = std::fs::read(d.join("maps/layer0_map00.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n80 60\n255\n"));
    assert_eq!(std::fs::read_dir(d.join("maps")).unwrap().count(), 24 + 2);
    let o = run(d, &["feature-maps", "--model", "modified", "--layer", "7"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bench_reports_both_models() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["bench", "--frames", "5", "--warmup", "1", "--json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["models"][0]["params"], 801_419);
    assert_eq!(v["models"][1]["params"], 303_180);
    assert!(v["latency_ratio"].as_f64().unwrap() > 0.0);
}
