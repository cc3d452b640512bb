use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mmcounter::profile::SpatialBreathingProfile;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mmcounter"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn demo_scene() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/scenes/demo_two_person.json")
}

/// Rows in `groups` orthogonal blocks of `per` nearly identical rows.
fn grouped_profile(groups: usize, per: usize) -> SpatialBreathingProfile {
    let cols = 8;
    let mut rows = Vec::new();
    for g in 0..groups {
        for i in 0..per {
            let mut row = vec![0.0; cols];
            row[g] = 1.0;
            row[(g + 1 + i) % cols] += 0.01;
            let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            rows.push(row.into_iter().map(|v| v / n).collect());
        }
    }
    SpatialBreathingProfile {
        columns: (0..cols).map(|j| (j, 0)).collect(),
        rows,
    }
}

#[test]
fn help_lists_defaults() {
    let out = run(&["count", "--help"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for flag in ["--m", "--bl", "--bh", "--bs", "--n ", "--seed", "--estimator", "--model", "--k-max"] {
        assert!(text.contains(flag), "{flag} missing from help");
    }
    assert!(text.contains("[default: 0.2]"));
}

#[test]
fn resolutions_of_full_preset() {
    let out = run(&["resolutions"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["range_resolution"].as_f64().unwrap() - 0.0421).abs() < 1e-4);
}

#[test]
fn malformed_scene_is_parse_error_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("bad.json");
    std::fs::write(&scene, "{\n  \"persons\": [\n    {\"x\": 1.0,,}\n  ]\n}\n").unwrap();
    let out = run(&["simulate", p(&scene), p(&dir.path().join("o.mmcr"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn empty_scene_records_and_counts_zero() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("empty.json");
    std::fs::write(&scene, "{}").unwrap();
    let rec = dir.path().join("empty.mmcr");
    let out = run(&["simulate", p(&scene), p(&rec), "--preset", "low-res"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    // No silent overwrite.
    let again = run(&["simulate", p(&scene), p(&rec), "--preset", "low-res"]);
    assert_eq!(again.status.code(), Some(2));
    let forced = run(&["simulate", p(&scene), p(&rec), "--preset", "low-res", "--force"]);
    assert!(forced.status.success());

    let out = run(&["count", p(&rec)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["count"], 0);

    let out_dir = dir.path().join("processed");
    let out = run(&["process", p(&rec), "--out-dir", p(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["points.csv", "micromotion.csv", "ra_map.csv", "ra_map.pgm", "sources.csv", "sources.json", "profile.csv"] {
        assert!(out_dir.join(f).is_file(), "{f}");
    }
    let again = run(&["process", p(&rec), "--out-dir", p(&out_dir)]);
    assert_eq!(again.status.code(), Some(2));
}

#[test]
fn corrupt_recording_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("junk.mmcr");
    std::fs::write(&rec, b"NOTMMCR-garbage-garbage").unwrap();
    assert_eq!(run(&["process", p(&rec), "--out-dir", p(dir.path())]).status.code(), Some(3));
    assert_eq!(run(&["count", p(&rec)]).status.code(), Some(3));
}

#[test]
fn missing_input_exits_4() {
    assert_eq!(run(&["count", "/nonexistent/x.mmcr"]).status.code(), Some(4));
}

#[test]
fn profile_counts_and_estimator_flags() {
    let dir = tempfile::tempdir().unwrap();
    let prof = dir.path().join("three.csv");
    grouped_profile(3, 3).save(&prof).unwrap();
    let out = run(&["count", p(&prof)]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["count"], 3);
    assert_eq!(v["method"], "clustering");

    let empty = dir.path().join("empty.csv");
    SpatialBreathingProfile::empty(vec![(1, 2), (3, 4)]).save(&empty).unwrap();
    let out = run(&["count", p(&empty)]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["count"], 0);

    let out = run(&["count", p(&prof), "--estimator", "classifier"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8(out.stderr).unwrap().contains("clustering"));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "point:1:2,oops\n0.1,0.2\n").unwrap();
    assert_eq!(run(&["count", p(&bad)]).status.code(), Some(2));
}

#[test]
fn eval_reports_perfect_predictions_and_missing_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut manifest = String::new();
    for (i, c) in [2usize, 3, 5, 7, 2, 3, 5, 7].iter().enumerate() {
        let name = format!("p{i}.csv");
        grouped_profile(*c, 2).save(&dir.path().join(&name)).unwrap();
        manifest.push_str(&format!("{{\"profile_path\":\"{name}\",\"label\":{c}}}\n"));
    }
    let m = dir.path().join("manifest.jsonl");
    std::fs::write(&m, &manifest).unwrap();
    let out_dir = dir.path().join("report");
    let out = run(&["eval", p(&m), "--out-dir", p(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["accuracy"], 1.0);
    assert_eq!(report["weighted"]["f1"], 1.0);
    assert_eq!(report["mae"], 0.0);
    assert_eq!(report["mse"], 0.0);
    let csv = std::fs::read_to_string(out_dir.join("confusion.csv")).unwrap();
    assert!(csv.starts_with("truth\\pred,2,3,5,7,OOD\n2,2,0,0,0,0\n"), "{csv}");
    let first = std::fs::read(out_dir.join("report.json")).unwrap();
    let again = run(&["eval", p(&m), "--out-dir", p(&out_dir), "--force"]);
    assert!(again.status.success());
    assert_eq!(first, std::fs::read(out_dir.join("report.json")).unwrap());

    manifest.push_str("{\"profile_path\":\"gone_a.csv\",\"label\":2}\n{\"profile_path\":\"gone_b.csv\",\"label\":3}\n");
    std::fs::write(&m, &manifest).unwrap();
    let out = run(&["eval", p(&m)]);
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("gone_a.csv") && err.contains("gone_b.csv"), "{err}");
}

#[test]
fn demo_scene_counts_two_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("demo.mmcr");
    let out = run(&["simulate", p(&demo_scene()), p(&rec), "--preset", "compact"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let a = run(&["count", p(&rec), "--seed", "3"]);
    let b = run(&["count", p(&rec), "--seed", "3"]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["count"], 2, "{v}");
}
