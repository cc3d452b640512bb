use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use mmcounter_ffi::*;

fn last_error() -> String {
    let p = mmc_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

#[test]
fn resolutions_of_full_preset() {
    let mut r = MmcResolutions::default();
    let st = unsafe { mmc_resolutions(c("full").as_ptr(), &mut r) };
    assert_eq!(st, MmcStatus::Ok);
    assert!((r.range_resolution - 0.0421).abs() < 1e-4);
    assert!((r.velocity_resolution - 0.0212).abs() < 1e-4);
}

#[test]
fn bad_arguments_report_errors() {
    let mut r = MmcResolutions::default();
    assert_eq!(unsafe { mmc_resolutions(ptr::null(), &mut r) }, MmcStatus::InvalidArgument);
    assert!(last_error().contains("preset_name"));
    assert_eq!(unsafe { mmc_resolutions(c("tiny").as_ptr(), &mut r) }, MmcStatus::Parse);
    assert!(last_error().contains("tiny"));
    let mut prof = ptr::null_mut();
    let st = unsafe { mmc_profile_load(c("/nonexistent/profile.csv").as_ptr(), &mut prof) };
    assert_eq!(st, MmcStatus::Missing);
    assert!(prof.is_null());
}

#[test]
fn profile_counts_two_groups() {
    let rows: Vec<f64> = [
        [1.0, 0.01, 0.0, 0.0],
        [0.99, 0.0, 0.02, 0.0],
        [0.0, 0.0, 1.0, 0.01],
        [0.01, 0.0, 0.99, 0.0],
    ]
    .iter()
    .flatten()
    .copied()
    .collect();
    let pipe = mmc_pipeline_new();
    let mut prof = ptr::null_mut();
    unsafe {
        assert_eq!(mmc_profile_from_rows(rows.as_ptr(), 4, 4, &mut prof), MmcStatus::Ok);
        assert_eq!((mmc_profile_rows(prof), mmc_profile_cols(prof)), (4, 4));
        let mut out = MmcCount::default();
        assert_eq!(mmc_profile_count(pipe, prof, &mut out), MmcStatus::Ok);
        assert_eq!(out.count, 2);
        assert_eq!(out.method, 0);
        assert_eq!(out.confidence, 1.0);
        mmc_profile_free(prof);
        mmc_pipeline_free(pipe);
    }
}

#[test]
fn classifier_without_model_is_missing() {
    let pipe = mmc_pipeline_new();
    unsafe {
        let st = mmc_pipeline_load_model(pipe, c("/nonexistent/model.mmcm").as_ptr());
        assert_eq!(st, MmcStatus::Missing);
        mmc_pipeline_free(pipe);
    }
}

#[test]
fn metrics_match_hand_arithmetic() {
    let (mut mae, mut mse) = (0.0, 0.0);
    let pred = [2usize, 3];
    let truth = [3usize, 3];
    assert_eq!(
        unsafe { mmc_counting_errors(pred.as_ptr(), truth.as_ptr(), 2, &mut mae, &mut mse) },
        MmcStatus::Ok
    );
    assert_eq!((mae, mse), (0.5, 0.5));
    assert_eq!(
        unsafe { mmc_counting_errors(pred.as_ptr(), truth.as_ptr(), 0, &mut mae, &mut mse) },
        MmcStatus::Corrupt
    );

    let labels = [2usize, 3, 5, 7];
    let p = [0.8, 0.6, 0.9, 0.7];
    let r = [1.0; 4];
    let w = labels.map(|c| 1.0 / c as f64);
    let mut m = MmcWeightedMetrics::default();
    let st = unsafe { mmc_weighted_metrics(labels.as_ptr(), p.as_ptr(), r.as_ptr(), w.as_ptr(), 4, &mut m) };
    assert_eq!(st, MmcStatus::Ok);
    let expect = (0.8 / 2.0 + 0.6 / 3.0 + 0.9 / 5.0 + 0.7 / 7.0) / (1.0 / 2.0 + 1.0 / 3.0 + 1.0 / 5.0 + 1.0 / 7.0);
    assert!((m.precision - expect).abs() < 1e-12);
    assert!((m.precision - 0.7482).abs() < 1e-4);
    assert_eq!(m.recall, 1.0);
}

#[test]
fn empty_scene_round_trip_counts_nobody() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("empty.json");
    std::fs::write(&scene, "{}").unwrap();
    let rec = dir.path().join("empty.mmcr");
    let scene_c = c(scene.to_str().unwrap());
    let rec_c = c(rec.to_str().unwrap());
    unsafe {
        assert_eq!(mmc_simulate_file(scene_c.as_ptr(), c("low-res").as_ptr(), rec_c.as_ptr(), 0), MmcStatus::Ok);
        assert_eq!(mmc_simulate_file(scene_c.as_ptr(), c("low-res").as_ptr(), rec_c.as_ptr(), 0), MmcStatus::Parse);
        let pipe = mmc_pipeline_new();
        let mut out = MmcCount::default();
        assert_eq!(mmc_count_recording(pipe, rec_c.as_ptr(), &mut out), MmcStatus::Ok);
        assert_eq!(out.count, 0);
        mmc_pipeline_free(pipe);
    }
}

#[test]
fn generated_header_declares_the_api() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/mmcounter.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "mmc_last_error",
        "mmc_resolutions",
        "mmc_simulate_file",
        "mmc_pipeline_new",
        "mmc_count_recording",
        "mmc_profile_count",
        "mmc_weighted_metrics",
        "MMC_STATUS_MISSING = 4",
        "typedef struct MmcPipeline MmcPipeline",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
    // Compile the header as C when a compiler is around.
    if let Ok(status) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(&header)
        .status()
    {
        assert!(status.success(), "header does not compile as C");
    }
}
