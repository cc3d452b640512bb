//! C interface to the mmcounter pipeline.
//!
//! Every fallible function returns an [`MmcStatus`]. On failure the message
//! of the last error on the calling thread is available from
//! [`mmc_last_error`]. Handles are opaque; each `*_new`/`*_load` has a
//! matching `*_free`.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use mmcounter::classifier::AttentionClassifier;
use mmcounter::counting::CountMethod;
use mmcounter::metrics::{counting_errors, weighted_metrics};
use mmcounter::mmcr::{MmcrReader, MmcrWriter, RecordingHeader};
use mmcounter::pipeline::{self, Estimator, PipelineConfig};
use mmcounter::profile::SpatialBreathingProfile;
use mmcounter::sim::{Scene, Simulator};
use mmcounter::{Error, Preset};

/// Status codes; the non-zero values match the command line exit codes
/// where one exists.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmcStatus {
    Ok = 0,
    /// Null pointer, invalid UTF-8 or out-of-range argument.
    InvalidArgument = 1,
    /// Malformed input or configuration.
    Parse = 2,
    Corrupt = 3,
    Missing = 4,
    Internal = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MmcResolutions {
    pub range_resolution: f64,
    pub velocity_resolution: f64,
    pub max_range: f64,
    pub max_velocity: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MmcCount {
    pub count: usize,
    /// Winning votes over the number of augmentations.
    pub confidence: f64,
    /// 0 clustering, 1 attention classifier.
    pub method: c_int,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MmcWeightedMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Pipeline configuration plus an optional classifier.
pub struct MmcPipeline {
    config: PipelineConfig,
    model: Option<AttentionClassifier>,
}

pub struct MmcProfile {
    profile: SpatialBreathingProfile,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MmcStatus {
    match e.exit_code() {
        2 => MmcStatus::Parse,
        3 => MmcStatus::Corrupt,
        4 => MmcStatus::Missing,
        _ => MmcStatus::Internal,
    }
}

struct ArgError(String);

enum Failure {
    Arg(ArgError),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<ArgError> for Failure {
    fn from(e: ArgError) -> Self {
        Failure::Arg(e)
    }
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> MmcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MmcStatus::Ok,
        Ok(Err(Failure::Arg(ArgError(m)))) => {
            set_error(m);
            MmcStatus::InvalidArgument
        }
        Ok(Err(Failure::Lib(e))) => {
            let s = status_of(&e);
            set_error(e.to_string());
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            MmcStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, ArgError> {
    if p.is_null() {
        return Err(ArgError(format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| ArgError(format!("{name} is not valid UTF-8")))
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), ArgError> {
    if p.is_null() {
        Err(ArgError(format!("{name} is null")))
    } else {
        Ok(())
    }
}

fn preset(name: &str) -> Result<Preset, Failure> {
    Ok(name.parse::<Preset>()?)
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mmc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mmc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Derived resolutions of a named preset (`full`, `low-res`, `compact`).
///
/// # Safety
/// `preset_name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mmc_resolutions(preset_name: *const c_char, out: *mut MmcResolutions) -> MmcStatus {
    guard(|| {
        let name = str_arg(preset_name, "preset_name")?;
        non_null(out, "out")?;
        let r = preset(name)?.config().derived_resolutions()?;
        *out = MmcResolutions {
            range_resolution: r.range_resolution,
            velocity_resolution: r.velocity_resolution,
            max_range: r.max_range,
            max_velocity: r.max_velocity,
        };
        Ok(())
    })
}

/// Simulates the scene JSON file into an `.mmcr` recording. Existing
/// output is only replaced when `overwrite` is non-zero.
///
/// # Safety
/// All pointers must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn mmc_simulate_file(
    scene_path: *const c_char,
    preset_name: *const c_char,
    out_path: *const c_char,
    overwrite: c_int,
) -> MmcStatus {
    guard(|| {
        let scene = Scene::load(&PathBuf::from(str_arg(scene_path, "scene_path")?))?;
        let radar = preset(str_arg(preset_name, "preset_name")?)?.config();
        let out = PathBuf::from(str_arg(out_path, "out_path")?);
        if out.exists() && overwrite == 0 {
            return Err(Error::Config(format!("{} exists", out.display())).into());
        }
        let sim = Simulator::new(&radar, &scene)?;
        let header = RecordingHeader::new(&radar, sim.meta().scene_hash.clone(), sim.meta().warnings.clone());
        let mut w = MmcrWriter::create(&out, header)?;
        for frame in sim.frames() {
            w.write_frame(&frame)?;
        }
        w.finish()?;
        Ok(())
    })
}

/// New pipeline with default parameters and the clustering estimator.
#[no_mangle]
pub extern "C" fn mmc_pipeline_new() -> *mut MmcPipeline {
    Box::into_raw(Box::new(MmcPipeline {
        config: PipelineConfig::default(),
        model: None,
    }))
}

/// # Safety
/// `p` must come from [`mmc_pipeline_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mmc_pipeline_free(p: *mut MmcPipeline) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Breathing band edges (Hz) and minimum breathing score.
///
/// # Safety
/// `p` must be a live pipeline handle.
#[no_mangle]
pub unsafe extern "C" fn mmc_pipeline_set_breathing(p: *mut MmcPipeline, low_hz: f64, high_hz: f64, min_quality: f64) -> MmcStatus {
    guard(|| {
        non_null(p, "pipeline")?;
        let band = &mut (*p).config.band;
        band.low_hz = low_hz;
        band.high_hz = high_hz;
        band.min_quality = min_quality;
        Ok(())
    })
}

/// Seed, ICA iteration count and minimum non-zero fraction.
///
/// # Safety
/// `p` must be a live pipeline handle.
#[no_mangle]
pub unsafe extern "C" fn mmc_pipeline_set_separation(
    p: *mut MmcPipeline,
    seed: u64,
    ica_iterations: usize,
    min_nonzero_fraction: f64,
) -> MmcStatus {
    guard(|| {
        non_null(p, "pipeline")?;
        let cfg = &mut (*p).config;
        cfg.seed = seed;
        cfg.ica_iterations = ica_iterations;
        cfg.min_nonzero_fraction = min_nonzero_fraction;
        Ok(())
    })
}

/// Loads a classifier checkpoint and switches the estimator to it.
///
/// # Safety
/// `p` must be a live pipeline handle and `model_path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mmc_pipeline_load_model(p: *mut MmcPipeline, model_path: *const c_char) -> MmcStatus {
    guard(|| {
        non_null(p, "pipeline")?;
        let path = PathBuf::from(str_arg(model_path, "model_path")?);
        let model = AttentionClassifier::load(&path)?;
        let pipe = &mut *p;
        pipe.model = Some(model);
        pipe.config.estimator = Estimator::Classifier;
        pipe.config.model_path = Some(path);
        Ok(())
    })
}

fn write_count(out: *mut MmcCount, est: &mmcounter::counting::CountEstimate) {
    // SAFETY: callers check `out` for null first.
    unsafe {
        *out = MmcCount {
            count: est.count,
            confidence: est.confidence,
            method: match est.method {
                CountMethod::Clustering => 0,
                CountMethod::AttentionClassifier => 1,
            },
        };
    }
}

/// Runs the whole pipeline on an `.mmcr` recording.
///
/// # Safety
/// `p` must be a live pipeline handle, `path` a NUL-terminated string and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mmc_count_recording(p: *const MmcPipeline, path: *const c_char, out: *mut MmcCount) -> MmcStatus {
    guard(|| {
        non_null(p, "pipeline")?;
        non_null(out, "out")?;
        let pipe = &*p;
        let reader = MmcrReader::open(&PathBuf::from(str_arg(path, "path")?))?;
        let radar = reader.config().clone();
        let result = pipeline::run(&radar, reader, &pipe.config, pipe.model.as_ref())?;
        write_count(out, &result.estimate);
        Ok(())
    })
}

/// Loads a profile CSV.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mmc_profile_load(path: *const c_char, out: *mut *mut MmcProfile) -> MmcStatus {
    guard(|| {
        non_null(out, "out")?;
        let profile = SpatialBreathingProfile::load(&PathBuf::from(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(MmcProfile { profile }));
        Ok(())
    })
}

/// Builds a profile from a row-major `rows x cols` matrix. Columns are
/// labelled `point:<j>:0`. Rows are used as given.
///
/// # Safety
/// `data` must point to `rows * cols` doubles and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mmc_profile_from_rows(
    data: *const f64,
    rows: usize,
    cols: usize,
    out: *mut *mut MmcProfile,
) -> MmcStatus {
    guard(|| {
        non_null(out, "out")?;
        if rows > 0 {
            non_null(data, "data")?;
        }
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| ArgError("rows * cols overflows".into()))?;
        let values = if len == 0 { &[][..] } else { std::slice::from_raw_parts(data, len) };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ArgError("profile values must be finite".into()).into());
        }
        let profile = SpatialBreathingProfile {
            columns: (0..cols).map(|j| (j, 0)).collect(),
            rows: values.chunks(cols.max(1)).map(<[f64]>::to_vec).collect(),
        };
        *out = Box::into_raw(Box::new(MmcProfile { profile }));
        Ok(())
    })
}

/// # Safety
/// `p` must be a live profile handle.
#[no_mangle]
pub unsafe extern "C" fn mmc_profile_rows(p: *const MmcProfile) -> usize {
    if p.is_null() {
        0
    } else {
        (*p).profile.n_rows()
    }
}

/// # Safety
/// `p` must be a live profile handle.
#[no_mangle]
pub unsafe extern "C" fn mmc_profile_cols(p: *const MmcProfile) -> usize {
    if p.is_null() {
        0
    } else {
        (*p).profile.n_cols()
    }
}

/// # Safety
/// `p` must come from a profile constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mmc_profile_free(p: *mut MmcProfile) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Counts people in a profile with the pipeline's estimator.
///
/// # Safety
/// Handles must be live and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mmc_profile_count(p: *const MmcPipeline, profile: *const MmcProfile, out: *mut MmcCount) -> MmcStatus {
    guard(|| {
        non_null(p, "pipeline")?;
        non_null(profile, "profile")?;
        non_null(out, "out")?;
        let pipe = &*p;
        let est = pipeline::count_profile(&(*profile).profile, &pipe.config, pipe.model.as_ref())?;
        write_count(out, &est);
        Ok(())
    })
}

/// Mean absolute and mean squared counting error over `n` pairs.
///
/// # Safety
/// `pred` and `truth` must point to `n` values; `mae` and `mse` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mmc_counting_errors(
    pred: *const usize,
    truth: *const usize,
    n: usize,
    mae: *mut f64,
    mse: *mut f64,
) -> MmcStatus {
    guard(|| {
        for (ptr, name) in [(pred, "pred"), (truth, "truth")] {
            non_null(ptr, name)?;
        }
        non_null(mae, "mae")?;
        non_null(mse, "mse")?;
        let e = counting_errors(std::slice::from_raw_parts(pred, n), std::slice::from_raw_parts(truth, n))?;
        *mae = e.mae;
        *mse = e.mse;
        Ok(())
    })
}

/// Weighted precision, recall and F1 from per-class precision/recall and
/// class weights, all arrays of length `n` indexed alike.
///
/// # Safety
/// Array pointers must point to `n` values and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn mmc_weighted_metrics(
    labels: *const usize,
    precision: *const f64,
    recall: *const f64,
    weights: *const f64,
    n: usize,
    out: *mut MmcWeightedMetrics,
) -> MmcStatus {
    guard(|| {
        non_null(labels, "labels")?;
        for (ptr, name) in [(precision, "precision"), (recall, "recall"), (weights, "weights")] {
            non_null(ptr, name)?;
        }
        non_null(out, "out")?;
        let labels = std::slice::from_raw_parts(labels, n);
        let (p, r, w) = (
            std::slice::from_raw_parts(precision, n),
            std::slice::from_raw_parts(recall, n),
            std::slice::from_raw_parts(weights, n),
        );
        let per_class: BTreeMap<usize, (f64, f64)> = labels.iter().enumerate().map(|(i, &c)| (c, (p[i], r[i]))).collect();
        let weights: BTreeMap<usize, f64> = labels.iter().zip(w).map(|(&c, &w)| (c, w)).collect();
        if per_class.len() != n {
            return Err(ArgError("labels must be distinct".into()).into());
        }
        let m = weighted_metrics(&per_class, &weights)?;
        *out = MmcWeightedMetrics {
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
        };
        Ok(())
    })
}
