//! C interface to the vocoder fingerprinting toolkit.
//!
//! Objects cross the boundary as opaque handles created by `*_load` /
//! `*_extract` functions and released by the matching `*_free`. Every
//! fallible call returns a [`VfpStatus`]; the message of the most recent
//! failure on the calling thread is available from [`vfp_last_error`].
//! Panics are caught and reported as `VFP_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use vocoder_fingerprint::corpus::{read_wav, Waveform};
use vocoder_fingerprint::eval::{precision_recall_f1, MetricCounts};
use vocoder_fingerprint::features::{Extractor, FeatureConfig, FeatureKind, FeatureMatrix};
use vocoder_fingerprint::nnet::model::features_to_input;
use vocoder_fingerprint::nnet::{Checkpoint, Model};
use vocoder_fingerprint::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VfpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    MissingInput = 4,
    Format = 5,
    Unsupported = 6,
    Length = 7,
    Dimension = 8,
    Config = 9,
    Data = 10,
    Checkpoint = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VfpFeatureKind {
    Lfcc = 0,
    Mfcc = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VfpScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// A loaded classifier with its class names and feature configuration.
pub struct VfpModel {
    model: Model<f32>,
    class_names: Vec<CString>,
    feature_config: Option<FeatureConfig>,
}

/// A feature matrix, frames by dims, row-major.
pub struct VfpFeatures {
    matrix: FeatureMatrix,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> VfpStatus {
    match e {
        Error::Io { .. } | Error::OutputExists(_) => VfpStatus::Io,
        Error::MissingInput(_) => VfpStatus::MissingInput,
        Error::Format(_) => VfpStatus::Format,
        Error::UnsupportedEncoding(_) => VfpStatus::Unsupported,
        Error::NonFiniteSample(_) | Error::Data(_) | Error::NonFiniteGradient { .. } => VfpStatus::Data,
        Error::Length(_) => VfpStatus::Length,
        Error::Dimension(_) => VfpStatus::Dimension,
        Error::Config(_) | Error::TrainingAborted { .. } => VfpStatus::Config,
        Error::Checkpoint(_) => VfpStatus::Checkpoint,
    }
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), (VfpStatus, String)>) -> VfpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VfpStatus::Ok,
        Ok(Err((status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            VfpStatus::Panic
        }
    }
}

fn lib(e: Error) -> (VfpStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (VfpStatus, String) {
    (VfpStatus::NullPointer, format!("{what} is null"))
}

fn invalid(message: impl Into<String>) -> (VfpStatus, String) {
    (VfpStatus::InvalidArgument, message.into())
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, (VfpStatus, String)> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| invalid("path is not valid UTF-8"))
}

fn kind_config(kind: VfpFeatureKind) -> FeatureConfig {
    FeatureConfig::for_kind(match kind {
        VfpFeatureKind::Lfcc => FeatureKind::Lfcc,
        VfpFeatureKind::Mfcc => FeatureKind::Mfcc,
    })
}

fn boxed_features(
    samples: Vec<f64>,
    sample_rate_hz: u32,
    cfg: &FeatureConfig,
    out: *mut *mut VfpFeatures,
) -> Result<(), (VfpStatus, String)> {
    let w = Waveform::new(samples, sample_rate_hz).map_err(lib)?;
    let matrix = Extractor::new(cfg).and_then(|x| x.extract(&w, "ffi")).map_err(lib)?;
    unsafe { *out = Box::into_raw(Box::new(VfpFeatures { matrix })) };
    Ok(())
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn vfp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Loads a checkpoint file. On success `*out` receives a handle to release
/// with [`vfp_model_free`].
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vfp_model_load(path: *const c_char, out: *mut *mut VfpModel) -> VfpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let path = path_arg(path)?;
        let ck = Checkpoint::read(&path).map_err(lib)?;
        let model = ck.to_model::<f32>().map_err(lib)?;
        let class_names = ck
            .class_names
            .iter()
            .map(|n| CString::new(n.as_str()).map_err(|_| invalid("class name contains NUL")))
            .collect::<Result<_, _>>()?;
        *out = Box::into_raw(Box::new(VfpModel {
            model,
            class_names,
            feature_config: ck.feature_config,
        }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`vfp_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn vfp_model_free(model: *mut VfpModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of classes, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vfp_model_num_classes(model: *const VfpModel) -> usize {
    model.as_ref().map_or(0, |m| m.class_names.len())
}

/// Length of the fingerprint vector, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vfp_model_fingerprint_dim(model: *const VfpModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.config().fingerprint_dim())
}

/// Feature dimensions the model expects, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vfp_model_feature_dims(model: *const VfpModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.config().input_coeffs)
}

/// Name of class `index`, or null when out of range. Owned by the model.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vfp_model_class_name(model: *const VfpModel, index: usize) -> *const c_char {
    model
        .as_ref()
        .and_then(|m| m.class_names.get(index))
        .map_or(ptr::null(), |c| c.as_ptr())
}

/// Extracts features from `n_samples` samples in [-1, 1].
///
/// # Safety
/// `samples` must point to `n_samples` doubles and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn vfp_features_extract(
    samples: *const f64,
    n_samples: usize,
    sample_rate_hz: u32,
    kind: VfpFeatureKind,
    out: *mut *mut VfpFeatures,
) -> VfpStatus {
    guard(|| {
        if out.is_null() || samples.is_null() {
            return Err(null(if out.is_null() { "out" } else { "samples" }));
        }
        *out = ptr::null_mut();
        let samples = std::slice::from_raw_parts(samples, n_samples).to_vec();
        boxed_features(samples, sample_rate_hz, &kind_config(kind), out)
    })
}

/// Extracts features with the configuration stored in the model's checkpoint.
///
/// # Safety
/// `model` must be a live handle, `samples` point to `n_samples` doubles
/// and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn vfp_features_extract_for_model(
    model: *const VfpModel,
    samples: *const f64,
    n_samples: usize,
    sample_rate_hz: u32,
    out: *mut *mut VfpFeatures,
) -> VfpStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() || samples.is_null() {
            return Err(null(if out.is_null() { "out" } else { "samples" }));
        }
        *out = ptr::null_mut();
        let cfg = model
            .feature_config
            .as_ref()
            .ok_or_else(|| (VfpStatus::Checkpoint, "checkpoint records no feature configuration".to_string()))?;
        let samples = std::slice::from_raw_parts(samples, n_samples).to_vec();
        boxed_features(samples, sample_rate_hz, cfg, out)
    })
}

/// Reads a 16-bit mono WAV file and extracts features.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn vfp_features_from_wav(
    path: *const c_char,
    kind: VfpFeatureKind,
    out: *mut *mut VfpFeatures,
) -> VfpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let w = read_wav(path_arg(path)?).map_err(lib)?;
        let sr = w.sample_rate_hz();
        boxed_features(w.into_samples(), sr, &kind_config(kind), out)
    })
}

/// # Safety
/// `features` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vfp_features_frames(features: *const VfpFeatures) -> usize {
    features.as_ref().map_or(0, |f| f.matrix.frames)
}

/// # Safety
/// `features` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vfp_features_dims(features: *const VfpFeatures) -> usize {
    features.as_ref().map_or(0, |f| f.matrix.dims)
}

/// Row-major `frames * dims` values owned by the handle, or null.
///
/// # Safety
/// `features` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vfp_features_data(features: *const VfpFeatures) -> *const f32 {
    features.as_ref().map_or(ptr::null(), |f| f.matrix.values.as_ptr())
}

/// # Safety
/// `features` must come from an extract call and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn vfp_features_free(features: *mut VfpFeatures) {
    if !features.is_null() {
        drop(Box::from_raw(features));
    }
}

unsafe fn infer(
    model: *const VfpModel,
    features: *const VfpFeatures,
) -> Result<(Vec<f32>, Vec<f32>), (VfpStatus, String)> {
    let model = model.as_ref().ok_or_else(|| null("model"))?;
    let features = features.as_ref().ok_or_else(|| null("features"))?;
    let input = features_to_input(&[&features.matrix]).map_err(lib)?;
    let (logits, fp) = model.model.infer(input).map_err(lib)?;
    Ok((logits.into_data(), fp.into_data()))
}

/// Classifies one utterance. `*out_class` receives the arg-max class; when
/// `out_logits` is non-null it receives `logits_len` logits, which must
/// equal the class count.
///
/// # Safety
/// Handles must be live; `out_logits` must be null or hold `logits_len`
/// floats.
#[no_mangle]
pub unsafe extern "C" fn vfp_model_classify(
    model: *const VfpModel,
    features: *const VfpFeatures,
    out_class: *mut usize,
    out_logits: *mut f32,
    logits_len: usize,
) -> VfpStatus {
    guard(|| {
        if out_class.is_null() {
            return Err(null("out_class"));
        }
        let (logits, _) = infer(model, features)?;
        if !out_logits.is_null() {
            if logits_len != logits.len() {
                return Err(invalid(format!("logits buffer holds {logits_len}, model has {} classes", logits.len())));
            }
            ptr::copy_nonoverlapping(logits.as_ptr(), out_logits, logits.len());
        }
        let mut best = 0;
        for (i, &v) in logits.iter().enumerate() {
            if v > logits[best] {
                best = i;
            }
        }
        *out_class = best;
        Ok(())
    })
}

/// Writes the fingerprint (pooled embedding) into `out`, which must hold
/// exactly [`vfp_model_fingerprint_dim`] floats.
///
/// # Safety
/// Handles must be live and `out` hold `out_len` floats.
#[no_mangle]
pub unsafe extern "C" fn vfp_model_embed(
    model: *const VfpModel,
    features: *const VfpFeatures,
    out: *mut f32,
    out_len: usize,
) -> VfpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let (_, fp) = infer(model, features)?;
        if out_len != fp.len() {
            return Err(invalid(format!("buffer holds {out_len}, fingerprint has {}", fp.len())));
        }
        ptr::copy_nonoverlapping(fp.as_ptr(), out, fp.len());
        Ok(())
    })
}

/// Precision, recall and F1 from one-vs-rest counts; zero denominators give 0.
#[no_mangle]
pub extern "C" fn vfp_metrics_f1(tp: u64, fp: u64, fn_: u64) -> VfpScores {
    let s = precision_recall_f1(MetricCounts { tp, fp, fn_, tn: 0 });
    VfpScores {
        precision: s.precision,
        recall: s.recall,
        f1: s.f1,
    }
}
