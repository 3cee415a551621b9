//! C interface to the simulator.
//!
//! Configs and finished runs are opaque handles created and destroyed by
//! this library. Every fallible call returns an [`FsslStatus`]; on failure
//! [`fssl_last_error`] describes what went wrong on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use fssl_core::config::FederationConfig;
use fssl_core::federation::Experiment;
use fssl_core::metrics::{save_csv, MetricsRecord};
use fssl_core::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FsslStatus {
    Ok = 0,
    /// Invalid configuration or argument value.
    Config = 1,
    /// Data, I/O or numerical failure while running.
    Runtime = 2,
    NullPointer = 3,
    InvalidUtf8 = 4,
    OutOfRange = 5,
    /// A bug inside the library; the handle involved should be freed.
    Panic = 6,
}

/// A validated experiment configuration.
pub struct FsslConfig {
    inner: FederationConfig,
}

/// The per-round metrics of a finished run.
pub struct FsslRun {
    metrics: Vec<MetricsRecord>,
}

/// Test accuracies of one round. Losses and pseudo-label accuracy are NaN
/// when the round produced none.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct FsslRoundMetrics {
    pub round: usize,
    pub acc_sm: f64,
    pub acc_um: f64,
    pub acc_em: f64,
    pub loss_sup: f64,
    pub loss_unsup: f64,
    pub pseudo_acc: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(text).expect("nul bytes removed")));
}

fn fail(status: FsslStatus, msg: impl Into<String>) -> FsslStatus {
    set_error(msg);
    status
}

fn from_error(e: &Error) -> FsslStatus {
    let status = if e.exit_code() == 1 { FsslStatus::Config } else { FsslStatus::Runtime };
    fail(status, e.to_string())
}

fn guarded(f: impl FnOnce() -> FsslStatus) -> FsslStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(FsslStatus::Panic, "internal panic"),
    }
}

unsafe fn text<'a>(s: *const c_char) -> Result<&'a str, FsslStatus> {
    if s.is_null() {
        return Err(fail(FsslStatus::NullPointer, "string argument is null"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(FsslStatus::InvalidUtf8, "string argument is not UTF-8"))
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn fssl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses and validates a JSON config.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fssl_config_from_json(json: *const c_char, out: *mut *mut FsslConfig) -> FsslStatus {
    guarded(|| {
        if out.is_null() {
            return fail(FsslStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let json = match text(json) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match FederationConfig::from_json(json) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(FsslConfig { inner }));
                FsslStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// Replaces the run seed of a config.
///
/// # Safety
/// `config` must come from [`fssl_config_from_json`] and not be freed.
#[no_mangle]
pub unsafe extern "C" fn fssl_config_set_seed(config: *mut FsslConfig, seed: u64) -> FsslStatus {
    guarded(|| match config.as_mut() {
        Some(c) => {
            c.inner.seed = seed;
            FsslStatus::Ok
        }
        None => fail(FsslStatus::NullPointer, "config is null"),
    })
}

/// # Safety
/// `config` must be null or come from [`fssl_config_from_json`], freed once.
#[no_mangle]
pub unsafe extern "C" fn fssl_config_free(config: *mut FsslConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Runs the experiment to completion.
///
/// # Safety
/// `config` must be a live config handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fssl_run(config: *const FsslConfig, out: *mut *mut FsslRun) -> FsslStatus {
    guarded(|| {
        if out.is_null() {
            return fail(FsslStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let Some(config) = config.as_ref() else {
            return fail(FsslStatus::NullPointer, "config is null");
        };
        match Experiment::prepare(&config.inner).and_then(|e| e.run()) {
            Ok(output) => {
                *out = Box::into_raw(Box::new(FsslRun { metrics: output.metrics }));
                FsslStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// Number of recorded rounds, 0 for a null handle.
///
/// # Safety
/// `run` must be null or a live run handle.
#[no_mangle]
pub unsafe extern "C" fn fssl_run_round_count(run: *const FsslRun) -> usize {
    run.as_ref().map_or(0, |r| r.metrics.len())
}

/// Metrics of the `index`-th recorded round (0-based).
///
/// # Safety
/// `run` must be a live run handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fssl_run_metrics(run: *const FsslRun, index: usize, out: *mut FsslRoundMetrics) -> FsslStatus {
    guarded(|| {
        let (Some(run), false) = (run.as_ref(), out.is_null()) else {
            return fail(FsslStatus::NullPointer, "run or out is null");
        };
        let Some(m) = run.metrics.get(index) else {
            return fail(
                FsslStatus::OutOfRange,
                format!("round index {index} out of range, run has {}", run.metrics.len()),
            );
        };
        *out = FsslRoundMetrics {
            round: m.round,
            acc_sm: m.acc_sm,
            acc_um: m.acc_um,
            acc_em: m.acc_em,
            loss_sup: m.loss_sup.unwrap_or(f64::NAN),
            loss_unsup: m.loss_unsup.unwrap_or(f64::NAN),
            pseudo_acc: m.pseudo_acc.unwrap_or(f64::NAN),
        };
        FsslStatus::Ok
    })
}

/// Writes the run's metrics CSV to `path`.
///
/// # Safety
/// `run` must be a live run handle and `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fssl_run_write_csv(run: *const FsslRun, path: *const c_char) -> FsslStatus {
    guarded(|| {
        let Some(run) = run.as_ref() else {
            return fail(FsslStatus::NullPointer, "run is null");
        };
        let path = match text(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match save_csv(&run.metrics, Path::new(path)) {
            Ok(()) => FsslStatus::Ok,
            Err(e) => from_error(&e),
        }
    })
}

/// # Safety
/// `run` must be null or come from [`fssl_run`], freed once.
#[no_mangle]
pub unsafe extern "C" fn fssl_run_free(run: *mut FsslRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}
