//! C ABI over flowforge.
//!
//! Tables and models are opaque handles created by `ff_*_read`/`ff_*_load`
//! and released with the matching `ff_*_free`. Every fallible call returns
//! an [`FfStatus`]; on failure the message is available from
//! [`ff_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use flowforge::classifiers::ClassifierModel;
use flowforge::dataset::{FlowTable, Schema};
use flowforge::error::Error;
use flowforge::ingest::read_csv;
use flowforge::runner::{run_experiment, ExperimentConfig};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FfStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Data = 4,
    Io = 5,
    Panic = 6,
}

/// Opaque table handle.
pub struct FfTable {
    inner: FlowTable,
}

/// Opaque model handle.
pub struct FfModel {
    inner: ClassifierModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> FfStatus {
    match e {
        Error::Io { .. } => FfStatus::Io,
        Error::Stage { source, .. } => status_of(source),
        e if e.exit_code() == 1 => FfStatus::Config,
        _ => FfStatus::Data,
    }
}

fn guard(f: impl FnOnce() -> Result<(), FfStatus>) -> FfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FfStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            FfStatus::Panic
        }
    }
}

fn fail(e: Error) -> FfStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, FfStatus> {
    if p.is_null() {
        set_error("null path".into());
        return Err(FfStatus::NullArgument);
    }
    match CStr::from_ptr(p).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => {
            set_error("path is not valid UTF-8".into());
            Err(FfStatus::InvalidUtf8)
        }
    }
}

fn null_arg(what: &str) -> FfStatus {
    set_error(format!("null {what}"));
    FfStatus::NullArgument
}

/// Message of the last failure on this thread, or NULL. Owned by the
/// library; valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ff_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ff_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Reads a CSV with the schema at `schema_path`, or the bundled BoT-IoT
/// schema when `schema_path` is NULL.
///
/// # Safety
/// Paths must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ff_table_read_csv(
    path: *const c_char,
    schema_path: *const c_char,
    out: *mut *mut FfTable,
) -> FfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_arg("output pointer"));
        }
        let path = path_arg(path)?;
        let schema = if schema_path.is_null() {
            Schema::bot_iot()
        } else {
            Schema::from_json_file(path_arg(schema_path)?).map_err(fail)?
        };
        let inner = read_csv(path, &schema).map_err(fail)?;
        *out = Box::into_raw(Box::new(FfTable { inner }));
        Ok(())
    })
}

/// Rows of `table`; 0 for NULL.
///
/// # Safety
/// `table` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ff_table_row_count(table: *const FfTable) -> usize {
    table.as_ref().map_or(0, |t| t.inner.row_count())
}

/// Columns of `table`; 0 for NULL.
///
/// # Safety
/// `table` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ff_table_column_count(table: *const FfTable) -> usize {
    table.as_ref().map_or(0, |t| t.inner.columns().len())
}

/// # Safety
/// `table` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ff_table_free(table: *mut FfTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Loads a model JSON written by `flowforge train`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ff_model_load(path: *const c_char, out: *mut *mut FfModel) -> FfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_arg("output pointer"));
        }
        let inner = ClassifierModel::load(path_arg(path)?).map_err(fail)?;
        *out = Box::into_raw(Box::new(FfModel { inner }));
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ff_model_num_features(model: *const FfModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.feature_names.len())
}

/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ff_model_num_classes(model: *const FfModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.num_classes())
}

/// # Safety
/// `model` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ff_model_free(model: *mut FfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Predicts the class index of one feature vector, in model feature order
/// and already normalized to [0,1].
///
/// # Safety
/// `row` must point to `len` doubles; `out_class` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ff_model_predict(
    model: *const FfModel,
    row: *const f64,
    len: usize,
    out_class: *mut u32,
) -> FfStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null_arg("model"))?;
        if row.is_null() || out_class.is_null() {
            return Err(null_arg("row or output pointer"));
        }
        let row = std::slice::from_raw_parts(row, len);
        *out_class = model.inner.predict(row).map_err(fail)?;
        Ok(())
    })
}

/// Chi-square statistic and degrees of freedom between two integer-coded
/// columns of length `n`.
///
/// # Safety
/// `feature` and `target` must point to `n` values; outputs must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ff_chi_square(
    feature: *const u32,
    target: *const u32,
    n: usize,
    out_statistic: *mut f64,
    out_dof: *mut usize,
) -> FfStatus {
    guard(|| {
        if feature.is_null() || target.is_null() || out_statistic.is_null() || out_dof.is_null() {
            return Err(null_arg("argument"));
        }
        let f = std::slice::from_raw_parts(feature, n);
        let t = std::slice::from_raw_parts(target, n);
        let (stat, dof) = flowforge::chi_square_statistic(f, t).map_err(fail)?;
        *out_statistic = stat;
        *out_dof = dof;
        Ok(())
    })
}

/// Runs the experiment described by a JSON config file. On success
/// `*out_report` receives the report JSON, to be released with
/// [`ff_string_free`].
///
/// # Safety
/// `config_path` must be a NUL-terminated string; `out_report` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ff_run_experiment(config_path: *const c_char, out_report: *mut *mut c_char) -> FfStatus {
    guard(|| {
        if out_report.is_null() {
            return Err(null_arg("output pointer"));
        }
        let config = ExperimentConfig::from_json_file(path_arg(config_path)?).map_err(fail)?;
        let report = run_experiment(&config).map_err(fail)?;
        let json = CString::new(report.to_json()).expect("JSON has no NUL bytes");
        *out_report = json.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ff_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
