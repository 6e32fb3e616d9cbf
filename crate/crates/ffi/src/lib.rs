//! C ABI over a trained gridcast checkpoint.
//!
//! Every fallible function returns a [`GcStatus`]. On failure the message is
//! available from [`gc_last_error`] on the same thread until the next call.
//! Handles are opaque; free them with [`gc_model_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use gridcast::checkpoint::Checkpoint;
use gridcast::data::dataset::window_across;
use gridcast::data::{parse_timestamp, Dataset, SplitName, SplitTable};
use gridcast::evaluation;
use gridcast::forecaster::{Batch, GraphInputs, Model};
use gridcast::tensor::Tensor;
use gridcast::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Data = 4,
    Config = 5,
    Compatibility = 6,
    Numerical = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

impl From<&Error> for GcStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Io { .. } | Error::Csv { .. } | Error::Json { .. } => GcStatus::Io,
            Error::Config(_) => GcStatus::Config,
            Error::Contract(_) | Error::Dimension { .. } => GcStatus::InvalidArgument,
            Error::Compatibility(_) => GcStatus::Compatibility,
            Error::NonFiniteLoss { .. } | Error::UndefinedMape(_) => GcStatus::Numerical,
            _ => GcStatus::Data,
        }
    }
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GcMetrics {
    pub mae: f64,
    pub rmse: f64,
    /// Percent.
    pub mape: f64,
    /// Rows left out of MAPE because the actual value is near zero.
    pub mape_excluded: usize,
}

/// A loaded checkpoint together with the dataset it was trained on.
pub struct GcModel {
    checkpoint: Checkpoint,
    model: Model,
    graph: GraphInputs,
    splits: Vec<SplitTable>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn fail(status: GcStatus, msg: impl Into<String>) -> GcStatus {
    set_error(msg.into());
    status
}

fn guard(f: impl FnOnce() -> GcStatus) -> GcStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(GcStatus::Panic, "internal panic"),
    }
}

fn from_error(e: Error) -> GcStatus {
    let status = GcStatus::from(&e);
    fail(status, e.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, GcStatus> {
    if p.is_null() {
        return Err(fail(GcStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(GcStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn model_arg<'a>(p: *const GcModel) -> Result<&'a GcModel, GcStatus> {
    p.as_ref()
        .ok_or_else(|| fail(GcStatus::NullPointer, "model handle is null"))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], GcStatus> {
    if p.is_null() {
        return Err(fail(GcStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, need: usize) -> Result<&'a mut [f64], GcStatus> {
    if p.is_null() {
        return Err(fail(GcStatus::NullPointer, "output buffer is null"));
    }
    if len < need {
        return Err(fail(
            GcStatus::BufferTooSmall,
            format!("output buffer holds {len} values, {need} needed"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn open(checkpoint: &Path, data_dir: &Path) -> gridcast::Result<GcModel> {
    let data = Dataset::open(data_dir)?;
    let ckpt = Checkpoint::load(checkpoint)?;
    ckpt.check_compatible(&data)?;
    let model = ckpt.model()?;
    let splits = SplitName::ALL
        .into_iter()
        .map(|n| data.load_split(n))
        .collect::<gridcast::Result<Vec<_>>>()?;
    Ok(GcModel {
        graph: GraphInputs::from_graph(&data.graph),
        checkpoint: ckpt,
        model,
        splits,
    })
}

impl GcModel {
    fn predict_mw(&self, batch: &Batch) -> gridcast::Result<Vec<f64>> {
        self.checkpoint.to_mw(&self.model.predict(&self.graph, batch)?)
    }
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn gc_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn gc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a checkpoint and the processed dataset directory it was trained on.
///
/// # Safety
/// `checkpoint_path` and `data_dir` must be NUL-terminated strings and `out`
/// a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn gc_model_open(
    checkpoint_path: *const c_char,
    data_dir: *const c_char,
    out: *mut *mut GcModel,
) -> GcStatus {
    guard(|| {
        if out.is_null() {
            return fail(GcStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let ckpt = match str_arg(checkpoint_path, "checkpoint_path") {
            Ok(s) => s,
            Err(s) => return s,
        };
        let dir = match str_arg(data_dir, "data_dir") {
            Ok(s) => s,
            Err(s) => return s,
        };
        match open(Path::new(ckpt), Path::new(dir)) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(m));
                GcStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `model` must come from [`gc_model_open`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gc_model_free(model: *mut GcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gc_model_num_nodes(model: *const GcModel, out: *mut usize) -> GcStatus {
    guard(|| match (model_arg(model), out.is_null()) {
        (Err(s), _) => s,
        (_, true) => fail(GcStatus::NullPointer, "out is null"),
        (Ok(m), false) => {
            *out = m.graph.node_count();
            GcStatus::Ok
        }
    })
}

/// Input window length in hours.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gc_model_seq_len(model: *const GcModel, out: *mut usize) -> GcStatus {
    guard(|| match (model_arg(model), out.is_null()) {
        (Err(s), _) => s,
        (_, true) => fail(GcStatus::NullPointer, "out is null"),
        (Ok(m), false) => {
            *out = m.model.config.seq_len;
            GcStatus::Ok
        }
    })
}

/// Number of scaled features per node and hour.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gc_model_feature_width(model: *const GcModel, out: *mut usize) -> GcStatus {
    guard(|| match (model_arg(model), out.is_null()) {
        (Err(s), _) => s,
        (_, true) => fail(GcStatus::NullPointer, "out is null"),
        (Ok(m), false) => {
            *out = m.model.config.d_s;
            GcStatus::Ok
        }
    })
}

/// Copies the name of node `index` into `buf` with a trailing NUL. `needed`,
/// when non-null, receives the buffer size required including the NUL.
///
/// # Safety
/// `model` must be a live handle; `buf` must hold `buf_len` bytes.
#[no_mangle]
pub unsafe extern "C" fn gc_model_node_name(
    model: *const GcModel,
    index: usize,
    buf: *mut c_char,
    buf_len: usize,
    needed: *mut usize,
) -> GcStatus {
    guard(|| {
        let m = match model_arg(model) {
            Ok(m) => m,
            Err(s) => return s,
        };
        let Some(name) = m.graph.node_names.get(index) else {
            return fail(
                GcStatus::InvalidArgument,
                format!("node index {index} out of range for {} nodes", m.graph.node_count()),
            );
        };
        let bytes = name.as_bytes();
        if !needed.is_null() {
            *needed = bytes.len() + 1;
        }
        if buf.is_null() {
            return fail(GcStatus::NullPointer, "buf is null");
        }
        if buf_len < bytes.len() + 1 {
            return fail(
                GcStatus::BufferTooSmall,
                format!("name needs {} bytes, buffer holds {buf_len}", bytes.len() + 1),
            );
        }
        ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, bytes.len());
        *buf.add(bytes.len()) = 0;
        GcStatus::Ok
    })
}

/// Forecasts the load in MW one hour after `window_end` for every node,
/// using the dataset's own features. `window_end` is `YYYY-MM-DD HH:MM`.
///
/// # Safety
/// `model` must be a live handle, `window_end` a NUL-terminated string and
/// `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gc_model_predict_at(
    model: *const GcModel,
    window_end: *const c_char,
    out: *mut f64,
    out_len: usize,
) -> GcStatus {
    guard(|| {
        let m = match model_arg(model) {
            Ok(m) => m,
            Err(s) => return s,
        };
        let text = match str_arg(window_end, "window_end") {
            Ok(s) => s,
            Err(s) => return s,
        };
        let Some(end) = parse_timestamp(text) else {
            return fail(GcStatus::InvalidArgument, format!("malformed timestamp `{text}`"));
        };
        let dst = match out_slice(out, out_len, m.graph.node_count()) {
            Ok(d) => d,
            Err(s) => return s,
        };
        let result = window_across(&m.splits, end, m.model.config.seq_len)
            .and_then(|batch| m.predict_mw(&batch));
        match result {
            Ok(mw) => {
                dst[..mw.len()].copy_from_slice(&mw);
                GcStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Forecasts from caller-supplied scaled features laid out as
/// `[node][hour][feature]` (`num_nodes * seq_len * feature_width` values).
/// Writes one MW value per node.
///
/// # Safety
/// `features` must hold `features_len` doubles and `out` `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gc_model_predict_features(
    model: *const GcModel,
    features: *const f64,
    features_len: usize,
    out: *mut f64,
    out_len: usize,
) -> GcStatus {
    guard(|| {
        let m = match model_arg(model) {
            Ok(m) => m,
            Err(s) => return s,
        };
        let x = match slice_arg(features, features_len, "features") {
            Ok(x) => x,
            Err(s) => return s,
        };
        let (n, t, d) = (m.graph.node_count(), m.model.config.seq_len, m.model.config.d_s);
        if features_len != n * t * d {
            return fail(
                GcStatus::InvalidArgument,
                format!("expected {} feature values ({n}x{t}x{d}), got {features_len}", n * t * d),
            );
        }
        let dst = match out_slice(out, out_len, n) {
            Ok(d) => d,
            Err(s) => return s,
        };
        let result = Tensor::new(vec![n, t, d], x.to_vec())
            .and_then(|x| Batch::new((0..n).collect(), x, Tensor::zeros(&[n])))
            .and_then(|batch| m.predict_mw(&batch));
        match result {
            Ok(mw) => {
                dst[..n].copy_from_slice(&mw);
                GcStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// MAE, RMSE and MAPE over `n` paired values.
///
/// # Safety
/// `actual` and `predicted` must each hold `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gc_metrics(
    actual: *const f64,
    predicted: *const f64,
    n: usize,
    out: *mut GcMetrics,
) -> GcStatus {
    guard(|| {
        if out.is_null() {
            return fail(GcStatus::NullPointer, "out is null");
        }
        let (y, y_hat) = match (slice_arg(actual, n, "actual"), slice_arg(predicted, n, "predicted")) {
            (Ok(y), Ok(p)) => (y, p),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        let result = evaluation::mae(y, y_hat).and_then(|mae| {
            let rmse = evaluation::rmse(y, y_hat)?;
            let (mape, mape_excluded) = evaluation::mape(y, y_hat)?;
            Ok(GcMetrics {
                mae,
                rmse,
                mape,
                mape_excluded,
            })
        });
        match result {
            Ok(metrics) => {
                *out = metrics;
                GcStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Percentage by which `best` improves on `other`: `100 * (other - best) / other`.
#[no_mangle]
pub extern "C" fn gc_improvement(best: f64, other: f64) -> f64 {
    evaluation::improvement(best, other)
}
