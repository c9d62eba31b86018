//! C ABI over the `rlink` pipeline.
//!
//! Every function returns an [`RlnkStatus`]; on failure the message is
//! available from [`rlnk_last_error_message`] on the same thread. Matrices
//! are row-major `double` arrays. Handles are opaque and must be released
//! with [`rlnk_pipeline_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::slice;

use rlink::dataset::{parse_dataset, ParseOptions};
use rlink::error::ErrorKind;
use rlink::inference::{f1_infer, threshold_half};
use rlink::metrics::{hamming_loss, macro_f1};
use rlink::model_io::{load_pipeline, save_pipeline};
use rlink::pipeline::{predict, train_pipeline, Pipeline, PipelineConfig};
use rlink::{DenseMatrix, Error, SparseMatrix};

/// Status codes returned by every entry point.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RlnkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Data = 3,
    Numerical = 4,
    Io = 5,
    Panic = 6,
}

/// Opaque trained pipeline.
pub struct RlnkPipeline {
    inner: Pipeline,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: RlnkStatus, msg: impl Into<String>) -> RlnkStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> RlnkStatus {
    let status = match e.kind() {
        ErrorKind::Config => RlnkStatus::InvalidArgument,
        ErrorKind::Data => RlnkStatus::Data,
        ErrorKind::Numerical => RlnkStatus::Numerical,
        ErrorKind::Io => RlnkStatus::Io,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> Result<(), RlnkStatus>) -> RlnkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            RlnkStatus::Ok
        }
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(RlnkStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

fn lift<T>(r: rlink::Result<T>) -> Result<T, RlnkStatus> {
    r.map_err(from_error)
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), RlnkStatus> {
    if p.is_null() {
        Err(fail(RlnkStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

unsafe fn path_arg(p: *const c_char, name: &str) -> Result<PathBuf, RlnkStatus> {
    non_null(p, name)?;
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(RlnkStatus::InvalidArgument, format!("{name} is not valid UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn handle<'a>(p: *const RlnkPipeline) -> Result<&'a Pipeline, RlnkStatus> {
    non_null(p, "pipeline")?;
    Ok(&(*p).inner)
}

fn checked_len(a: usize, b: usize) -> Result<usize, RlnkStatus> {
    a.checked_mul(b)
        .ok_or_else(|| fail(RlnkStatus::InvalidArgument, "matrix size overflows"))
}

unsafe fn input<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], RlnkStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, name)?;
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, len: usize, name: &str) -> Result<&'a mut [T], RlnkStatus> {
    if len == 0 {
        return Ok(&mut []);
    }
    non_null(p, name)?;
    Ok(slice::from_raw_parts_mut(p, len))
}

fn binary_matrix(values: &[u8], n: usize, c: usize) -> Result<SparseMatrix, RlnkStatus> {
    let sets: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..c).filter(|&j| values[i * c + j] != 0).collect())
        .collect();
    lift(SparseMatrix::from_label_sets(c, &sets))
}

/// Message describing why the last call on this thread failed; NULL if it
/// succeeded. The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn rlnk_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rlnk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a model file into a new handle stored in `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn rlnk_pipeline_load(path: *const c_char, out: *mut *mut RlnkPipeline) -> RlnkStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let path = path_arg(path, "path")?;
        let inner = lift(load_pipeline(&path))?;
        *out = Box::into_raw(Box::new(RlnkPipeline { inner }));
        Ok(())
    })
}

/// Trains on a dataset file. `config_json` holds a JSON object of pipeline
/// settings (missing keys take defaults) or is NULL for all defaults.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rlnk_pipeline_train_file(
    train_path: *const c_char,
    config_json: *const c_char,
    out: *mut *mut RlnkPipeline,
) -> RlnkStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let path = path_arg(train_path, "train_path")?;
        let config = if config_json.is_null() {
            PipelineConfig::default()
        } else {
            let text = CStr::from_ptr(config_json)
                .to_str()
                .map_err(|_| fail(RlnkStatus::InvalidArgument, "config is not valid UTF-8"))?;
            serde_json::from_str(text)
                .map_err(|e| fail(RlnkStatus::InvalidArgument, format!("invalid config: {e}")))?
        };
        let ds = lift(parse_dataset(&path, &ParseOptions::default()))?;
        let inner = lift(train_pipeline(&ds, &config))?;
        *out = Box::into_raw(Box::new(RlnkPipeline { inner }));
        Ok(())
    })
}

/// Writes the model file atomically.
///
/// # Safety
/// `pipeline` must be a live handle and `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn rlnk_pipeline_save(pipeline: *const RlnkPipeline, path: *const c_char) -> RlnkStatus {
    guard(|| {
        let p = handle(pipeline)?;
        let path = path_arg(path, "path")?;
        lift(save_pipeline(p, &path))
    })
}

/// Releases a handle; NULL is ignored.
///
/// # Safety
/// `pipeline` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rlnk_pipeline_free(pipeline: *mut RlnkPipeline) {
    if !pipeline.is_null() {
        drop(Box::from_raw(pipeline));
    }
}

/// Feature and label counts of a trained pipeline.
///
/// # Safety
/// `pipeline` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn rlnk_pipeline_dims(
    pipeline: *const RlnkPipeline,
    n_features: *mut usize,
    n_labels: *mut usize,
) -> RlnkStatus {
    guard(|| {
        let p = handle(pipeline)?;
        non_null(n_features, "n_features")?;
        non_null(n_labels, "n_labels")?;
        *n_features = p.n_features;
        *n_labels = p.n_labels;
        Ok(())
    })
}

unsafe fn predict_into(p: &Pipeline, x: &SparseMatrix, out: *mut f64) -> Result<(), RlnkStatus> {
    let zhat = lift(predict(p, x))?;
    let dst = output(out, checked_len(x.n_rows(), p.n_labels)?, "out")?;
    dst.copy_from_slice(zhat.as_slice());
    Ok(())
}

/// Label probabilities for CSR input (`row_offsets` has `n_rows + 1`
/// entries). Writes `n_rows × n_labels` values to `out`.
///
/// # Safety
/// Arrays must hold the lengths implied by `n_rows` and `row_offsets[n_rows]`.
#[no_mangle]
pub unsafe extern "C" fn rlnk_pipeline_predict_csr(
    pipeline: *const RlnkPipeline,
    n_rows: usize,
    n_cols: usize,
    row_offsets: *const usize,
    col_indices: *const usize,
    values: *const f64,
    out: *mut f64,
) -> RlnkStatus {
    guard(|| {
        let p = handle(pipeline)?;
        non_null(row_offsets, "row_offsets")?;
        let offsets = slice::from_raw_parts(row_offsets, n_rows + 1);
        let nnz = offsets[n_rows];
        if offsets[0] != 0 || offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(fail(RlnkStatus::InvalidArgument, "row_offsets must start at 0 and be nondecreasing"));
        }
        let cols = input(col_indices, nnz, "col_indices")?;
        let vals = input(values, nnz, "values")?;
        let rows: Vec<Vec<(usize, f64)>> = offsets
            .windows(2)
            .map(|w| (w[0]..w[1]).map(|t| (cols[t], vals[t])).collect())
            .collect();
        let x = lift(SparseMatrix::from_rows(n_cols, rows))?;
        predict_into(p, &x, out)
    })
}

/// Label probabilities for dense row-major input `x` (`n_rows × n_cols`).
///
/// # Safety
/// `x` must hold `n_rows·n_cols` values and `out` `n_rows·n_labels`.
#[no_mangle]
pub unsafe extern "C" fn rlnk_pipeline_predict_dense(
    pipeline: *const RlnkPipeline,
    n_rows: usize,
    n_cols: usize,
    x: *const f64,
    out: *mut f64,
) -> RlnkStatus {
    guard(|| {
        let p = handle(pipeline)?;
        let data = input(x, checked_len(n_rows, n_cols)?, "x")?.to_vec();
        let dense = lift(DenseMatrix::from_vec(n_rows, n_cols, data))?;
        predict_into(p, &SparseMatrix::from_dense(&dense), out)
    })
}

/// `out[i] = zhat[i] >= 0.5` over an `n × c` matrix.
///
/// # Safety
/// Both arrays must hold `n·c` elements.
#[no_mangle]
pub unsafe extern "C" fn rlnk_threshold(zhat: *const f64, n: usize, c: usize, out: *mut u8) -> RlnkStatus {
    guard(|| {
        let len = checked_len(n, c)?;
        let z = lift(DenseMatrix::from_vec(n, c, input(zhat, len, "zhat")?.to_vec()))?;
        let yhat = threshold_half(&z);
        let dst = output(out, len, "out")?;
        dst.fill(0);
        for i in 0..n {
            for &j in yhat.row_indices(i) {
                dst[i * c + j] = 1;
            }
        }
        Ok(())
    })
}

/// Per-class F1 decisions using the pipeline's training label frequencies.
///
/// # Safety
/// `zhat` and `out` must hold `n·n_labels` elements.
#[no_mangle]
pub unsafe extern "C" fn rlnk_pipeline_f1_infer(
    pipeline: *const RlnkPipeline,
    zhat: *const f64,
    n: usize,
    out: *mut u8,
) -> RlnkStatus {
    guard(|| {
        let p = handle(pipeline)?;
        let c = p.n_labels;
        let len = checked_len(n, c)?;
        let z = lift(DenseMatrix::from_vec(n, c, input(zhat, len, "zhat")?.to_vec()))?;
        let yhat = lift(f1_infer(&z, &p.label_frequencies))?;
        let dst = output(out, len, "out")?;
        dst.fill(0);
        for i in 0..n {
            for &j in yhat.row_indices(i) {
                dst[i * c + j] = 1;
            }
        }
        Ok(())
    })
}

unsafe fn binary_metric(
    y: *const u8,
    yhat: *const u8,
    n: usize,
    c: usize,
    out: *mut f64,
    f: fn(&SparseMatrix, &SparseMatrix) -> rlink::Result<f64>,
) -> RlnkStatus {
    guard(|| {
        let len = checked_len(n, c)?;
        let a = binary_matrix(input(y, len, "y")?, n, c)?;
        let b = binary_matrix(input(yhat, len, "yhat")?, n, c)?;
        non_null(out, "out")?;
        *out = lift(f(&a, &b))?;
        Ok(())
    })
}

/// Hamming loss between two `n × c` 0/1 matrices.
///
/// # Safety
/// `y` and `yhat` must hold `n·c` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rlnk_hamming_loss(
    y: *const u8,
    yhat: *const u8,
    n: usize,
    c: usize,
    out: *mut f64,
) -> RlnkStatus {
    binary_metric(y, yhat, n, c, out, hamming_loss)
}

/// Macro-averaged F1 between two `n × c` 0/1 matrices.
///
/// # Safety
/// `y` and `yhat` must hold `n·c` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rlnk_macro_f1(
    y: *const u8,
    yhat: *const u8,
    n: usize,
    c: usize,
    out: *mut f64,
) -> RlnkStatus {
    binary_metric(y, yhat, n, c, out, macro_f1)
}
