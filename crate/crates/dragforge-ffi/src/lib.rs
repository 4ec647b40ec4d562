//! C ABI for the dragforge library.
//!
//! Conventions: every fallible function returns a `DfStatus` code and writes
//! results through out-pointers. `Dataset` and `Model` are opaque handles
//! owned by the caller and released with the matching `_free` function. The
//! most recent error message for the calling thread is available via
//! [`df_last_error_message`]. The generated header lives in
//! `include/dragforge.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;

use dragforge::dataset::{self, Dataset, LbmEvaluator};
use dragforge::error::Error;
use dragforge::flow::{evaluate_shape, FlowConfig};
use dragforge::geometry::ShapeParams;
use dragforge::surrogate::{mlp_forward, mlp_init, mlp_input_gradient, train, MlpModel, TrainConfig};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DfStatus {
    Ok = 0,
    /// A pointer argument was null or a value was out of range.
    InvalidArgument = 1,
    /// Geometry could not be built or rasterized.
    Geometry = 2,
    /// The flow solve or the training run diverged.
    Diverged = 3,
    /// File or parse error.
    Io = 4,
    /// Any other library error; see `df_last_error_message`.
    Internal = 5,
}

/// Opaque dataset handle.
pub struct DfDataset(Dataset);

/// Opaque surrogate-model handle.
pub struct DfModel(MlpModel);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', "?")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> DfStatus {
    match err {
        Error::InvalidArgument { .. } | Error::EmptyDataset(_) => DfStatus::InvalidArgument,
        Error::DegenerateShape(_) | Error::OutOfBounds(_) | Error::SolidTouchesBoundary(_) => {
            DfStatus::Geometry
        }
        Error::Divergence { .. } | Error::TrainingDiverged(_) => DfStatus::Diverged,
        Error::Io(_) | Error::Json(_) | Error::Parse { .. } => DfStatus::Io,
        _ => DfStatus::Internal,
    }
}

fn fail(err: Error) -> DfStatus {
    let code = status_of(&err);
    set_error(&err.to_string());
    code
}

fn invalid(msg: &str) -> DfStatus {
    set_error(msg);
    DfStatus::InvalidArgument
}

/// Panics must not unwind out of an `extern "C"` function (that aborts the
/// process), so every entry point that calls into the library runs its body
/// under `catch_unwind` and maps a panic to `Internal`.
fn guard<F: FnOnce() -> DfStatus + std::panic::UnwindSafe>(f: F) -> DfStatus {
    match std::panic::catch_unwind(f) {
        Ok(code) => code,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic in library call".into());
            set_error(&msg);
            DfStatus::Internal
        }
    }
}

/// # Safety
/// `ptr` must be a valid NUL-terminated string.
unsafe fn path_arg<'a>(ptr: *const c_char) -> Result<&'a Path, DfStatus> {
    if ptr.is_null() {
        return Err(invalid("path is null"));
    }
    match unsafe { CStr::from_ptr(ptr) }.to_str() {
        Ok(s) => Ok(Path::new(s)),
        Err(_) => Err(invalid("path is not valid UTF-8")),
    }
}

unsafe fn shape_arg(theta: *const f64, width: f64) -> Result<ShapeParams, DfStatus> {
    if theta.is_null() {
        return Err(invalid("theta is null"));
    }
    let t = unsafe { std::slice::from_raw_parts(theta, 4) };
    ShapeParams::new([t[0], t[1], t[2], t[3]], width).map_err(fail)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn df_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copies the calling thread's last error message into `buf` (truncated to
/// `len - 1` bytes, always NUL-terminated). Returns the full message length.
#[no_mangle]
pub unsafe extern "C" fn df_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Runs the flow solver on one shape with the default configuration.
/// `theta` points at 4 control heights; drag and a 0/1 convergence flag are
/// written to the out-pointers.
///
/// # Safety
/// `theta` must point at 4 readable doubles; out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_evaluate_shape(
    theta: *const f64,
    width: f64,
    drag_out: *mut f64,
    converged_out: *mut i32,
) -> DfStatus {
    if drag_out.is_null() || converged_out.is_null() {
        return invalid("output pointer is null");
    }
    let params = match unsafe { shape_arg(theta, width) } {
        Ok(p) => p,
        Err(s) => return s,
    };
    guard(std::panic::AssertUnwindSafe(|| {
        let sample = evaluate_shape(&params, &FlowConfig::default());
        unsafe {
            *drag_out = sample.drag;
            *converged_out = sample.converged as i32;
        }
        DfStatus::Ok
    }))
}

/// Generates the full-factorial dataset (`levels`^4 flow solves) at the
/// given width. On success writes a new handle; free with `df_dataset_free`.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn df_dataset_generate(
    width: f64,
    levels: usize,
    out: *mut *mut DfDataset,
) -> DfStatus {
    if out.is_null() {
        return invalid("out is null");
    }
    if !(width > 0.0) || levels < 2 {
        return invalid("width must be > 0 and levels >= 2");
    }
    guard(std::panic::AssertUnwindSafe(|| {
        let evaluator = LbmEvaluator { cfg: FlowConfig::default() };
        let ds = dataset::generate(width, levels, &evaluator);
        unsafe { *out = Box::into_raw(Box::new(DfDataset(ds))) };
        DfStatus::Ok
    }))
}

/// Loads a dataset from a CSV file written by `df_dataset_save_csv`.
///
/// # Safety
/// `path` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn df_dataset_load_csv(
    path: *const c_char,
    out: *mut *mut DfDataset,
) -> DfStatus {
    if out.is_null() {
        return invalid("out is null");
    }
    let path = match unsafe { path_arg(path) } {
        Ok(p) => p,
        Err(s) => return s,
    };
    guard(std::panic::AssertUnwindSafe(|| match dataset::load(path) {
        Ok(ds) => {
            unsafe { *out = Box::into_raw(Box::new(DfDataset(ds))) };
            DfStatus::Ok
        }
        Err(e) => fail(e),
    }))
}

/// # Safety
/// `ds` must be a live handle; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn df_dataset_save_csv(ds: *const DfDataset, path: *const c_char) -> DfStatus {
    if ds.is_null() {
        return invalid("dataset is null");
    }
    let path = match unsafe { path_arg(path) } {
        Ok(p) => p,
        Err(s) => return s,
    };
    guard(std::panic::AssertUnwindSafe(|| match dataset::save(unsafe { &(*ds).0 }, path) {
        Ok(()) => DfStatus::Ok,
        Err(e) => fail(e),
    }))
}

/// Number of samples in the dataset; 0 for a null handle.
///
/// # Safety
/// `ds` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn df_dataset_len(ds: *const DfDataset) -> usize {
    if ds.is_null() {
        0
    } else {
        unsafe { (*ds).0.len() }
    }
}

/// # Safety
/// `ds` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn df_dataset_free(ds: *mut DfDataset) {
    if !ds.is_null() {
        drop(unsafe { Box::from_raw(ds) });
    }
}

/// Trains the standard six-hidden-layer network on `ds`. `epochs` and
/// `step_size` of 0 select the library defaults.
///
/// # Safety
/// `ds` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn df_model_train(
    ds: *const DfDataset,
    seed: u64,
    epochs: usize,
    step_size: f64,
    out: *mut *mut DfModel,
) -> DfStatus {
    if ds.is_null() || out.is_null() {
        return invalid("dataset or out is null");
    }
    let mut cfg = TrainConfig { seed, ..TrainConfig::default() };
    if epochs > 0 {
        cfg.epochs = epochs;
    }
    if step_size > 0.0 {
        cfg.step_size = step_size;
    }
    cfg.checkpoint_interval = cfg.checkpoint_interval.min(cfg.epochs);
    guard(std::panic::AssertUnwindSafe(|| {
        let init = mlp_init(seed, 1.0);
        match train(&init, unsafe { &(*ds).0 }, &cfg) {
            Ok((model, _trace)) => {
                unsafe { *out = Box::into_raw(Box::new(DfModel(model))) };
                DfStatus::Ok
            }
            Err(e) => fail(e.into()),
        }
    }))
}

/// Loads a model from its JSON serialization.
///
/// # Safety
/// `path` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn df_model_load_json(
    path: *const c_char,
    out: *mut *mut DfModel,
) -> DfStatus {
    if out.is_null() {
        return invalid("out is null");
    }
    let path = match unsafe { path_arg(path) } {
        Ok(p) => p,
        Err(s) => return s,
    };
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return fail(e.into()),
    };
    guard(std::panic::AssertUnwindSafe(|| match MlpModel::from_json(&text) {
        Ok(m) => {
            unsafe { *out = Box::into_raw(Box::new(DfModel(m))) };
            DfStatus::Ok
        }
        Err(e) => fail(e),
    }))
}

/// # Safety
/// `model` must be a live handle; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn df_model_save_json(model: *const DfModel, path: *const c_char) -> DfStatus {
    if model.is_null() {
        return invalid("model is null");
    }
    let path = match unsafe { path_arg(path) } {
        Ok(p) => p,
        Err(s) => return s,
    };
    match std::fs::write(path, unsafe { (*model).0.to_json() }) {
        Ok(()) => DfStatus::Ok,
        Err(e) => fail(e.into()),
    }
}

/// Surrogate drag prediction for one shape.
///
/// # Safety
/// `model` live handle, `theta` 4 doubles, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn df_model_predict(
    model: *const DfModel,
    theta: *const f64,
    width: f64,
    out: *mut f64,
) -> DfStatus {
    if model.is_null() || out.is_null() {
        return invalid("model or out is null");
    }
    let params = match unsafe { shape_arg(theta, width) } {
        Ok(p) => p,
        Err(s) => return s,
    };
    guard(std::panic::AssertUnwindSafe(|| {
        unsafe { *out = mlp_forward(&(*model).0, &params) };
        DfStatus::Ok
    }))
}

/// Gradient of the prediction with respect to (θ₁..θ₄, width); writes 5
/// doubles to `grad_out`.
///
/// # Safety
/// `model` live handle, `theta` 4 doubles, `grad_out` 5 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn df_model_gradient(
    model: *const DfModel,
    theta: *const f64,
    width: f64,
    grad_out: *mut f64,
) -> DfStatus {
    if model.is_null() || grad_out.is_null() {
        return invalid("model or grad_out is null");
    }
    let params = match unsafe { shape_arg(theta, width) } {
        Ok(p) => p,
        Err(s) => return s,
    };
    guard(std::panic::AssertUnwindSafe(|| {
        let g = unsafe { mlp_input_gradient(&(*model).0, &params) };
        unsafe { std::ptr::copy_nonoverlapping(g.as_ptr(), grad_out, 5) };
        DfStatus::Ok
    }))
}

/// # Safety
/// `model` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn df_model_free(model: *mut DfModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::c_char;

    fn c_path(p: &std::path::Path) -> CString {
        CString::new(p.to_str().unwrap()).unwrap()
    }

    #[test]
    fn version_is_nul_terminated() {
        let v = unsafe { CStr::from_ptr(df_version()) };
        assert!(!v.to_str().unwrap().is_empty());
    }

    #[test]
    fn evaluate_shape_round_trip() {
        let theta = [0.08f64, 0.1, 0.1, 0.08];
        let mut drag = 0.0;
        let mut conv = 0;
        let s = unsafe { df_evaluate_shape(theta.as_ptr(), 0.18, &mut drag, &mut conv) };
        assert_eq!(s, DfStatus::Ok);
        assert_eq!(conv, 1);
        assert!(drag > 0.0);
    }

    #[test]
    fn invalid_theta_sets_error_message() {
        let theta = [1.0f64, 0.1, 0.1, 0.1]; // above the box for width 0.18
        let mut drag = 0.0;
        let mut conv = 0;
        let s = unsafe { df_evaluate_shape(theta.as_ptr(), 0.18, &mut drag, &mut conv) };
        assert_eq!(s, DfStatus::InvalidArgument);
        let mut buf = [0 as c_char; 256];
        let n = unsafe { df_last_error_message(buf.as_mut_ptr(), buf.len()) };
        assert!(n > 0);
        let msg = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap();
        assert!(msg.contains("theta"), "message: {msg}");
    }

    #[test]
    fn null_pointers_rejected() {
        let theta = [0.08f64, 0.1, 0.1, 0.08];
        let mut drag = 0.0;
        unsafe {
            assert_eq!(
                df_evaluate_shape(std::ptr::null(), 0.18, &mut drag, &mut 0),
                DfStatus::InvalidArgument
            );
            assert_eq!(
                df_evaluate_shape(theta.as_ptr(), 0.18, std::ptr::null_mut(), &mut 0),
                DfStatus::InvalidArgument
            );
            assert_eq!(df_dataset_len(std::ptr::null()), 0);
            df_dataset_free(std::ptr::null_mut());
            df_model_free(std::ptr::null_mut());
        }
    }

    #[test]
    fn dataset_model_lifecycle() {
        let dir = tempfile::tempdir().unwrap();
        // tiny dataset: 2^4 = 16 flow solves
        let mut ds: *mut DfDataset = std::ptr::null_mut();
        let s = unsafe { df_dataset_generate(0.18, 2, &mut ds) };
        assert_eq!(s, DfStatus::Ok);
        assert_eq!(unsafe { df_dataset_len(ds) }, 16);

        let csv = c_path(&dir.path().join("ds.csv"));
        assert_eq!(unsafe { df_dataset_save_csv(ds, csv.as_ptr()) }, DfStatus::Ok);
        let mut ds2: *mut DfDataset = std::ptr::null_mut();
        assert_eq!(unsafe { df_dataset_load_csv(csv.as_ptr(), &mut ds2) }, DfStatus::Ok);
        assert_eq!(unsafe { df_dataset_len(ds2) }, 16);

        let mut model: *mut DfModel = std::ptr::null_mut();
        assert_eq!(unsafe { df_model_train(ds, 7, 500, 0.0, &mut model) }, DfStatus::Ok);

        let theta = [0.08f64, 0.1, 0.1, 0.08];
        let mut pred = f64::NAN;
        assert_eq!(
            unsafe { df_model_predict(model, theta.as_ptr(), 0.18, &mut pred) },
            DfStatus::Ok
        );
        assert!(pred.is_finite());
        let mut grad = [f64::NAN; 5];
        assert_eq!(
            unsafe { df_model_gradient(model, theta.as_ptr(), 0.18, grad.as_mut_ptr()) },
            DfStatus::Ok
        );
        assert!(grad.iter().all(|g| g.is_finite()));

        // JSON round trip through the C surface
        let mj = c_path(&dir.path().join("model.json"));
        assert_eq!(unsafe { df_model_save_json(model, mj.as_ptr()) }, DfStatus::Ok);
        let mut model2: *mut DfModel = std::ptr::null_mut();
        assert_eq!(unsafe { df_model_load_json(mj.as_ptr(), &mut model2) }, DfStatus::Ok);
        let mut pred2 = f64::NAN;
        unsafe { df_model_predict(model2, theta.as_ptr(), 0.18, &mut pred2) };
        assert_eq!(pred.to_bits(), pred2.to_bits());

        unsafe {
            df_model_free(model);
            df_model_free(model2);
            df_dataset_free(ds);
            df_dataset_free(ds2);
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        let p = CString::new("/nonexistent/ds.csv").unwrap();
        let mut ds: *mut DfDataset = std::ptr::null_mut();
        assert_eq!(unsafe { df_dataset_load_csv(p.as_ptr(), &mut ds) }, DfStatus::Io);
    }

    #[test]
    fn header_lists_every_symbol() {
        let header = include_str!("../include/dragforge.h");
        for sym in [
            "df_version",
            "df_last_error_message",
            "df_evaluate_shape",
            "df_dataset_generate",
            "df_dataset_load_csv",
            "df_dataset_save_csv",
            "df_dataset_len",
            "df_dataset_free",
            "df_model_train",
            "df_model_load_json",
            "df_model_save_json",
            "df_model_predict",
            "df_model_gradient",
            "df_model_free",
        ] {
            assert!(header.contains(sym), "header missing {sym}");
        }
    }
}
