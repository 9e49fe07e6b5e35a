//! C ABI for the tempered Bayesian optimization library.
//!
//! Every fallible function returns a [`TbStatus`] and writes results through
//! out-pointers. On failure the message is kept per thread and can be read
//! with [`tb_last_error_message`]. Handles are opaque and must be released
//! with their `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tempered_bo::acquisition::tau::{tau_g, tau_g_inverse, DEFAULT_QUADRATURE_NODES};
use tempered_bo::acquisition::{gei_value, AcqConfig};
use tempered_bo::bo::{run_bo, RunRecord};
use tempered_bo::cli::trace_csv;
use tempered_bo::config::RunConfigFile;
use tempered_bo::error::BoError;
use tempered_bo::gp::{GpState, JitterPolicy};
use tempered_bo::kernel::{KernelFamily, KernelSpec};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Config = 4,
    Numerical = 5,
    Io = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &BoError) -> TbStatus {
    match e {
        BoError::Usage(_) | BoError::Input(_) => TbStatus::InvalidArgument,
        BoError::Domain(_) => TbStatus::Domain,
        BoError::Config { .. } => TbStatus::Config,
        BoError::Numerical { .. } => TbStatus::Numerical,
        BoError::Io(_) => TbStatus::Io,
    }
}

fn fail(status: TbStatus, msg: impl Into<String>) -> TbStatus {
    set_error(msg);
    status
}

/// Run `f`, translating errors and panics into status codes.
fn guard<F>(f: F) -> TbStatus
where
    F: FnOnce() -> Result<(), TbStatus>,
{
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TbStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(TbStatus::Panic, "internal panic"),
    }
}

fn lib_err(e: BoError) -> TbStatus {
    let s = status_of(&e);
    fail(s, e.to_string())
}

fn check_out<T>(p: *mut T) -> Result<(), TbStatus> {
    if p.is_null() {
        Err(fail(TbStatus::NullPointer, "output pointer is null"))
    } else {
        Ok(())
    }
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], TbStatus> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(TbStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, TbStatus> {
    if p.is_null() {
        return Err(fail(TbStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(TbStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

/// Copy `text` plus a terminating NUL into `buf`. `needed` receives the
/// required size including the NUL. Leaves the last error untouched.
unsafe fn copy_out(text: &str, buf: *mut c_char, len: usize, needed: *mut usize) -> Result<(), TbStatus> {
    let bytes = text.as_bytes();
    if !needed.is_null() {
        *needed = bytes.len() + 1;
    }
    if buf.is_null() || len < bytes.len() + 1 {
        return Err(TbStatus::BufferTooSmall);
    }
    ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, bytes.len());
    *buf.add(bytes.len()) = 0;
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copy the calling thread's last error message into `buf`.
///
/// # Safety
/// `buf` must be valid for `len` bytes or null; `needed` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn tb_last_error_message(buf: *mut c_char, len: usize, needed: *mut usize) -> TbStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().as_ref().map(|c| c.to_string_lossy().into_owned()));
    let text = msg.unwrap_or_default();
    match copy_out(&text, buf, len, needed) {
        Ok(()) => TbStatus::Ok,
        Err(s) => s,
    }
}

/// `tau_g(v) = E[max(Z - v, 0)^g]` for standard normal `Z`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tb_tau(v: f64, g: f64, out: *mut f64) -> TbStatus {
    guard(|| {
        check_out(out)?;
        if !(g >= 0.0 && g.is_finite()) || v.is_nan() {
            return Err(fail(TbStatus::Domain, format!("need g >= 0 and finite v, got g={g}, v={v}")));
        }
        *out = tau_g(v, g, DEFAULT_QUADRATURE_NODES);
        Ok(())
    })
}

/// Inverse of `tb_tau` in its first argument.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tb_tau_inverse(y: f64, g: f64, out: *mut f64) -> TbStatus {
    guard(|| {
        check_out(out)?;
        *out = tau_g_inverse(y, g, DEFAULT_QUADRATURE_NODES).map_err(lib_err)?;
        Ok(())
    })
}

/// Generalized expected improvement of order `g` with incumbent offset `xi`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tb_gei(mean: f64, sd: f64, incumbent: f64, g: f64, xi: f64, out: *mut f64) -> TbStatus {
    guard(|| {
        check_out(out)?;
        let acq = AcqConfig { xi, ..AcqConfig::new(g).map_err(lib_err)? };
        acq.validate().map_err(lib_err)?;
        if !(sd >= 0.0) {
            return Err(fail(TbStatus::Domain, format!("sd must be nonnegative, got {sd}")));
        }
        *out = gei_value(mean, sd, incumbent, &acq);
        Ok(())
    })
}

/// Opaque tempered GP posterior.
pub struct TbGp(GpState);

/// Build a tempered GP posterior with zero prior mean.
///
/// `kernel` is one of `se`, `matern12`, `matern32`, `matern52`. `points` holds
/// `n` rows of `dim` coordinates, row-major; `lengthscales` has `dim` entries.
///
/// # Safety
/// Pointers must be valid for the stated lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tb_gp_create(
    kernel: *const c_char,
    dim: usize,
    lengthscales: *const f64,
    signal_variance: f64,
    noise_variance: f64,
    alpha: f64,
    points: *const f64,
    y: *const f64,
    n: usize,
    out: *mut *mut TbGp,
) -> TbStatus {
    guard(|| {
        check_out(out)?;
        *out = ptr::null_mut();
        let name = c_str(kernel, "kernel")?;
        let family = KernelFamily::from_name(name)
            .ok_or_else(|| fail(TbStatus::InvalidArgument, format!("unknown kernel `{name}`")))?;
        if dim == 0 {
            return Err(fail(TbStatus::InvalidArgument, "dim must be positive"));
        }
        let ls = slice(lengthscales, dim, "lengthscales")?;
        let flat = slice(points, n * dim, "points")?;
        let ys = slice(y, n, "y")?;
        let pts: Vec<Vec<f64>> = flat.chunks(dim).map(<[f64]>::to_vec).collect();
        let spec = KernelSpec::new(family, ls.to_vec(), signal_variance).map_err(lib_err)?;
        let state = GpState::new(&pts, ys, &spec, noise_variance, alpha, 0.0, &JitterPolicy::default()).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(TbGp(state)));
        Ok(())
    })
}

/// Posterior mean and variance at one point of length `dim`.
///
/// # Safety
/// `gp` must come from `tb_gp_create`; `x` must hold `dim` values.
#[no_mangle]
pub unsafe extern "C" fn tb_gp_predict(gp: *const TbGp, x: *const f64, dim: usize, mean: *mut f64, variance: *mut f64) -> TbStatus {
    guard(|| {
        let gp = gp.as_ref().ok_or_else(|| fail(TbStatus::NullPointer, "gp is null"))?;
        check_out(mean)?;
        check_out(variance)?;
        let x = slice(x, dim, "x")?;
        let p = gp.0.predict(x).map_err(lib_err)?;
        *mean = p.mean;
        *variance = p.variance;
        Ok(())
    })
}

/// Release a GP handle. Null is ignored.
///
/// # Safety
/// `gp` must come from `tb_gp_create` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tb_gp_free(gp: *mut TbGp) {
    if !gp.is_null() {
        drop(Box::from_raw(gp));
    }
}

/// Opaque record of a completed optimization run.
pub struct TbRun(RunRecord);

/// Run an optimization described by a TOML document (same schema as the
/// `run` command).
///
/// # Safety
/// `config_toml` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tb_run_toml(config_toml: *const c_char, out: *mut *mut TbRun) -> TbStatus {
    guard(|| {
        check_out(out)?;
        *out = ptr::null_mut();
        let text = c_str(config_toml, "config_toml")?;
        let cfg = RunConfigFile::parse(text).map_err(lib_err)?;
        let objective = cfg.objective.build(None).map_err(lib_err)?;
        let record = run_bo(&objective, &cfg.effective_bo()).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(TbRun(record)));
        Ok(())
    })
}

/// Number of evaluations recorded in `run`, or 0 for null.
///
/// # Safety
/// `run` must come from `tb_run_toml` or be null.
#[no_mangle]
pub unsafe extern "C" fn tb_run_len(run: *const TbRun) -> usize {
    run.as_ref().map_or(0, |r| r.0.rows.len())
}

/// Input dimension of `run`, or 0 for null.
///
/// # Safety
/// `run` must come from `tb_run_toml` or be null.
#[no_mangle]
pub unsafe extern "C" fn tb_run_dim(run: *const TbRun) -> usize {
    run.as_ref().map_or(0, |r| r.0.dim)
}

/// Point and observation of evaluation `index` (0-based). `x` receives `dim` values.
///
/// # Safety
/// `run` must come from `tb_run_toml`; `x` must hold `dim` values.
#[no_mangle]
pub unsafe extern "C" fn tb_run_row(run: *const TbRun, index: usize, x: *mut f64, dim: usize, y: *mut f64) -> TbStatus {
    guard(|| {
        let run = run.as_ref().ok_or_else(|| fail(TbStatus::NullPointer, "run is null"))?;
        check_out(x)?;
        check_out(y)?;
        let row = run
            .0
            .rows
            .get(index)
            .ok_or_else(|| fail(TbStatus::InvalidArgument, format!("row {index} out of range")))?;
        if dim != row.x.len() {
            return Err(fail(TbStatus::InvalidArgument, format!("expected dim {}, got {dim}", row.x.len())));
        }
        ptr::copy_nonoverlapping(row.x.as_ptr(), x, dim);
        *y = row.y;
        Ok(())
    })
}

/// Best observation of the run.
///
/// # Safety
/// `run` must come from `tb_run_toml`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tb_run_best_observed(run: *const TbRun, out: *mut f64) -> TbStatus {
    guard(|| {
        let run = run.as_ref().ok_or_else(|| fail(TbStatus::NullPointer, "run is null"))?;
        check_out(out)?;
        *out = run.0.rows.last().map_or(f64::NAN, |r| r.best_observed);
        Ok(())
    })
}

/// Trace CSV of the run. Call with a null buffer to query `needed`.
///
/// # Safety
/// `buf` must be valid for `len` bytes or null; `needed` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn tb_run_trace_csv(run: *const TbRun, buf: *mut c_char, len: usize, needed: *mut usize) -> TbStatus {
    guard(|| {
        let run = run.as_ref().ok_or_else(|| fail(TbStatus::NullPointer, "run is null"))?;
        copy_out(&trace_csv(&run.0), buf, len, needed)
            .map_err(|s| fail(s, format!("buffer of {len} bytes is too small for the trace")))
    })
}

/// Release a run handle. Null is ignored.
///
/// # Safety
/// `run` must come from `tb_run_toml` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tb_run_free(run: *mut TbRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}
