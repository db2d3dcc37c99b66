//! C ABI over the `smrd` library.
//!
//! Objects cross the boundary as opaque handles created by `smrd_*_new`-style
//! functions and released with the matching `*_free`. Every fallible call
//! returns an [`SmrdStatus`]; on failure a message is kept per thread and can
//! be read with [`smrd_last_error`]. Panics never unwind into C: they are
//! caught and reported as [`SmrdStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use smrd::cli::{self, ExperimentConfig, Problem};
use smrd::metrics::MetricPair;
use smrd::sampler::ReconReport;
use smrd::SmrdError;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmrdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Io = 4,
    Numerical = 5,
    BufferTooSmall = 6,
    OutOfRange = 7,
    Panic = 8,
}

/// Experiment configuration (phantom, mask, noise, prior, sampler, tuning).
pub struct SmrdConfig {
    inner: ExperimentConfig,
}

/// A simulated or loaded acquisition.
pub struct SmrdProblem {
    inner: Problem,
}

/// Output of one reconstruction.
pub struct SmrdReport {
    inner: ReconReport,
}

/// One row of a reconstruction trace. `mse` and `psnr` are NaN without ground truth.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmrdTraceRow {
    pub t: usize,
    pub sure: f64,
    pub lambda: f64,
    pub mse: f64,
    pub psnr: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let text = CString::new(msg.replace('\0', " ")).expect("interior NULs were replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn status_of(err: &SmrdError) -> SmrdStatus {
    match cli::exit_code(err) {
        cli::EXIT_IO => SmrdStatus::Io,
        cli::EXIT_NUMERICAL => SmrdStatus::Numerical,
        _ => SmrdStatus::Config,
    }
}

struct Failure(SmrdStatus, String);

impl From<SmrdError> for Failure {
    fn from(e: SmrdError) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SmrdStatus::NullPointer, format!("{what} is null"))
}

/// Runs `body`, converting errors and panics into a status plus the thread's last-error message.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> SmrdStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_last_error("");
            SmrdStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_last_error(&format!("internal panic: {msg}"));
            SmrdStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Failure(SmrdStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    unsafe { out.write(value) };
    Ok(())
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Library version as a static NUL-terminated string.
#[unsafe(no_mangle)]
pub extern "C" fn smrd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the most recent failure on this thread; empty after a success.
///
/// The pointer stays valid until the next `smrd_*` call on the same thread.
#[unsafe(no_mangle)]
pub extern "C" fn smrd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Default configuration.
///
/// # Safety
/// `out` must be null or valid for writing one pointer.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn smrd_config_new(out: *mut *mut SmrdConfig) -> SmrdStatus {
    guard(|| unsafe {
        if out.is_null() {
            return Err(null("out"));
        }
        put(
            out,
            boxed(SmrdConfig {
                inner: ExperimentConfig::default(),
            }),
            "out",
        )
    })
}

/// Parses flat `key = value` text; unknown keys are rejected.
///
/// # Safety
/// `text` must be null or a NUL-terminated string; `out` null or writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn smrd_config_parse(text: *const c_char, out: *mut *mut SmrdConfig) -> SmrdStatus {
    guard(|| unsafe {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = ExperimentConfig::parse(str_arg(text, "text")?)?;
        put(out, boxed(SmrdConfig { inner }), "out")
    })
}

/// Sets one key; the config is left unchanged if the result would be invalid.
///
/// # Safety
/// `cfg` must be null or a live handle; `key` and `value` null or NUL-terminated.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn smrd_config_set(cfg: *mut SmrdConfig, key: *const c_char, value: *const c_char) -> SmrdStatus {
    guard(|| unsafe {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        let (key, value) = (str_arg(key, "key")?, str_arg(value, "value")?);
        let mut kv = cfg.inner.to_kv();
        kv.set(key, value);
        cfg.inner = ExperimentConfig::from_kv(kv)?;
        Ok(())
    })
}

/// Serialized config; free the returned string with [`smrd_string_free`].
///
/// # Safety
/// `cfg` must be null or a live handle; `out` null or writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn smrd_config_to_text(cfg: *const SmrdConfig, out: *mut *mut c_char) -> SmrdStatus {
    guard(|| unsafe {
        let cfg = handle(cfg, "cfg")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CString::new(cfg.inner.to_text()).map_err(|e| Failure(SmrdStatus::Config, e.to_string()))?;
        put(out, text.into_raw(), "out")
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn smrd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// # Safety
/// `cfg` must be null or a handle from this library, not yet freed.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn smrd_config_free(cfg: *mut SmrdConfig) {
    if !cfg.is_null() {
        drop(unsafe { Box::from_raw(cfg) });
    }
}

/// Simulates phantom, coils, mask and noisy k-space in memory.
///
/// # Safety
/// `cfg` must be null or a live handle; `out` null or writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn smrd_problem_simulate(cfg: *const SmrdConfig, out: *mut *mut SmrdProblem) -> SmrdStatus {
    guard(|| unsafe {
        let cfg = handle(cfg, "cfg")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = Problem::simulate(&cfg.inner)?;
        put(out, boxed(SmrdProblem { inner }), "out")
    })
}

/// Loads a directory written by `smrd simulate`.
///
/// # Safety
/// `dir` must be null or NUL-terminated; `out` null or writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn smrd_problem_load(dir: *const c_char, out: *mut *mut SmrdProblem) -> SmrdStatus {
    guard(|| unsafe {
        let dir = str_arg(dir, "dir")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = Problem::load(Path::new(dir))?;
        put(out, boxed(SmrdProblem { inner }), "out")
    })
}

/// Image height, width and coil count.
///
/// # Safety
/// `problem` must be null or a live handle; each out pointer null or writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn smrd_problem_shape(
    problem: *const SmrdProblem,
    height: *mut usize,
    width: *mut usize,
    coils: *mut usize,
) -> SmrdStatus {
    guard(|| unsafe {
        let p = handle(problem, "problem")?;
        let (h, w) = p.inner.fm.shape();
        put(height, h, "height")?;
        put(width, w, "width")?;
        put(coils, p.inner.fm.num_coils(), "coils")
    })
}

/// # Safety
/// `problem` must be null or a handle from this library, not yet freed.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn smrd_problem_free(problem: *mut SmrdProblem) {
    if !problem.is_null() {
        drop(unsafe { Box::from_raw(problem) });
    }
}

/// Runs the method named by the config's `sampler.method`.
///
/// # Safety
/// `cfg` and `problem` must be null or live handles; `out` null or writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn smrd_reconstruct(
    cfg: *const SmrdConfig,
    problem: *const SmrdProblem,
    out: *mut *mut SmrdReport,
) -> SmrdStatus {
    guard(|| unsafe {
        let cfg = handle(cfg, "cfg")?;
        let problem = handle(problem, "problem")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = cli::reconstruct(&cfg.inner, &problem.inner)?;
        put(out, boxed(SmrdReport { inner }), "out")
    })
}

/// Executed steps (`T` when early stopping never fired, 0 for zero_filled).
///
/// # Safety
/// `report` must be null or a live handle; `out` null or writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn smrd_report_t_es(report: *const SmrdReport, out: *mut usize) -> SmrdStatus {
    guard(|| unsafe { put(out, handle(report, "report")?.inner.t_es, "out") })
}

/// Final λ; NaN for methods without a data-consistency weight.
///
/// # Safety
/// `report` must be null or a live handle; `out` null or writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn smrd_report_final_lambda(report: *const SmrdReport, out: *mut f64) -> SmrdStatus {
    guard(|| unsafe { put(out, handle(report, "report")?.inner.final_lambda.unwrap_or(f64::NAN), "out") })
}

/// # Safety
/// `report` must be null or a live handle; `out` null or writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn smrd_report_trace_len(report: *const SmrdReport, out: *mut usize) -> SmrdStatus {
    guard(|| unsafe { put(out, handle(report, "report")?.inner.trace.len(), "out") })
}

/// # Safety
/// `report` must be null or a live handle; `out` null or writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn smrd_report_trace_row(
    report: *const SmrdReport,
    index: usize,
    out: *mut SmrdTraceRow,
) -> SmrdStatus {
    guard(|| unsafe {
        let r = handle(report, "report")?;
        let row = r.inner.trace.get(index).ok_or_else(|| {
            Failure(
                SmrdStatus::OutOfRange,
                format!("trace row {index} out of range ({} rows)", r.inner.trace.len()),
            )
        })?;
        put(
            out,
            SmrdTraceRow {
                t: row.t,
                sure: row.sure,
                lambda: row.lambda,
                mse: row.mse.unwrap_or(f64::NAN),
                psnr: row.psnr.unwrap_or(f64::NAN),
            },
            "out",
        )
    })
}

/// Copies the final image as interleaved (re, im) pairs in row-major order.
///
/// `len` is the capacity of `buf` in doubles and must be at least `2·H·W`.
///
/// # Safety
/// `report` must be null or a live handle; `buf` null or valid for `len` doubles.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn smrd_report_copy_image(report: *const SmrdReport, buf: *mut f64, len: usize) -> SmrdStatus {
    guard(|| unsafe {
        let r = handle(report, "report")?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let data = r.inner.final_image.data();
        if len < 2 * data.len() {
            return Err(Failure(
                SmrdStatus::BufferTooSmall,
                format!("need {} doubles, got {len}", 2 * data.len()),
            ));
        }
        let dst = std::slice::from_raw_parts_mut(buf, 2 * data.len());
        for (pair, z) in dst.chunks_exact_mut(2).zip(data) {
            pair[0] = z.re;
            pair[1] = z.im;
        }
        Ok(())
    })
}

/// PSNR and SSIM of the report's final image against the problem's ground truth.
///
/// # Safety
/// `problem` and `report` must be null or live handles; out pointers null or writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn smrd_report_quality(
    problem: *const SmrdProblem,
    report: *const SmrdReport,
    psnr: *mut f64,
    ssim: *mut f64,
) -> SmrdStatus {
    guard(|| unsafe {
        let p = handle(problem, "problem")?;
        let r = handle(report, "report")?;
        let truth = p
            .inner
            .truth
            .as_ref()
            .ok_or_else(|| Failure(SmrdStatus::Config, "problem has no ground truth".into()))?;
        let m = MetricPair::compute(truth, &r.inner.final_image)?;
        put(psnr, m.psnr, "psnr")?;
        put(ssim, m.ssim, "ssim")
    })
}

/// # Safety
/// `report` must be null or a handle from this library, not yet freed.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn smrd_report_free(report: *mut SmrdReport) {
    if !report.is_null() {
        drop(unsafe { Box::from_raw(report) });
    }
}
