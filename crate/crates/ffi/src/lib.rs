//! C ABI for the blossom optimizer.
//!
//! Every object crossing the boundary is an opaque handle created and freed by
//! this library. Functions return a [`BlossomStatus`]; on failure a message is
//! available from [`blossom_last_error_message`] on the same thread. Panics
//! never unwind into C: they are caught and reported as
//! `BLOSSOM_STATUS_PANIC`.
//!
//! ```c
//! BlossomOptions *opts = blossom_options_new();
//! blossom_options_set(opts, "target_global_regret", 1e-3);
//! BlossomResult *res = NULL;
//! if (blossom_run(opts, 2, lower, upper, my_objective, my_data, &res) == BLOSSOM_STATUS_OK) {
//!     double x[2];
//!     blossom_result_recommendation(res, x, 2);
//!     blossom_result_free(res);
//! }
//! blossom_options_free(opts);
//! ```

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use blossom::controller::{Phase, RunResult, TerminationReason};
use blossom::harness::trace::write_trace_file;
use blossom::objectives::{log_transform, make_benchmark};
use blossom::{BlossomConfig, Domain};
use serde_json::Value;

/// Outcome of a library call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlossomStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument or option value was rejected.
    InvalidArgument = 2,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 3,
    /// The named benchmark does not exist.
    UnknownObjective = 4,
    /// An index or buffer length was out of range.
    OutOfRange = 5,
    /// Reading or writing a file failed.
    Io = 6,
    /// The library panicked; the call had no effect.
    Panic = 7,
}

/// Why a run stopped.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlossomTermination {
    RegretTargetMet = 0,
    MaxIterations = 1,
    LocalConverged = 2,
    ExternalStop = 3,
    Error = 4,
}

impl From<TerminationReason> for BlossomTermination {
    fn from(r: TerminationReason) -> Self {
        match r {
            TerminationReason::RegretTargetMet => BlossomTermination::RegretTargetMet,
            TerminationReason::MaxIterations => BlossomTermination::MaxIterations,
            TerminationReason::LocalConverged => BlossomTermination::LocalConverged,
            TerminationReason::ExternalStop => BlossomTermination::ExternalStop,
            TerminationReason::Error => BlossomTermination::Error,
        }
    }
}

/// Phase that produced an evaluation.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlossomPhase {
    RandomInit = 0,
    BayesAcq = 1,
    GlobalRegretReduction = 2,
    LocalExploit = 3,
    Terminated = 4,
}

impl From<Phase> for BlossomPhase {
    fn from(p: Phase) -> Self {
        match p {
            Phase::RandomInit => BlossomPhase::RandomInit,
            Phase::BayesAcq => BlossomPhase::BayesAcq,
            Phase::GlobalRegretReduction => BlossomPhase::GlobalRegretReduction,
            Phase::LocalExploit => BlossomPhase::LocalExploit,
            Phase::Terminated => BlossomPhase::Terminated,
        }
    }
}

/// Scalar fields of one trace row. Optional values absent from the row are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlossomStep {
    pub iteration: usize,
    pub phase: BlossomPhase,
    pub y: f64,
    pub incumbent_y: f64,
    pub region_radius: f64,
    pub regret_estimate: f64,
    pub jitter: f64,
    pub wall_time_s: f64,
}

/// Objective callback: returns f(x) for a point of `dim` coordinates.
/// Returning NaN or an infinity ends the run with `BLOSSOM_TERMINATION_ERROR`.
pub type BlossomObjectiveFn =
    Option<unsafe extern "C" fn(x: *const f64, dim: usize, user_data: *mut c_void) -> f64>;

/// Optimizer settings (opaque).
pub struct BlossomOptions {
    config: BlossomConfig,
}

/// Outcome of a run (opaque).
pub struct BlossomResult {
    dim: usize,
    result: RunResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: BlossomStatus, msg: impl Into<String>) -> BlossomStatus {
    set_last_error(msg);
    status
}

/// Runs `f`, turning a panic into `BLOSSOM_STATUS_PANIC`.
fn guard(f: impl FnOnce() -> BlossomStatus) -> BlossomStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(BlossomStatus::Panic, "internal panic"),
    }
}

fn status_of(e: &blossom::Error) -> BlossomStatus {
    match e {
        blossom::Error::UnknownObjective { .. } => BlossomStatus::UnknownObjective,
        blossom::Error::Io(_) => BlossomStatus::Io,
        _ => BlossomStatus::InvalidArgument,
    }
}

unsafe fn str_arg<'a>(s: *const c_char) -> Result<&'a str, BlossomStatus> {
    if s.is_null() {
        return Err(fail(BlossomStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        fail(
            BlossomStatus::InvalidUtf8,
            "string argument is not valid UTF-8",
        )
    })
}

/// Static description of a status code. Never null.
#[no_mangle]
pub extern "C" fn blossom_status_message(status: BlossomStatus) -> *const c_char {
    let s: &'static CStr = match status {
        BlossomStatus::Ok => c"ok",
        BlossomStatus::NullPointer => c"null pointer argument",
        BlossomStatus::InvalidArgument => c"invalid argument",
        BlossomStatus::InvalidUtf8 => c"string is not valid UTF-8",
        BlossomStatus::UnknownObjective => c"unknown objective",
        BlossomStatus::OutOfRange => c"index or length out of range",
        BlossomStatus::Io => c"i/o error",
        BlossomStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}

/// Message of the last failed call on this thread, or null if it succeeded.
/// The pointer stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn blossom_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn blossom_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// New options with default settings. Free with [`blossom_options_free`].
#[no_mangle]
pub extern "C" fn blossom_options_new() -> *mut BlossomOptions {
    Box::into_raw(Box::new(BlossomOptions {
        config: BlossomConfig::default(),
    }))
}

/// Options parsed from a JSON object of settings; null on error.
///
/// # Safety
/// `json` must be null or a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn blossom_options_from_json(json: *const c_char) -> *mut BlossomOptions {
    let mut out = ptr::null_mut();
    guard(|| {
        let text = match str_arg(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match serde_json::from_str::<BlossomConfig>(text) {
            Ok(config) => {
                out = Box::into_raw(Box::new(BlossomOptions { config }));
                BlossomStatus::Ok
            }
            Err(e) => fail(BlossomStatus::InvalidArgument, e.to_string()),
        }
    });
    out
}

/// # Safety
/// `opts` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn blossom_options_free(opts: *mut BlossomOptions) {
    if !opts.is_null() {
        drop(Box::from_raw(opts));
    }
}

fn set_field(config: &mut BlossomConfig, key: &str, value: Value) -> Result<(), String> {
    let mut map = match serde_json::to_value(&*config) {
        Ok(Value::Object(m)) => m,
        _ => return Err("options are not serializable".into()),
    };
    if !map.contains_key(key) {
        return Err(format!("unknown option `{key}`"));
    }
    map.insert(key.to_string(), value);
    let updated: BlossomConfig =
        serde_json::from_value(Value::Object(map)).map_err(|e| format!("option `{key}`: {e}"))?;
    *config = updated;
    Ok(())
}

/// Sets a numeric option by name (for example `target_global_regret`,
/// `max_iterations`, `seed`). Integer options require an integral value.
///
/// # Safety
/// `opts` must be a live handle and `key` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn blossom_options_set(
    opts: *mut BlossomOptions,
    key: *const c_char,
    value: f64,
) -> BlossomStatus {
    guard(|| {
        let Some(opts) = opts.as_mut() else {
            return fail(BlossomStatus::NullPointer, "null options handle");
        };
        let key = match str_arg(key) {
            Ok(k) => k,
            Err(s) => return s,
        };
        let v = if value.fract() == 0.0 && value.abs() < 9.0e15 {
            if value >= 0.0 {
                Value::from(value as u64)
            } else {
                Value::from(value as i64)
            }
        } else {
            match serde_json::Number::from_f64(value) {
                Some(n) => Value::Number(n),
                None => {
                    return fail(
                        BlossomStatus::InvalidArgument,
                        format!("option `{key}`: value must be finite"),
                    )
                }
            }
        };
        match set_field(&mut opts.config, key, v) {
            Ok(()) => BlossomStatus::Ok,
            Err(e) => fail(BlossomStatus::InvalidArgument, e),
        }
    })
}

/// Sets a textual option by name: `kernel_family` (`Matern52`,
/// `SquaredExponential`), `bayes_acquisition` (`pes_discrete`,
/// `expected_improvement`) or `strategy` (`blossom`, `bayes_only`).
///
/// # Safety
/// `opts` must be a live handle; `key` and `value` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn blossom_options_set_string(
    opts: *mut BlossomOptions,
    key: *const c_char,
    value: *const c_char,
) -> BlossomStatus {
    guard(|| {
        let Some(opts) = opts.as_mut() else {
            return fail(BlossomStatus::NullPointer, "null options handle");
        };
        let (key, value) = match (str_arg(key), str_arg(value)) {
            (Ok(k), Ok(v)) => (k, v),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        match set_field(&mut opts.config, key, Value::from(value)) {
            Ok(()) => BlossomStatus::Ok,
            Err(e) => fail(BlossomStatus::InvalidArgument, e),
        }
    })
}

/// Reads a numeric option; non-numeric or unset options give NaN.
///
/// # Safety
/// `opts` must be a live handle and `key` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn blossom_options_get(
    opts: *const BlossomOptions,
    key: *const c_char,
    out: *mut f64,
) -> BlossomStatus {
    guard(|| {
        let (Some(opts), false) = (opts.as_ref(), out.is_null()) else {
            return fail(BlossomStatus::NullPointer, "null argument");
        };
        let key = match str_arg(key) {
            Ok(k) => k,
            Err(s) => return s,
        };
        let map = match serde_json::to_value(&opts.config) {
            Ok(Value::Object(m)) => m,
            _ => {
                return fail(
                    BlossomStatus::InvalidArgument,
                    "options are not serializable",
                )
            }
        };
        match map.get(key) {
            Some(v) => {
                *out = v.as_f64().unwrap_or(f64::NAN);
                BlossomStatus::Ok
            }
            None => fail(
                BlossomStatus::InvalidArgument,
                format!("unknown option `{key}`"),
            ),
        }
    })
}

fn finish_run(
    result: blossom::Result<RunResult>,
    dim: usize,
    out: *mut *mut BlossomResult,
) -> BlossomStatus {
    match result {
        Ok(result) => {
            // SAFETY: callers check `out` for null before running.
            unsafe { *out = Box::into_raw(Box::new(BlossomResult { dim, result })) };
            BlossomStatus::Ok
        }
        Err(e) => fail(status_of(&e), e.to_string()),
    }
}

/// Minimizes `objective` over the box `[lower, upper]` (each of length `dim`).
///
/// On `BLOSSOM_STATUS_OK`, `*out` receives a result handle to be freed with
/// [`blossom_result_free`]. A run that fails part-way (for example because
/// the objective returned NaN) still succeeds at this level; its termination
/// is `BLOSSOM_TERMINATION_ERROR` and the partial trace is kept.
///
/// # Safety
/// `lower` and `upper` must point to `dim` doubles; `opts` must be a live
/// handle; `out` must be writable. `objective` is called synchronously from
/// this thread with `user_data`.
#[no_mangle]
pub unsafe extern "C" fn blossom_run(
    opts: *const BlossomOptions,
    dim: usize,
    lower: *const f64,
    upper: *const f64,
    objective: BlossomObjectiveFn,
    user_data: *mut c_void,
    out: *mut *mut BlossomResult,
) -> BlossomStatus {
    guard(|| {
        let (Some(opts), Some(objective)) = (opts.as_ref(), objective) else {
            return fail(
                BlossomStatus::NullPointer,
                "null options handle or objective",
            );
        };
        if lower.is_null() || upper.is_null() || out.is_null() {
            return fail(BlossomStatus::NullPointer, "null bounds or output pointer");
        }
        if dim == 0 {
            return fail(BlossomStatus::InvalidArgument, "dimension must be positive");
        }
        let lo = std::slice::from_raw_parts(lower, dim).to_vec();
        let hi = std::slice::from_raw_parts(upper, dim).to_vec();
        let domain = match Domain::new(lo, hi) {
            Ok(d) => d,
            Err(e) => return fail(status_of(&e), e.to_string()),
        };
        let mut f = |x: &[f64]| objective(x.as_ptr(), x.len(), user_data);
        finish_run(blossom::run(&mut f, &domain, &opts.config), dim, out)
    })
}

/// Minimizes a built-in benchmark (`branin`, `camel3`, `camel6`, `hartmann3`,
/// `hartmann4`, `hartmann6`), log-transformed so that its minimum is 0.
///
/// # Safety
/// `opts` must be a live handle, `name` a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn blossom_run_benchmark(
    opts: *const BlossomOptions,
    name: *const c_char,
    out: *mut *mut BlossomResult,
) -> BlossomStatus {
    guard(|| {
        let Some(opts) = opts.as_ref() else {
            return fail(BlossomStatus::NullPointer, "null options handle");
        };
        if out.is_null() {
            return fail(BlossomStatus::NullPointer, "null output pointer");
        }
        let name = match str_arg(name) {
            Ok(n) => n,
            Err(s) => return s,
        };
        let bench = match make_benchmark(name).and_then(|b| log_transform(&b)) {
            Ok(b) => b,
            Err(e) => return fail(status_of(&e), e.to_string()),
        };
        let mut f = |x: &[f64]| bench.eval(x);
        finish_run(
            blossom::run(&mut f, &bench.domain, &opts.config),
            bench.dimension,
            out,
        )
    })
}

/// # Safety
/// `res` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn blossom_result_free(res: *mut BlossomResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// Dimension of the problem; 0 for a null handle.
///
/// # Safety
/// `res` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn blossom_result_dim(res: *const BlossomResult) -> usize {
    res.as_ref().map_or(0, |r| r.dim)
}

/// Copies the recommended point into `out` (`len` must be at least the dimension).
///
/// # Safety
/// `res` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn blossom_result_recommendation(
    res: *const BlossomResult,
    out: *mut f64,
    len: usize,
) -> BlossomStatus {
    guard(|| {
        let Some(r) = res.as_ref() else {
            return fail(BlossomStatus::NullPointer, "null result handle");
        };
        copy_point(&r.result.recommendation, out, len)
    })
}

unsafe fn copy_point(x: &[f64], out: *mut f64, len: usize) -> BlossomStatus {
    if out.is_null() {
        return fail(BlossomStatus::NullPointer, "null output buffer");
    }
    if len < x.len() {
        return fail(
            BlossomStatus::OutOfRange,
            format!("buffer holds {len} values, need {}", x.len()),
        );
    }
    ptr::copy_nonoverlapping(x.as_ptr(), out, x.len());
    BlossomStatus::Ok
}

/// Objective value at the recommendation; NaN for a null handle.
///
/// # Safety
/// `res` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn blossom_result_recommended_y(res: *const BlossomResult) -> f64 {
    res.as_ref().map_or(f64::NAN, |r| r.result.recommended_y)
}

/// Objective evaluations made, local-phase evaluations included.
///
/// # Safety
/// `res` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn blossom_result_total_evals(res: *const BlossomResult) -> usize {
    res.as_ref().map_or(0, |r| r.result.total_evals)
}

/// Model-based proposals made (initialization and local phase excluded).
///
/// # Safety
/// `res` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn blossom_result_bayes_iterations(res: *const BlossomResult) -> usize {
    res.as_ref().map_or(0, |r| r.result.bayes_iterations)
}

/// Why the run stopped; `BLOSSOM_TERMINATION_ERROR` for a null handle.
///
/// # Safety
/// `res` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn blossom_result_termination(
    res: *const BlossomResult,
) -> BlossomTermination {
    res.as_ref().map_or(BlossomTermination::Error, |r| {
        r.result.terminated_reason.into()
    })
}

/// Error message of a run that ended with `BLOSSOM_TERMINATION_ERROR`, else
/// null. Valid while the handle lives.
///
/// # Safety
/// `res` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn blossom_result_error(res: *const BlossomResult) -> *const c_char {
    thread_local! {
        static MESSAGE: RefCell<Option<CString>> = const { RefCell::new(None) };
    }
    let Some(r) = res.as_ref() else {
        return ptr::null();
    };
    match &r.result.error {
        Some(e) => MESSAGE.with(|m| {
            let s = CString::new(e.replace('\0', " ")).unwrap_or_default();
            let p = s.as_ptr();
            *m.borrow_mut() = Some(s);
            p
        }),
        None => ptr::null(),
    }
}

/// Number of trace rows (objective evaluations).
///
/// # Safety
/// `res` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn blossom_result_trace_len(res: *const BlossomResult) -> usize {
    res.as_ref().map_or(0, |r| r.result.trace.len())
}

/// Scalar fields of trace row `index`.
///
/// # Safety
/// `res` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn blossom_result_trace_step(
    res: *const BlossomResult,
    index: usize,
    out: *mut BlossomStep,
) -> BlossomStatus {
    guard(|| {
        let (Some(r), false) = (res.as_ref(), out.is_null()) else {
            return fail(BlossomStatus::NullPointer, "null argument");
        };
        let Some(s) = r.result.trace.get(index) else {
            return fail(
                BlossomStatus::OutOfRange,
                format!("trace has {} rows", r.result.trace.len()),
            );
        };
        *out = BlossomStep {
            iteration: s.iteration,
            phase: s.phase.into(),
            y: s.y,
            incumbent_y: s.incumbent_y,
            region_radius: s.region_radius.unwrap_or(f64::NAN),
            regret_estimate: s.regret_estimate.unwrap_or(f64::NAN),
            jitter: s.jitter,
            wall_time_s: s.wall_time_s,
        };
        BlossomStatus::Ok
    })
}

/// Copies the point evaluated at trace row `index` into `out`.
///
/// # Safety
/// `res` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn blossom_result_trace_x(
    res: *const BlossomResult,
    index: usize,
    out: *mut f64,
    len: usize,
) -> BlossomStatus {
    guard(|| {
        let Some(r) = res.as_ref() else {
            return fail(BlossomStatus::NullPointer, "null result handle");
        };
        match r.result.trace.get(index) {
            Some(s) => copy_point(&s.x, out, len),
            None => fail(
                BlossomStatus::OutOfRange,
                format!("trace has {} rows", r.result.trace.len()),
            ),
        }
    })
}

/// Writes the trace as CSV to `path`.
///
/// # Safety
/// `res` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn blossom_result_write_trace(
    res: *const BlossomResult,
    path: *const c_char,
) -> BlossomStatus {
    guard(|| {
        let Some(r) = res.as_ref() else {
            return fail(BlossomStatus::NullPointer, "null result handle");
        };
        let path = match str_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match write_trace_file(Path::new(path), &r.result.trace, r.dim) {
            Ok(()) => BlossomStatus::Ok,
            Err(e) => fail(BlossomStatus::Io, e.to_string()),
        }
    })
}
