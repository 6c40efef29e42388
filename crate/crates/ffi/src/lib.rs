//! C ABI over the `optstop` solver.
//!
//! Handles are opaque: build a problem from JSON, solve it, query the
//! solution, then free both. Every fallible call returns an
//! [`OptstopStatus`]; on failure the message is kept per thread and can be
//! copied out with [`optstop_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use optstop::config::ProblemConfig;
use optstop::driver::{solve, Solved};
use optstop::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptstopStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// The problem file failed to parse or validate.
    Config = 3,
    /// A verification hypothesis failed; the problem is not of the assumed shape.
    Hypothesis = 4,
    /// Root finding, quadrature or the kernel inversion failed.
    Numerical = 5,
    /// A point outside the state space.
    Domain = 6,
    /// The output buffer is too small; the needed length was written.
    BufferTooSmall = 7,
    /// A Rust panic was caught at the boundary.
    Panic = 8,
}

/// A parsed and validated problem.
pub struct OptstopProblem {
    config: ProblemConfig,
}

/// A solved problem: region, value function and reward.
pub struct OptstopSolution {
    solved: Solved,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> OptstopStatus {
    match e {
        Error::Config(_) | Error::UnknownProcess(_) | Error::BadParams(_) => OptstopStatus::Config,
        Error::OutOfDomain(_) => OptstopStatus::Domain,
        e if e.is_hypothesis_failure() => OptstopStatus::Hypothesis,
        _ => OptstopStatus::Numerical,
    }
}

fn fail(e: Error) -> OptstopStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn guard(f: impl FnOnce() -> OptstopStatus) -> OptstopStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == OptstopStatus::Ok {
                set_error("");
            }
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            OptstopStatus::Panic
        }
    }
}

macro_rules! non_null {
    ($($p:expr),+) => {
        if $($p.is_null())||+ {
            set_error("null pointer argument");
            return OptstopStatus::NullPointer;
        }
    };
}

/// Parses a problem from a NUL-terminated JSON string.
///
/// # Safety
/// `json` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn optstop_problem_from_json(json: *const c_char, out: *mut *mut OptstopProblem) -> OptstopStatus {
    guard(|| {
        non_null!(json, out);
        *out = ptr::null_mut();
        let Ok(text) = CStr::from_ptr(json).to_str() else {
            set_error("problem text is not UTF-8");
            return OptstopStatus::InvalidUtf8;
        };
        match ProblemConfig::from_json(text) {
            Ok(config) => {
                *out = Box::into_raw(Box::new(OptstopProblem { config }));
                OptstopStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Releases a problem. Null is ignored.
///
/// # Safety
/// `problem` must come from [`optstop_problem_from_json`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn optstop_problem_free(problem: *mut OptstopProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Discount rate of the problem.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn optstop_problem_alpha(problem: *const OptstopProblem, out: *mut f64) -> OptstopStatus {
    guard(|| {
        non_null!(problem, out);
        *out = (*problem).config.alpha;
        OptstopStatus::Ok
    })
}

/// Solves a problem with its own tolerances.
///
/// # Safety
/// `problem` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn optstop_solve(problem: *const OptstopProblem, out: *mut *mut OptstopSolution) -> OptstopStatus {
    guard(|| {
        non_null!(problem, out);
        *out = ptr::null_mut();
        let cfg = &(*problem).config;
        match cfg.build().and_then(|p| solve(&p, &cfg.tolerances, None)) {
            Ok(solved) => {
                *out = Box::into_raw(Box::new(OptstopSolution { solved }));
                OptstopStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Releases a solution. Null is ignored.
///
/// # Safety
/// `solution` must come from [`optstop_solve`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn optstop_solution_free(solution: *mut OptstopSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Value function `V(x)`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn optstop_solution_value(solution: *const OptstopSolution, x: f64, out: *mut f64) -> OptstopStatus {
    guard(|| {
        non_null!(solution, out);
        if !(*solution).solved.state().contains(x) {
            return fail(Error::OutOfDomain(x));
        }
        match (*solution).solved.value(x) {
            Ok(v) => {
                *out = v;
                OptstopStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Reward `g(x)`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn optstop_solution_reward(solution: *const OptstopSolution, x: f64, out: *mut f64) -> OptstopStatus {
    guard(|| {
        non_null!(solution, out);
        *out = (*solution).solved.g(x);
        OptstopStatus::Ok
    })
}

/// Writes 1 if `x` lies in the stopping region, 0 otherwise.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn optstop_solution_in_stopping(solution: *const OptstopSolution, x: f64, out: *mut i32) -> OptstopStatus {
    guard(|| {
        non_null!(solution, out);
        *out = i32::from((*solution).solved.in_stopping(x));
        OptstopStatus::Ok
    })
}

/// Finite boundary points of the stopping region, ascending.
///
/// `len` receives the number of points. With `capacity` below that count
/// nothing is copied and `BufferTooSmall` is returned; `buf` may be null
/// when `capacity` is 0.
///
/// # Safety
/// `buf` must hold `capacity` doubles; other pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn optstop_solution_boundaries(
    solution: *const OptstopSolution,
    buf: *mut f64,
    capacity: usize,
    len: *mut usize,
) -> OptstopStatus {
    guard(|| {
        non_null!(solution, len);
        let pts = (*solution).solved.boundaries();
        *len = pts.len();
        if capacity < pts.len() {
            set_error(format!("need room for {} boundary points", pts.len()));
            return OptstopStatus::BufferTooSmall;
        }
        if !pts.is_empty() {
            non_null!(buf);
            ptr::copy_nonoverlapping(pts.as_ptr(), buf, pts.len());
        }
        OptstopStatus::Ok
    })
}

/// Copies the last error message of this thread as a C string.
///
/// Returns the message length without the terminator; the copy is
/// truncated to `capacity - 1` bytes. Pass a null `buf` to query the length.
///
/// # Safety
/// `buf` must hold `capacity` bytes or be null.
#[no_mangle]
pub unsafe extern "C" fn optstop_last_error(buf: *mut c_char, capacity: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && capacity > 0 {
            let n = msg.len().min(capacity - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn optstop_status_str(status: OptstopStatus) -> *const c_char {
    let s: &'static CStr = match status {
        OptstopStatus::Ok => c"ok",
        OptstopStatus::NullPointer => c"null pointer",
        OptstopStatus::InvalidUtf8 => c"invalid UTF-8",
        OptstopStatus::Config => c"configuration error",
        OptstopStatus::Hypothesis => c"hypothesis violated",
        OptstopStatus::Numerical => c"numerical failure",
        OptstopStatus::Domain => c"outside the state space",
        OptstopStatus::BufferTooSmall => c"buffer too small",
        OptstopStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}

/// Library version as a static C string.
#[no_mangle]
pub extern "C" fn optstop_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
