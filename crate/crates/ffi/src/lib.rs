//! C interface to the hqcp planner.
//!
//! Problems and plan results are opaque handles owned by the caller and
//! released with their `_free` function. Functions return an
//! [`HqcpStatus`]; on failure [`hqcp_last_error_message`] describes the
//! error. Strings returned by the library are released with
//! [`hqcp_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use hqcp::dsl::{parse_domain, parse_problem, serialize_plan, PlanFormat};
use hqcp::model::Problem;
use hqcp::planner::{plan, PlanResult, PlannerConfig};
use hqcp::simulate::simulate;
use hqcp::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HqcpStatus {
    Ok = 0,
    /// The planner proved that no plan exists.
    PlanningFailure = 1,
    /// Malformed or invalid input text.
    InputError = 2,
    InternalError = 3,
    NullArgument = 4,
}

/// A parsed problem together with its domain.
pub struct HqcpProblem {
    problem: Problem,
}

/// The outcome of a successful planning call.
pub struct HqcpPlanResult {
    result: PlanResult,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn fail(status: HqcpStatus, message: &str) -> HqcpStatus {
    set_error(message);
    status
}

fn from_error(e: &Error) -> HqcpStatus {
    let status = if e.is_input_error() {
        HqcpStatus::InputError
    } else {
        HqcpStatus::InternalError
    };
    fail(status, &e.to_string())
}

fn guarded(body: impl FnOnce() -> HqcpStatus) -> HqcpStatus {
    catch_unwind(AssertUnwindSafe(body))
        .unwrap_or_else(|_| fail(HqcpStatus::InternalError, "internal panic"))
}

unsafe fn text<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, HqcpStatus> {
    if ptr.is_null() {
        return Err(fail(HqcpStatus::NullArgument, &format!("{what} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| fail(HqcpStatus::InputError, &format!("{what} is not UTF-8")))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message of the last failed call on this thread. Valid until the next
/// call into the library on the same thread; never null.
#[no_mangle]
pub extern "C" fn hqcp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses domain and problem text into a new problem handle.
///
/// # Safety
/// `domain` and `problem` must be null or NUL-terminated strings; `out`
/// must be null or point to writable storage for a pointer.
#[no_mangle]
pub unsafe extern "C" fn hqcp_problem_load(
    domain: *const c_char,
    problem: *const c_char,
    out: *mut *mut HqcpProblem,
) -> HqcpStatus {
    guarded(|| {
        if out.is_null() {
            return fail(HqcpStatus::NullArgument, "out is null");
        }
        *out = ptr::null_mut();
        let (domain, problem) = match (text(domain, "domain"), text(problem, "problem")) {
            (Ok(d), Ok(p)) => (d, p),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        let parsed = parse_domain(domain).and_then(|d| parse_problem(problem, Arc::new(d)));
        match parsed {
            Ok(problem) => {
                *out = Box::into_raw(Box::new(HqcpProblem { problem }));
                HqcpStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// # Safety
/// `problem` must be null or a handle from [`hqcp_problem_load`] not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn hqcp_problem_free(problem: *mut HqcpProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Plans for `problem`. Returns `Ok` with a result handle in `out`, or
/// `PlanningFailure` with `out` set to null when no plan exists.
///
/// # Safety
/// `problem` must be a live handle and `out` writable, or null.
#[no_mangle]
pub unsafe extern "C" fn hqcp_plan(
    problem: *const HqcpProblem,
    allow_null_branches: bool,
    out: *mut *mut HqcpPlanResult,
) -> HqcpStatus {
    guarded(|| {
        if problem.is_null() || out.is_null() {
            return fail(HqcpStatus::NullArgument, "problem or out is null");
        }
        *out = ptr::null_mut();
        let config = PlannerConfig {
            allow_null_branches,
            ..PlannerConfig::default()
        };
        match plan(&(*problem).problem, &config) {
            Ok(result) if result.is_plan() => {
                *out = Box::into_raw(Box::new(HqcpPlanResult { result }));
                HqcpStatus::Ok
            }
            Ok(_) => fail(HqcpStatus::PlanningFailure, "no plan exists"),
            Err(e) => from_error(&e),
        }
    })
}

/// # Safety
/// `result` must be null or a handle from [`hqcp_plan`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hqcp_result_free(result: *mut HqcpPlanResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Worst-case plan cost, or a negative value for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hqcp_result_cost(result: *const HqcpPlanResult) -> f64 {
    result
        .as_ref()
        .and_then(|r| r.result.cost())
        .map_or(-1.0, |c| c.to_f64())
}

/// Instantiations made by the search.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hqcp_result_nodes(result: *const HqcpPlanResult) -> u64 {
    result.as_ref().map_or(0, |r| r.result.stats.nodes)
}

/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hqcp_result_backtracks(result: *const HqcpPlanResult) -> u64 {
    result.as_ref().map_or(0, |r| r.result.stats.backtracks)
}

/// The plan as a JSON document, or as the indented tree when `json` is
/// false. Free with [`hqcp_string_free`]. Null for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hqcp_result_plan(
    result: *const HqcpPlanResult,
    json: bool,
) -> *mut c_char {
    let Some(plan) = result.as_ref().and_then(|r| r.result.plan()) else {
        set_error("result is null");
        return ptr::null_mut();
    };
    let format = if json {
        PlanFormat::Json
    } else {
        PlanFormat::Tree
    };
    into_c_string(serialize_plan(plan, format))
}

/// Simulates the plan of `result` and writes the JSON report to `out`.
///
/// # Safety
/// Handles must be live and `out` writable, or null.
#[no_mangle]
pub unsafe extern "C" fn hqcp_simulate(
    problem: *const HqcpProblem,
    result: *const HqcpPlanResult,
    samples: u64,
    seed: u64,
    out: *mut *mut c_char,
) -> HqcpStatus {
    guarded(|| {
        if problem.is_null() || result.is_null() || out.is_null() {
            return fail(HqcpStatus::NullArgument, "problem, result or out is null");
        }
        *out = ptr::null_mut();
        let Some(plan) = (*result).result.plan() else {
            return fail(HqcpStatus::InputError, "result holds no plan");
        };
        match simulate(plan, &(*problem).problem, samples, seed) {
            Ok(report) => match serde_json::to_string(&report) {
                Ok(json) => {
                    *out = into_c_string(json);
                    HqcpStatus::Ok
                }
                Err(e) => fail(HqcpStatus::InternalError, &e.to_string()),
            },
            Err(e) => from_error(&e),
        }
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hqcp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
