//! C interface to `ncpop-ctp`.
//!
//! Problems are opaque handles created from instance JSON and released with
//! [`ncpop_problem_free`]. Every fallible call returns an [`NcpopStatus`];
//! on failure the message is available from [`ncpop_last_error_message`]
//! until the next failing call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ncpop_ctp::cgal::{CgalConfig, CgalStatus};
use ncpop_ctp::ctp::CertifyOptions;
use ncpop_ctp::instance::InstanceFile;
use ncpop_ctp::pipeline::{self, Mode};
use ncpop_ctp::{Error, Problem};

/// Status codes; the nonzero values match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NcpopStatus {
    Ok = 0,
    InvalidInput = 1,
    Numerical = 2,
    Uncertified = 3,
    NullPointer = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NcpopMode {
    Eigenvalue = 0,
    Trace = 1,
}

impl From<NcpopMode> for Mode {
    fn from(m: NcpopMode) -> Mode {
        match m {
            NcpopMode::Eigenvalue => Mode::Eig,
            NcpopMode::Trace => Mode::Trace,
        }
    }
}

/// Opaque problem handle.
pub struct NcpopProblem {
    problem: Problem,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NcpopStats {
    pub omega: usize,
    pub smax: usize,
    pub zeta: usize,
    pub amax: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NcpopSolveResult {
    pub value: f64,
    pub residual: f64,
    pub dual_bound: f64,
    pub iterations: usize,
    pub time_secs: f64,
    /// 1 if the stopping criterion was met, 0 at the iteration limit.
    pub converged: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> NcpopStatus {
    match e {
        Error::NotCertified(_) | Error::PatternNotRecognized | Error::CertificateMismatch(_) => {
            NcpopStatus::Uncertified
        }
        Error::EigenNonConvergence(_) | Error::NonFiniteGradient(_) => NcpopStatus::Numerical,
        _ => NcpopStatus::InvalidInput,
    }
}

fn guard(f: impl FnOnce() -> Result<(), Error>) -> NcpopStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NcpopStatus::Ok,
        Ok(Err(e)) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            NcpopStatus::Panic
        }
    }
}

fn null_error(name: &str) -> NcpopStatus {
    set_error(format!("{name} is null"));
    NcpopStatus::NullPointer
}

/// Parses an instance JSON document into a new handle stored in `*out`.
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ncpop_problem_from_json(
    json: *const c_char,
    out: *mut *mut NcpopProblem,
) -> NcpopStatus {
    if json.is_null() {
        return null_error("json");
    }
    if out.is_null() {
        return null_error("out");
    }
    *out = ptr::null_mut();
    let text = match CStr::from_ptr(json).to_str() {
        Ok(t) => t,
        Err(_) => {
            set_error("json is not valid UTF-8".into());
            return NcpopStatus::InvalidInput;
        }
    };
    guard(|| {
        let problem = InstanceFile::from_json(text)?.to_problem()?;
        *out = Box::into_raw(Box::new(NcpopProblem { problem }));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `problem` must come from [`ncpop_problem_from_json`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ncpop_problem_free(problem: *mut NcpopProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Number of letters of the problem, or 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ncpop_problem_letters(problem: *const NcpopProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.problem.n)
}

/// SDP sizes for relaxation order `order`.
///
/// # Safety
/// `problem` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ncpop_count(
    problem: *const NcpopProblem,
    order: usize,
    mode: NcpopMode,
    out: *mut NcpopStats,
) -> NcpopStatus {
    let (Some(p), false) = (problem.as_ref(), out.is_null()) else {
        return null_error(if problem.is_null() { "problem" } else { "out" });
    };
    guard(|| {
        let prep = pipeline::prepare(&p.problem, order, mode.into(), &CertifyOptions::default())?;
        let s = prep.stats();
        *out = NcpopStats {
            omega: s.omega,
            smax: s.smax,
            zeta: s.zeta,
            amax: s.amax,
        };
        Ok(())
    })
}

/// Certifies the constant trace property; the total trace goes to `*trace`.
///
/// # Safety
/// `problem` must be a live handle and `trace` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ncpop_certify(
    problem: *const NcpopProblem,
    order: usize,
    mode: NcpopMode,
    trace: *mut f64,
) -> NcpopStatus {
    let (Some(p), false) = (problem.as_ref(), trace.is_null()) else {
        return null_error(if problem.is_null() { "problem" } else { "trace" });
    };
    guard(|| {
        let prep = pipeline::prepare(&p.problem, order, mode.into(), &CertifyOptions::default())?;
        *trace = prep.cert.trace();
        Ok(())
    })
}

/// Builds, certifies and solves. Reaching the iteration limit is not an
/// error; check `converged`.
///
/// # Safety
/// `problem` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ncpop_solve(
    problem: *const NcpopProblem,
    order: usize,
    mode: NcpopMode,
    eps: f64,
    max_iters: usize,
    seed: u64,
    out: *mut NcpopSolveResult,
) -> NcpopStatus {
    let (Some(p), false) = (problem.as_ref(), out.is_null()) else {
        return null_error(if problem.is_null() { "problem" } else { "out" });
    };
    if eps.is_nan() || eps <= 0.0 || max_iters == 0 {
        set_error("eps must be positive and max_iters nonzero".into());
        return NcpopStatus::InvalidInput;
    }
    guard(|| {
        let cfg = CgalConfig {
            eps,
            max_iters,
            seed,
            ..CgalConfig::default()
        };
        let res = pipeline::solve(&p.problem, order, mode.into(), &cfg, &CertifyOptions::default())?;
        *out = NcpopSolveResult {
            value: res.report.objective,
            residual: res.report.residual,
            dual_bound: res.report.dual_bound,
            iterations: res.report.iterations,
            time_secs: res.report.time_secs,
            converged: (res.report.status == CgalStatus::Converged) as i32,
        };
        Ok(())
    })
}

/// Message of the last failure on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ncpop_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}
