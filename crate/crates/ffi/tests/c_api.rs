use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use ncpop_ctp_ffi::*;

const BALL_SUM: &str = r#"{"n": 2,
  "objective": [{"word": [1], "coeff": 1.0}, {"word": [2], "coeff": 1.0}],
  "ineq": [[{"word": [], "coeff": 1.0}, {"word": [1, 1], "coeff": -1.0}, {"word": [2, 2], "coeff": -1.0}]]}"#;

fn load(json: &str) -> (NcpopStatus, *mut NcpopProblem) {
    let text = CString::new(json).unwrap();
    let mut handle = ptr::null_mut();
    let status = unsafe { ncpop_problem_from_json(text.as_ptr(), &mut handle) };
    (status, handle)
}

fn last_error() -> String {
    let p = ncpop_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn count_certify_solve() {
    let (status, h) = load(BALL_SUM);
    assert_eq!(status, NcpopStatus::Ok);
    assert_eq!(unsafe { ncpop_problem_letters(h) }, 2);

    let mut stats = NcpopStats::default();
    assert_eq!(unsafe { ncpop_count(h, 1, NcpopMode::Eigenvalue, &mut stats) }, NcpopStatus::Ok);
    assert_eq!((stats.omega, stats.smax, stats.zeta), (2, 3, 2));
    assert_eq!(stats.amax, 2.0);

    let mut trace = 0.0;
    assert_eq!(unsafe { ncpop_certify(h, 2, NcpopMode::Trace, &mut trace) }, NcpopStatus::Ok);
    assert!((trace - 3.0).abs() < 1e-9);

    let mut res = NcpopSolveResult::default();
    let status = unsafe { ncpop_solve(h, 1, NcpopMode::Eigenvalue, 1e-4, 100_000, 0, &mut res) };
    assert_eq!(status, NcpopStatus::Ok);
    assert_eq!(res.converged, 1);
    assert!((res.value + 2f64.sqrt()).abs() < 5e-3 * 2f64.sqrt());
    unsafe { ncpop_problem_free(h) };
}

#[test]
fn errors_carry_codes_and_messages() {
    let (status, h) = load("{not json");
    assert_eq!(status, NcpopStatus::InvalidInput);
    assert!(h.is_null());
    assert!(!last_error().is_empty());

    let (status, h) = load(BALL_SUM);
    assert_eq!(status, NcpopStatus::Ok);
    let mut stats = NcpopStats::default();
    assert_eq!(unsafe { ncpop_count(h, 0, NcpopMode::Eigenvalue, &mut stats) }, NcpopStatus::InvalidInput);
    assert!(last_error().contains("order below k_min = 1"));
    assert_eq!(unsafe { ncpop_count(h, 1, NcpopMode::Eigenvalue, ptr::null_mut()) }, NcpopStatus::NullPointer);
    unsafe { ncpop_problem_free(h) };

    let (_, h) = load(r#"{"n": 1, "objective": [{"word": [1], "coeff": 1.0}],
        "ineq": [[{"word": [], "coeff": 1.0}]]}"#);
    let mut trace = 0.0;
    assert_eq!(unsafe { ncpop_certify(h, 1, NcpopMode::Eigenvalue, &mut trace) }, NcpopStatus::Uncertified);
    assert!(last_error().contains("CTP not certified"));
    unsafe { ncpop_problem_free(h) };

    unsafe { ncpop_problem_free(ptr::null_mut()) };
    assert_eq!(unsafe { ncpop_problem_letters(ptr::null()) }, 0);
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/ncpop_ctp.h");
    let src = format!("#include \"{header}\"\nint main(void) {{ NcpopStats s; (void)s; return ncpop_last_error_message() != 0; }}\n");
    let dir = std::env::temp_dir().join(format!("ncpop_ffi_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let file = dir.join("probe.c");
    std::fs::write(&file, src).unwrap();
    let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror"]).arg(&file).output() else {
        eprintln!("no C compiler; skipping header check");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
