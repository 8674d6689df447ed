//! C interface.
//!
//! Every fallible call returns a [`CywStatus`]; on anything but
//! `CYW_STATUS_OK` the message is available from [`cyw_last_error`] until the
//! next failing call on the same thread. Handles are opaque and released with
//! their `_free` function. Strings returned as `char *` are owned by the
//! caller and released with [`cyw_string_free`].

use cyw_core::cli::{execute, exit_code, named_sphere_function, Expr, RunConfig, RunOutcome};
use cyw_core::geometry::{build_preset, DimensionConstants, GeometrySpec, Mesh, ScalarField};
use cyw_core::operators::{assemble, first_eigenpair, yamabe_quotient, AssembledOperators, BcMode};
use cyw_core::sphere_tools::{check_condition_a, default_pair_tolerance, mesh_samples, Extension, SphereFunction, Verdict};
use cyw_core::CywError;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Status codes. Values 2 to 6 agree with the exit codes of the `cyw` binary.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CywStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Obstruction = 3,
    Gate = 4,
    Iteration = 5,
    Verification = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Boundary treatment for operator queries.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CywBoundary {
    Closed = 0,
    Robin = 1,
}

/// Outcome of the antipodal condition check.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CywVerdict {
    PassI = 0,
    PassII = 1,
    PassIII = 2,
    Fail = 3,
}

/// A preset mesh with its background metric.
pub struct CywMesh {
    mesh: Mesh,
    geom: GeometrySpec,
}

/// A finished configured run, successful or not.
pub struct CywRun {
    outcome: RunOutcome,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(code: i32) -> CywStatus {
    match code {
        0 => CywStatus::Ok,
        2 => CywStatus::Config,
        3 => CywStatus::Obstruction,
        4 => CywStatus::Gate,
        5 => CywStatus::Iteration,
        _ => CywStatus::Verification,
    }
}

fn fail(e: CywError) -> CywStatus {
    let s = status_of(exit_code(&e));
    set_error(e.to_string());
    s
}

fn guard(f: impl FnOnce() -> CywStatus) -> CywStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            CywStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, CywStatus> {
    if p.is_null() {
        set_error("null string argument");
        return Err(CywStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("string argument is not UTF-8");
        CywStatus::Config
    })
}

fn operators(m: &CywMesh, bc: CywBoundary) -> Result<AssembledOperators, CywError> {
    let mode = match bc {
        CywBoundary::Closed => BcMode::Closed,
        CywBoundary::Robin => BcMode::Robin,
    };
    assemble(&m.mesh, &m.geom, DimensionConstants::three(), mode)
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cyw_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cyw_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a preset (`round-s3`, `flat-t3`, `ball-negR`, `annulus`, `bump-t3`).
///
/// # Safety
/// `preset` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn cyw_mesh_new_preset(preset: *const c_char, refinement: u32, out: *mut *mut CywMesh) -> CywStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return CywStatus::NullPointer;
        }
        *out = std::ptr::null_mut();
        let name = match text(preset) {
            Ok(n) => n,
            Err(s) => return s,
        };
        match build_preset(name, refinement) {
            Ok((mesh, geom)) => {
                *out = Box::into_raw(Box::new(CywMesh { mesh, geom }));
                CywStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `mesh` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cyw_mesh_free(mesh: *mut CywMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Number of vertices, 0 for NULL.
///
/// # Safety
/// `mesh` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cyw_mesh_vertex_count(mesh: *const CywMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.mesh.vertex_count())
}

/// Chart coordinates of vertex `index` (three doubles, four on the sphere
/// preset) into `coords`, which holds `len` doubles. `written` receives the
/// coordinate count.
///
/// # Safety
/// `mesh` must be live, `coords` must hold `len` doubles and `written` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn cyw_mesh_vertex(
    mesh: *const CywMesh,
    index: usize,
    coords: *mut f64,
    len: usize,
    written: *mut usize,
) -> CywStatus {
    guard(|| {
        let Some(m) = mesh.as_ref() else {
            set_error("null mesh");
            return CywStatus::NullPointer;
        };
        if coords.is_null() || written.is_null() {
            set_error("null output pointer");
            return CywStatus::NullPointer;
        }
        if index >= m.mesh.vertex_count() {
            set_error(format!("vertex {index} out of range"));
            return CywStatus::Config;
        }
        let x = m.mesh.vertex(index);
        *written = x.len();
        if len < x.len() {
            set_error(format!("need {} doubles", x.len()));
            return CywStatus::BufferTooSmall;
        }
        std::ptr::copy_nonoverlapping(x.as_ptr(), coords, x.len());
        CywStatus::Ok
    })
}

/// First eigenvalue of the conformal Laplacian. When `eigenfunction` is not
/// NULL it receives the positive, mass-normalized eigenvector and must hold
/// `len ≥ vertex count` doubles.
///
/// # Safety
/// `mesh` must be live, `eigenvalue` writable, `eigenfunction` NULL or
/// holding `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cyw_first_eigenpair(
    mesh: *const CywMesh,
    bc: CywBoundary,
    eigenvalue: *mut f64,
    eigenfunction: *mut f64,
    len: usize,
) -> CywStatus {
    guard(|| {
        let Some(m) = mesh.as_ref() else {
            set_error("null mesh");
            return CywStatus::NullPointer;
        };
        if eigenvalue.is_null() {
            set_error("null output pointer");
            return CywStatus::NullPointer;
        }
        let n = m.mesh.vertex_count();
        if !eigenfunction.is_null() && len < n {
            set_error(format!("need {n} doubles"));
            return CywStatus::BufferTooSmall;
        }
        match operators(m, bc).and_then(|ops| first_eigenpair(&ops)) {
            Ok(e) => {
                *eigenvalue = e.eigenvalue;
                if !eigenfunction.is_null() {
                    std::ptr::copy_nonoverlapping(e.eigenfunction.values.as_ptr(), eigenfunction, n);
                }
                CywStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Discrete Yamabe quotient of `u` (`len` must equal the vertex count).
///
/// # Safety
/// `mesh` must be live, `u` must hold `len` doubles, `quotient` writable.
#[no_mangle]
pub unsafe extern "C" fn cyw_yamabe_quotient(
    mesh: *const CywMesh,
    bc: CywBoundary,
    u: *const f64,
    len: usize,
    quotient: *mut f64,
) -> CywStatus {
    guard(|| {
        let Some(m) = mesh.as_ref() else {
            set_error("null mesh");
            return CywStatus::NullPointer;
        };
        if u.is_null() || quotient.is_null() {
            set_error("null pointer argument");
            return CywStatus::NullPointer;
        }
        let values = std::slice::from_raw_parts(u, len).to_vec();
        let result = ScalarField::new(&m.mesh, values).and_then(|f| operators(m, bc).and_then(|ops| yamabe_quotient(&ops, &f)));
        match result {
            Ok(q) => {
                *quotient = q;
                CywStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Checks the antipodal condition for an expression in `x0..x3`, `tau`,
/// `xi` on the round-sphere preset at `refinement`. A failed condition is a
/// successful call with `CYW_VERDICT_FAIL`.
///
/// # Safety
/// `expression` must be a NUL-terminated string and `verdict` writable.
#[no_mangle]
pub unsafe extern "C" fn cyw_check_condition_a(expression: *const c_char, refinement: u32, verdict: *mut CywVerdict) -> CywStatus {
    guard(|| {
        if verdict.is_null() {
            set_error("null output pointer");
            return CywStatus::NullPointer;
        }
        let src = match text(expression) {
            Ok(s) => s,
            Err(s) => return s,
        };
        let run = || -> Result<Verdict, CywError> {
            let e = Expr::parse(named_sphere_function(src).unwrap_or(src)).map_err(|e| CywError::Config { line: 0, message: format!("in expression: {e}") })?;
            let (mesh, geom) = build_preset("round-s3", refinement)?;
            let samples = mesh_samples(&mesh)?;
            let q = SphereFunction::new(|x| e.eval(x), Extension::Ambient);
            Ok(check_condition_a(&q, &samples, default_pair_tolerance(&mesh, &geom))?.verdict)
        };
        match run() {
            Ok(v) => {
                *verdict = match v {
                    Verdict::PassI => CywVerdict::PassI,
                    Verdict::PassII => CywVerdict::PassII,
                    Verdict::PassIII => CywVerdict::PassIII,
                    Verdict::Fail => CywVerdict::Fail,
                };
                CywStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Runs the pipeline on a configuration file's text. The return value is
/// the run's status; `out` receives a handle whenever a report exists, even
/// on failure, so partial reports stay inspectable. Nothing is written to
/// disk.
///
/// # Safety
/// `config` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cyw_run_config(config: *const c_char, out: *mut *mut CywRun) -> CywStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return CywStatus::NullPointer;
        }
        *out = std::ptr::null_mut();
        let src = match text(config) {
            Ok(s) => s,
            Err(s) => return s,
        };
        let cfg = match RunConfig::parse(src) {
            Ok(c) => c,
            Err(e) => return fail(e),
        };
        let outcome = execute(&cfg);
        let status = status_of(outcome.exit_code);
        if let Some(e) = &outcome.error {
            set_error(e.clone());
        }
        if outcome.report.is_some() {
            *out = Box::into_raw(Box::new(CywRun { outcome }));
        }
        status
    })
}

/// # Safety
/// `run` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cyw_run_free(run: *mut CywRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Whether the run produced a verified solution. False for NULL.
///
/// # Safety
/// `run` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cyw_run_accepted(run: *const CywRun) -> bool {
    run.as_ref().and_then(|r| r.outcome.report.as_ref()).is_some_and(|r| r.accepted())
}

/// Report text without a timestamp line; free with [`cyw_string_free`].
/// NULL for a NULL handle.
///
/// # Safety
/// `run` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cyw_run_report(run: *const CywRun) -> *mut c_char {
    run.as_ref()
        .and_then(|r| r.outcome.report.as_ref())
        .and_then(|r| CString::new(r.to_text(None)).ok())
        .map_or(std::ptr::null_mut(), CString::into_raw)
}

/// Copies the solution `u` into `values` (holding `len` doubles). `written`
/// receives the vertex count, or 0 when the run has no solution.
///
/// # Safety
/// `run` must be live, `values` must hold `len` doubles, `written` writable.
#[no_mangle]
pub unsafe extern "C" fn cyw_run_solution(run: *const CywRun, values: *mut f64, len: usize, written: *mut usize) -> CywStatus {
    guard(|| {
        let Some(r) = run.as_ref() else {
            set_error("null run");
            return CywStatus::NullPointer;
        };
        if written.is_null() {
            set_error("null output pointer");
            return CywStatus::NullPointer;
        }
        let Some(u) = r.outcome.report.as_ref().and_then(|r| r.solution.as_ref()) else {
            *written = 0;
            return CywStatus::Ok;
        };
        *written = u.values.len();
        if values.is_null() || len < u.values.len() {
            set_error(format!("need {} doubles", u.values.len()));
            return CywStatus::BufferTooSmall;
        }
        std::ptr::copy_nonoverlapping(u.values.as_ptr(), values, u.values.len());
        CywStatus::Ok
    })
}
