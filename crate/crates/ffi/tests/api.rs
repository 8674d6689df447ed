//! The C entry points, called from Rust.

use cyw_ffi::*;
use std::ffi::{CStr, CString};
use std::ptr;

fn last_error() -> String {
    let p = cyw_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn mesh(preset: &str, r: u32) -> *mut CywMesh {
    let name = CString::new(preset).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { cyw_mesh_new_preset(name.as_ptr(), r, &mut out) }, CywStatus::Ok);
    assert!(!out.is_null());
    out
}

#[test]
fn preset_handle_and_vertices() {
    let m = mesh("flat-t3", 0);
    let n = unsafe { cyw_mesh_vertex_count(m) };
    assert_eq!(n, 64);
    let mut x = [0.0; 4];
    let mut written = 0;
    assert_eq!(unsafe { cyw_mesh_vertex(m, 5, x.as_mut_ptr(), 4, &mut written) }, CywStatus::Ok);
    assert_eq!(written, 3);
    assert_eq!(unsafe { cyw_mesh_vertex(m, 5, x.as_mut_ptr(), 2, &mut written) }, CywStatus::BufferTooSmall);
    assert_eq!(unsafe { cyw_mesh_vertex(m, n, x.as_mut_ptr(), 4, &mut written) }, CywStatus::Config);
    assert!(last_error().contains("out of range"));
    unsafe { cyw_mesh_free(m) };
}

#[test]
fn unknown_preset_sets_the_error_string() {
    let name = CString::new("klein-bottle").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { cyw_mesh_new_preset(name.as_ptr(), 0, &mut out) }, CywStatus::Config);
    assert!(out.is_null());
    assert!(last_error().contains("unknown preset"));
    assert_eq!(unsafe { cyw_mesh_new_preset(ptr::null(), 0, &mut out) }, CywStatus::NullPointer);
}

#[test]
fn null_handles_are_harmless() {
    unsafe {
        cyw_mesh_free(ptr::null_mut());
        cyw_run_free(ptr::null_mut());
        cyw_string_free(ptr::null_mut());
        assert_eq!(cyw_mesh_vertex_count(ptr::null()), 0);
        assert!(!cyw_run_accepted(ptr::null()));
        assert!(cyw_run_report(ptr::null()).is_null());
        let mut e = 0.0;
        assert_eq!(cyw_first_eigenpair(ptr::null(), CywBoundary::Closed, &mut e, ptr::null_mut(), 0), CywStatus::NullPointer);
    }
}

#[test]
fn sphere_eigenpair_and_quotient() {
    let m = mesh("round-s3", 0);
    let n = unsafe { cyw_mesh_vertex_count(m) };
    let mut eta = 0.0;
    let mut phi = vec![0.0; n];
    assert_eq!(unsafe { cyw_first_eigenpair(m, CywBoundary::Closed, &mut eta, phi.as_mut_ptr(), n) }, CywStatus::Ok);
    assert!((eta - 6.0).abs() < 1e-8);
    assert!(phi.iter().all(|&v| v > 0.0));
    assert_eq!(unsafe { cyw_first_eigenpair(m, CywBoundary::Closed, &mut eta, phi.as_mut_ptr(), n - 1) }, CywStatus::BufferTooSmall);

    let ones = vec![1.0; n];
    let mut q = 0.0;
    assert_eq!(unsafe { cyw_yamabe_quotient(m, CywBoundary::Closed, ones.as_ptr(), n, &mut q) }, CywStatus::Ok);
    assert!(q > 0.0);
    assert_ne!(unsafe { cyw_yamabe_quotient(m, CywBoundary::Closed, ones.as_ptr(), n - 1, &mut q) }, CywStatus::Ok);
    unsafe { cyw_mesh_free(m) };
}

#[test]
fn condition_verdicts() {
    let mut v = CywVerdict::Fail;
    let even = CString::new("tau^2").unwrap();
    assert_eq!(unsafe { cyw_check_condition_a(even.as_ptr(), 0, &mut v) }, CywStatus::Ok);
    assert_eq!(v, CywVerdict::PassI);
    let odd = CString::new("tau").unwrap();
    assert_eq!(unsafe { cyw_check_condition_a(odd.as_ptr(), 0, &mut v) }, CywStatus::Ok);
    assert_eq!(v, CywVerdict::Fail);
    let bad = CString::new("tau +").unwrap();
    assert_eq!(unsafe { cyw_check_condition_a(bad.as_ptr(), 0, &mut v) }, CywStatus::Config);
}

#[test]
fn configured_runs() {
    let ok = CString::new("preset = round-s3\nrefinement = 0\n[target]\nvalue = 6\n").unwrap();
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { cyw_run_config(ok.as_ptr(), &mut run) }, CywStatus::Ok);
    assert!(unsafe { cyw_run_accepted(run) });
    let text = unsafe { cyw_run_report(run) };
    assert!(unsafe { CStr::from_ptr(text) }.to_str().unwrap().starts_with("CYWREPORT 1\npreset round-s3\n"));
    unsafe { cyw_string_free(text) };
    let mut written = 0;
    assert_eq!(unsafe { cyw_run_solution(run, ptr::null_mut(), 0, &mut written) }, CywStatus::BufferTooSmall);
    let mut u = vec![0.0; written];
    assert_eq!(unsafe { cyw_run_solution(run, u.as_mut_ptr(), written, &mut written) }, CywStatus::Ok);
    assert!(u.iter().all(|&x| (x - 1.0).abs() < 1e-9));
    unsafe { cyw_run_free(run) };

    let refused = CString::new("preset = round-s3\nrefinement = 0\n[target]\nkind = sphere\nexpression = tau\n").unwrap();
    assert_eq!(unsafe { cyw_run_config(refused.as_ptr(), &mut run) }, CywStatus::Obstruction);
    assert!(!run.is_null());
    assert!(!unsafe { cyw_run_accepted(run) });
    unsafe { cyw_run_free(run) };

    let broken = CString::new("preset = round-s3\nrefinement = two\n").unwrap();
    assert_eq!(unsafe { cyw_run_config(broken.as_ptr(), &mut run) }, CywStatus::Config);
    assert!(run.is_null());
    assert!(last_error().contains("line 2"));
}

#[test]
fn generated_header_declares_the_api_and_compiles() {
    let dir = env!("CARGO_MANIFEST_DIR");
    let header = std::fs::read_to_string(format!("{dir}/include/cyw.h")).unwrap();
    for name in [
        "cyw_last_error",
        "cyw_string_free",
        "cyw_mesh_new_preset",
        "cyw_mesh_free",
        "cyw_mesh_vertex_count",
        "cyw_mesh_vertex",
        "cyw_first_eigenpair",
        "cyw_yamabe_quotient",
        "cyw_check_condition_a",
        "cyw_run_config",
        "cyw_run_free",
        "cyw_run_accepted",
        "cyw_run_report",
        "cyw_run_solution",
        "typedef struct CywMesh CywMesh;",
        "CYW_STATUS_OBSTRUCTION = 3",
    ] {
        assert!(header.contains(name), "{name}");
    }
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let Ok(out) = std::process::Command::new(&cc)
        .args(["-fsyntax-only", "-Wall", "-Werror", "-I", &format!("{dir}/include"), &format!("{dir}/tests/smoke.c")])
        .output()
    else {
        eprintln!("no C compiler available, header syntax not checked");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
