use std::ffi::CStr;
use std::ptr;

use pearcey_gap_ffi::*;

fn model(a: f64, r: f64) -> *mut PgModel {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { pg_model_new(a, r, &mut m) }, PgStatus::Ok);
    m
}

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let n = unsafe { pg_last_error(buf.as_mut_ptr(), buf.len()) };
    let s = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_owned();
    assert_eq!(s.len(), n.min(255));
    s
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(pg_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn determinant_and_expansions() {
    let m = model(0.0, 0.0);
    let (mut f, mut conv, mut fa) = (0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(pg_log_det(m, 60.0, 0.5, 160, &mut f, &mut conv), PgStatus::Ok);
        assert_eq!(pg_log_det(m, 60.0, 0.5, 160, &mut f, ptr::null_mut()), PgStatus::Ok);
        assert_eq!(pg_f_asy(m, 60.0, 0.5, &mut fa), PgStatus::Ok);
    }
    assert!(conv < 1e-9);
    assert!((f - fa).abs() * 60f64.cbrt() < 0.5);
    let (mut r, mut h) = (0.0, 0.0);
    unsafe {
        assert_eq!(pg_resolvent(m, 60.0, 0.5, 240, &mut r), PgStatus::Ok);
        assert_eq!(pg_h_asy(m, 60.0, 0.5, &mut h), PgStatus::Ok);
    }
    assert!((r + h).abs() < 3.0 * 60f64.powf(-4.0 / 3.0));
    let (mut mean, mut var) = (0.0, 0.0);
    assert_eq!(unsafe { pg_counting(m, 100.0, 320, &mut mean, &mut var) }, PgStatus::Ok);
    assert!((mean - 8.91).abs() < 0.1 && (var - 0.347).abs() < 0.03);
    unsafe { pg_model_free(m) };
}

#[test]
fn kernel_value() {
    let m = model(0.5, 1.0);
    let mut k = 0.0;
    assert_eq!(unsafe { pg_kernel(m, 2.0, 2.0, 1.0, &mut k) }, PgStatus::Ok);
    let direct = pearcey_gap::kernel::kernel(2.0, 2.0, &pearcey_gap::kernel::ModelParams::new(0.5, 1.0).unwrap(), 1.0).unwrap();
    assert_eq!(k, direct);
    unsafe { pg_model_free(m) };
}

#[test]
fn errors_carry_codes_and_messages() {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { pg_model_new(-1.5, 0.0, &mut m) }, PgStatus::Domain);
    assert!(m.is_null());
    assert!(last_error().starts_with("domain error"));
    assert_eq!(unsafe { pg_model_new(0.0, 0.0, ptr::null_mut()) }, PgStatus::NullPointer);
    assert!(last_error().contains("null"));
    let mut k = 0.0;
    assert_eq!(unsafe { pg_kernel(ptr::null(), 1.0, 1.0, 1.0, &mut k) }, PgStatus::NullPointer);
    let m = model(0.0, 0.0);
    assert_eq!(unsafe { pg_kernel(m, -1.0, 1.0, 1.0, &mut k) }, PgStatus::Domain);
    assert_eq!(unsafe { pg_kernel(m, 1.0, 1.0, 1.0, ptr::null_mut()) }, PgStatus::NullPointer);
    // short buffers are truncated but still terminated
    let mut tiny = [1 as std::ffi::c_char; 4];
    let n = unsafe { pg_last_error(tiny.as_mut_ptr(), tiny.len()) };
    assert!(n > 3 && tiny[3] == 0);
    unsafe {
        pg_model_free(m);
        pg_model_free(ptr::null_mut());
        pg_trajectory_free(ptr::null_mut());
    }
}

#[test]
fn trajectory_round_trip() {
    let m = model(0.0, 0.0);
    let stops = [9000.0, 8000.0];
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { pg_trajectory_new(m, 0.5, 1e4, 7000.0, stops.as_ptr(), 2, 1e-10, &mut t) }, PgStatus::Ok);
    let n = unsafe { pg_trajectory_len(t) };
    assert_eq!(n, 4);
    let (mut s, mut h, mut int) = (0.0, 0.0, 0.0);
    let mut prev = f64::INFINITY;
    for i in 0..n {
        assert_eq!(unsafe { pg_trajectory_sample(t, i, &mut s, &mut h, &mut int) }, PgStatus::Ok);
        assert!(s < prev);
        prev = s;
        assert!(h < 0.0);
    }
    assert!(int < 0.0);
    assert_eq!(unsafe { pg_trajectory_sample(t, n, &mut s, &mut h, &mut int) }, PgStatus::Domain);
    assert_eq!(unsafe { pg_trajectory_len(ptr::null()) }, 0);
    let mut bad = ptr::null_mut();
    assert_eq!(unsafe { pg_trajectory_new(m, 0.5, 1e4, 2e4, ptr::null(), 0, 1e-10, &mut bad) }, PgStatus::Domain);
    unsafe {
        pg_trajectory_free(t);
        pg_model_free(m);
    }
}

#[test]
fn header_declares_every_export() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/pearcey_gap.h")).unwrap();
    for f in [
        "pg_version", "pg_last_error", "pg_model_new", "pg_model_free", "pg_kernel", "pg_log_det", "pg_resolvent",
        "pg_counting", "pg_f_asy", "pg_h_asy", "pg_trajectory_new", "pg_trajectory_free", "pg_trajectory_len",
        "pg_trajectory_sample",
    ] {
        assert!(h.contains(&format!("{f}(")), "{f}");
    }
    assert!(h.contains("PG_STATUS_OK = 0"));
}
