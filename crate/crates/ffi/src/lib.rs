//! C interface to `pearcey_gap`.
//!
//! Every function returns a [`PgStatus`]; results travel through out-pointers. Models and
//! trajectories are opaque heap handles released by their `_free` function. After a
//! failure, [`pg_last_error`] copies the message of the most recent error on the calling
//! thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pearcey_gap::asymptotics::{f_asy, h_asy};
use pearcey_gap::dynamics::{integrate, seed_large_s, IntegrateOptions, Trajectory};
use pearcey_gap::fredholm::{build_grid, counting_moments, log_det, resolvent_diag_at_s};
use pearcey_gap::kernel::{ModelParams, PearceyModel};
use pearcey_gap::Error;

/// Outcome of a call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Numeric = 3,
    Accuracy = 4,
    Range = 5,
    Consistency = 6,
    Geometry = 7,
    Integration = 8,
    Usage = 9,
    Panic = 10,
}

/// Kernel model for one (α, ρ).
pub struct PgModel(PearceyModel);

/// Integrated Hamiltonian trajectory.
pub struct PgTrajectory(Trajectory);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> PgStatus {
    match e {
        Error::Domain(_) => PgStatus::Domain,
        Error::Numeric(_) => PgStatus::Numeric,
        Error::Accuracy(_) => PgStatus::Accuracy,
        Error::Range(_) => PgStatus::Range,
        Error::Consistency(_) => PgStatus::Consistency,
        Error::Geometry(_) => PgStatus::Geometry,
        Error::Integration { .. } => PgStatus::Integration,
        Error::Usage(_) => PgStatus::Usage,
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PgStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            PgStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            PgStatus::Panic
        }
    }
}

unsafe fn model_ref<'a>(m: *const PgModel) -> Result<&'a PearceyModel, Fail> {
    m.as_ref().map(|m| &m.0).ok_or(Fail::Null("model"))
}

unsafe fn write<T>(out: *mut T, v: T, what: &'static str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null(what));
    }
    out.write(v);
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pg_version() -> *const c_char {
    static V: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    V.as_ptr()
}

/// Copy the last error message of this thread into `buf` (NUL-terminated, truncated to
/// `len`). Returns the full message length in bytes, excluding the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn pg_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Create a model for α > −1 and real ρ.
///
/// # Safety
/// `out` must be a valid pointer; on success it receives a handle for [`pg_model_free`].
#[no_mangle]
pub unsafe extern "C" fn pg_model_new(alpha: f64, rho: f64, out: *mut *mut PgModel) -> PgStatus {
    guard(|| {
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let m = PearceyModel::new(ModelParams::new(alpha, rho)?)?;
        write(out, Box::into_raw(Box::new(PgModel(m))), "out")
    })
}

/// # Safety
/// `model` must be null or a handle from [`pg_model_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pg_model_free(model: *mut PgModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// γK(x, y) for x, y > 0 and γ ∈ (0, 1].
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pg_kernel(model: *const PgModel, x: f64, y: f64, gamma: f64, out: *mut f64) -> PgStatus {
    guard(|| {
        let m = model_ref(model)?;
        write(out, m.kernel(x, y, gamma)?, "out")
    })
}

/// F(s) = ln det(I − γK) on (0, s) with an m-node rule, and the change against m/2 nodes.
///
/// # Safety
/// `model` must be a live handle; `out_f` must be valid; `out_convergence` may be null.
#[no_mangle]
pub unsafe extern "C" fn pg_log_det(
    model: *const PgModel,
    s: f64,
    gamma: f64,
    m: usize,
    out_f: *mut f64,
    out_convergence: *mut f64,
) -> PgStatus {
    guard(|| {
        let d = log_det(model_ref(model)?, &build_grid(s, m)?, gamma)?;
        write(out_f, d.f, "out_f")?;
        if !out_convergence.is_null() {
            out_convergence.write(d.convergence_estimate);
        }
        Ok(())
    })
}

/// R(s, s), so that dF/ds = −R(s, s).
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pg_resolvent(model: *const PgModel, s: f64, gamma: f64, m: usize, out: *mut f64) -> PgStatus {
    guard(|| write(out, resolvent_diag_at_s(model_ref(model)?, &build_grid(s, m)?, gamma)?, "out"))
}

/// Mean and variance of the number of points in (0, s) at γ = 1.
///
/// # Safety
/// `model` must be a live handle; both out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pg_counting(
    model: *const PgModel,
    s: f64,
    m: usize,
    out_mean: *mut f64,
    out_var: *mut f64,
) -> PgStatus {
    guard(|| {
        let (mean, var) = counting_moments(model_ref(model)?, &build_grid(s, m)?)?;
        write(out_mean, mean, "out_mean")?;
        write(out_var, var, "out_var")
    })
}

/// Large-s expansion of F.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pg_f_asy(model: *const PgModel, s: f64, gamma: f64, out: *mut f64) -> PgStatus {
    guard(|| write(out, f_asy(s, gamma, &model_ref(model)?.params)?.total, "out"))
}

/// Large-s expansion of H = dF/ds, oscillating term included.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pg_h_asy(model: *const PgModel, s: f64, gamma: f64, out: *mut f64) -> PgStatus {
    guard(|| write(out, h_asy(s, gamma, &model_ref(model)?.params)?, "out"))
}

/// Seed at `s0` and integrate backward to `s1`, recording the `n` abscissae in `samples`.
///
/// # Safety
/// `model` must be a live handle, `samples` null (with `n == 0`) or `n` readable doubles,
/// and `out` a valid pointer; on success it receives a handle for [`pg_trajectory_free`].
#[no_mangle]
pub unsafe extern "C" fn pg_trajectory_new(
    model: *const PgModel,
    gamma: f64,
    s0: f64,
    s1: f64,
    samples: *const f64,
    n: usize,
    tolerance: f64,
    out: *mut *mut PgTrajectory,
) -> PgStatus {
    guard(|| {
        let p = model_ref(model)?.params;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let stops: &[f64] = if n == 0 {
            &[]
        } else if samples.is_null() {
            return Err(Fail::Null("samples"));
        } else {
            std::slice::from_raw_parts(samples, n)
        };
        let opts = IntegrateOptions { tolerance, ..Default::default() };
        let t = integrate(&seed_large_s(s0, gamma, &p)?, gamma, &p, s1, stops, &opts)?;
        write(out, Box::into_raw(Box::new(PgTrajectory(t))), "out")
    })
}

/// # Safety
/// `traj` must be null or a handle from [`pg_trajectory_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pg_trajectory_free(traj: *mut PgTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Number of samples, seed included; 0 for a null handle.
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pg_trajectory_len(traj: *const PgTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.samples.len())
}

/// Sample `i` in decreasing s: abscissa, H, and ∫_s^{s0} H.
///
/// # Safety
/// `traj` must be a live handle; the out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pg_trajectory_sample(
    traj: *const PgTrajectory,
    i: usize,
    out_s: *mut f64,
    out_h: *mut f64,
    out_integral: *mut f64,
) -> PgStatus {
    guard(|| {
        let t = &traj.as_ref().ok_or(Fail::Null("trajectory"))?.0;
        let smp = t
            .samples
            .get(i)
            .ok_or_else(|| Error::Domain(format!("sample {i} out of range (len {})", t.samples.len())))?;
        write(out_s, smp.state.s, "out_s")?;
        write(out_h, smp.h.re, "out_h")?;
        write(out_integral, smp.integral_from_seed.re, "out_integral")
    })
}
