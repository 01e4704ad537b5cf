//! C ABI over the solver.
//!
//! A `RhoSolver` is an opaque handle owning one Lagrangian state. Every
//! function returns a `RhoStatus`; on failure the message is kept per
//! thread and read back with `rho_last_error`. Panics never cross the
//! boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use rho_sphere::config::RunConfig;
use rho_sphere::integrator;
use rho_sphere::lagrangian::{self, LagrangianState};
use rho_sphere::reconstruction;
use rho_sphere::scenarios::{self, InitialKind, InitialSpec};
use rho_sphere::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    StepFailure = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// Opaque solver handle.
pub struct RhoSolver {
    state: LagrangianState,
    mu: f64,
    dt: f64,
    projection: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: RhoStatus, message: impl Into<String>) -> RhoStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = message.into());
    status
}

fn from_error(e: Error) -> RhoStatus {
    let status = match e {
        Error::StepFailure { .. } | Error::NonFinite { .. } | Error::ZeroNorm => RhoStatus::StepFailure,
        _ => RhoStatus::InvalidArgument,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> RhoStatus) -> RhoStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(RhoStatus::Panic, "internal panic"))
}

fn build(initial: &InitialSpec, dt: Option<f64>, projection: bool) -> Result<RhoSolver, RhoStatus> {
    let (data, state) = scenarios::initial_state(initial).map_err(from_error)?;
    let dt = dt.unwrap_or_else(|| integrator::default_dt(initial.n, lagrangian::energy(&state, data.mu)));
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(fail(RhoStatus::InvalidArgument, format!("dt = {dt} must be positive")));
    }
    Ok(RhoSolver { state, mu: data.mu, dt, projection })
}

unsafe fn emit(out: *mut *mut RhoSolver, solver: Result<RhoSolver, RhoStatus>) -> RhoStatus {
    match solver {
        Ok(s) => {
            *out = Box::into_raw(Box::new(s));
            RhoStatus::Ok
        }
        Err(status) => status,
    }
}

/// Creates a solver from configuration text in the CLI's `key = value`
/// format. Only the initial data, grid and integrator keys are used.
///
/// # Safety
/// `config` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rho_solver_new_from_config(config: *const c_char, out: *mut *mut RhoSolver) -> RhoStatus {
    guard(|| {
        if config.is_null() || out.is_null() {
            return fail(RhoStatus::NullPointer, "null argument");
        }
        *out = ptr::null_mut();
        let Ok(text) = CStr::from_ptr(config).to_str() else {
            return fail(RhoStatus::InvalidConfig, "configuration is not UTF-8");
        };
        let run = match RunConfig::parse(text) {
            Ok(r) => r,
            Err(e) => return fail(RhoStatus::InvalidConfig, e.to_string()),
        };
        emit(out, build(&run.initial, run.integrator.dt, run.integrator.projection))
    })
}

/// Creates a solver for `u0 = amplitude sin(2 pi wavenumber x)` on `n`
/// nodes. A non-positive `dt` selects the default step.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rho_solver_new_sine(
    n: usize,
    amplitude: f64,
    wavenumber: u32,
    dt: f64,
    out: *mut *mut RhoSolver,
) -> RhoStatus {
    guard(|| {
        if out.is_null() {
            return fail(RhoStatus::NullPointer, "null argument");
        }
        *out = ptr::null_mut();
        let spec = InitialSpec::new(InitialKind::Sine { amplitude, wavenumber }, n);
        emit(out, build(&spec, (dt > 0.0).then_some(dt), true))
    })
}

/// # Safety
/// `solver` must come from a constructor and not be used afterwards.
/// Null is accepted and ignored.
#[no_mangle]
pub unsafe extern "C" fn rho_solver_free(solver: *mut RhoSolver) {
    if !solver.is_null() {
        drop(Box::from_raw(solver));
    }
}

/// Advances `steps` RK4 steps. On failure the handle keeps the last good
/// state.
///
/// # Safety
/// `solver` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rho_solver_step(solver: *mut RhoSolver, steps: usize) -> RhoStatus {
    guard(|| {
        let Some(s) = solver.as_mut() else { return fail(RhoStatus::NullPointer, "null solver") };
        for i in 0..steps {
            let mut next = match integrator::rk4_step(&s.state, s.mu, s.dt) {
                Ok(n) => n,
                Err(e) => return from_error(e),
            };
            if s.projection {
                next = match integrator::project(&next) {
                    Ok(n) => n,
                    Err(e) => return from_error(e),
                };
            }
            if !next.is_finite() {
                return fail(RhoStatus::StepFailure, format!("non-finite state after step {}", i + 1));
            }
            s.state = next;
        }
        RhoStatus::Ok
    })
}

/// # Safety
/// `solver` must be a live handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn rho_solver_n(solver: *const RhoSolver) -> usize {
    solver.as_ref().map_or(0, |s| s.state.n())
}

/// # Safety
/// `solver` must be a live handle or null (which yields NaN).
#[no_mangle]
pub unsafe extern "C" fn rho_solver_time(solver: *const RhoSolver) -> f64 {
    solver.as_ref().map_or(f64::NAN, |s| s.state.t)
}

/// # Safety
/// `solver` must be a live handle or null (which yields NaN).
#[no_mangle]
pub unsafe extern "C" fn rho_solver_dt(solver: *const RhoSolver) -> f64 {
    solver.as_ref().map_or(f64::NAN, |s| s.dt)
}

/// # Safety
/// `solver` must be a live handle or null (which yields NaN).
#[no_mangle]
pub unsafe extern "C" fn rho_solver_mu(solver: *const RhoSolver) -> f64 {
    solver.as_ref().map_or(f64::NAN, |s| s.mu)
}

/// `quad(rho^2 G^2 + 4 rho_t^2)` of the current state.
///
/// # Safety
/// `solver` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rho_solver_energy(solver: *const RhoSolver, out: *mut f64) -> RhoStatus {
    guard(|| {
        let (Some(s), false) = (solver.as_ref(), out.is_null()) else {
            return fail(RhoStatus::NullPointer, "null argument");
        };
        *out = lagrangian::energy(&s.state, s.mu);
        RhoStatus::Ok
    })
}

unsafe fn copy_out(values: &[f64], buf: *mut f64, len: usize) -> RhoStatus {
    if buf.is_null() {
        return fail(RhoStatus::NullPointer, "null buffer");
    }
    if len < values.len() {
        return fail(RhoStatus::BufferTooSmall, format!("buffer holds {len}, need {}", values.len()));
    }
    slice::from_raw_parts_mut(buf, values.len()).copy_from_slice(values);
    RhoStatus::Ok
}

/// Copies `rho` into `buf`, which must hold `rho_solver_n` values.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rho_solver_copy_rho(solver: *const RhoSolver, buf: *mut f64, len: usize) -> RhoStatus {
    guard(|| match solver.as_ref() {
        Some(s) => copy_out(s.state.rho.values(), buf, len),
        None => fail(RhoStatus::NullPointer, "null solver"),
    })
}

/// Copies `rho_t` into `buf`, which must hold `rho_solver_n` values.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rho_solver_copy_rho_t(solver: *const RhoSolver, buf: *mut f64, len: usize) -> RhoStatus {
    guard(|| match solver.as_ref() {
        Some(s) => copy_out(s.state.rho_t.values(), buf, len),
        None => fail(RhoStatus::NullPointer, "null solver"),
    })
}

/// Eulerian `u` and `u_x` on `m` equispaced nodes (`m` a power of two,
/// at least 16). `u_x` is clamped to `+-1/flat_eps` where the flow map is
/// flat.
///
/// # Safety
/// `u` and `ux` must each point to `m` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rho_solver_eulerian(
    solver: *const RhoSolver,
    m: usize,
    flat_eps: f64,
    u: *mut f64,
    ux: *mut f64,
) -> RhoStatus {
    guard(|| {
        let Some(s) = solver.as_ref() else { return fail(RhoStatus::NullPointer, "null solver") };
        let field = match reconstruction::eulerian_velocity(&s.state, s.mu, m, flat_eps) {
            Ok(f) => f,
            Err(e) => return from_error(e),
        };
        match copy_out(field.u.values(), u, m) {
            RhoStatus::Ok => copy_out(field.ux.values(), ux, m),
            other => other,
        }
    })
}

/// Copies the calling thread's last error message into `buf` (truncated,
/// always NUL-terminated when `cap > 0`) and returns its full length.
///
/// # Safety
/// `buf` must point to `cap` writable bytes, or be null with `cap = 0`.
#[no_mangle]
pub unsafe extern "C" fn rho_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Static version string.
#[no_mangle]
pub extern "C" fn rho_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
