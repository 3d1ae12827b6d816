//! C ABI over `dnp-core`.
//!
//! A problem is built from a TOML configuration string and handed out as an
//! opaque `DnpProblem*`. Fields are plain `double` arrays of length
//! `dnp_problem_node_count`, ordered like the mesh nodes. Every function
//! returns a `DnpStatus`; on failure `dnp_last_error_message` describes the
//! cause for the calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dnp_core::harness::{prepare, run_experiment, Experiment};
use dnp_core::mesh::DiscreteField;
use dnp_core::rothe::rothe_step;
use dnp_core::solver::{apply_k, SolveOptions};
use dnp_core::steady::{compute_extremal_solutions, verify_solution};
use dnp_core::Error;

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DnpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Construction = 4,
    Domain = 5,
    Shape = 6,
    Numeric = 7,
    Structural = 8,
    Panic = 9,
}

/// An experiment: mesh, flux operator and source built from a configuration.
pub struct DnpProblem {
    exp: Experiment,
}

/// Residuals of a candidate steady state.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DnpResidual {
    /// Largest nodal weak-form residual, normalized by the nodal mass.
    pub weak_residual: f64,
    /// `|∫ f(x, U)|`.
    pub mean_zero_defect: f64,
    /// `|Ω| · max |f|`.
    pub mean_zero_scale: f64,
    /// Distance of the field from the source's band.
    pub band_violation: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let clean = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = clean);
}

fn status_of(e: &Error) -> DnpStatus {
    match e {
        Error::Config(_) => DnpStatus::Config,
        Error::Construction(_) => DnpStatus::Construction,
        Error::Domain(_) => DnpStatus::Domain,
        Error::Shape { .. } => DnpStatus::Shape,
        Error::Numeric(_) => DnpStatus::Numeric,
        Error::Structural(_) => DnpStatus::Structural,
    }
}

struct Fail(DnpStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DnpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            DnpStatus::Ok
        }
        Ok(Err(Fail(code, msg))) => {
            set_error(&msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            DnpStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(DnpStatus::NullPointer, format!("{what} is null"))
}

unsafe fn problem<'a>(p: *const DnpProblem) -> Result<&'a DnpProblem, Fail> {
    p.as_ref().ok_or_else(|| null("problem"))
}

unsafe fn input(p: &DnpProblem, data: *const f64, len: usize) -> Result<DiscreteField, Fail> {
    let n = p.exp.model.node_count();
    if data.is_null() {
        return Err(null("input field"));
    }
    if len != n {
        return Err(Error::Shape { what: "input field", expected: n, got: len }.into());
    }
    Ok(DiscreteField::new(std::slice::from_raw_parts(data, len).to_vec()))
}

unsafe fn output(p: &DnpProblem, out: *mut f64, len: usize, field: &DiscreteField) -> Result<(), Fail> {
    let n = p.exp.model.node_count();
    if out.is_null() {
        return Err(null("output buffer"));
    }
    if len != n {
        return Err(Error::Shape { what: "output buffer", expected: n, got: len }.into());
    }
    std::slice::from_raw_parts_mut(out, len).copy_from_slice(&field.values);
    Ok(())
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn dnp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a problem from a NUL-terminated TOML configuration.
///
/// # Safety
/// `config` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dnp_problem_from_toml(config: *const c_char, out: *mut *mut DnpProblem) -> DnpStatus {
    guard(|| {
        if config.is_null() {
            return Err(null("config"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let text = CStr::from_ptr(config)
            .to_str()
            .map_err(|e| Fail(DnpStatus::InvalidUtf8, format!("config is not UTF-8: {e}")))?;
        let exp = prepare(text, None)?;
        *out = Box::into_raw(Box::new(DnpProblem { exp }));
        Ok(())
    })
}

/// Releases a problem. Null is ignored.
///
/// # Safety
/// `p` must come from `dnp_problem_from_toml` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dnp_problem_free(p: *mut DnpProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Number of mesh nodes, the length of every field.
///
/// # Safety
/// `p` must be a live problem and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dnp_problem_node_count(p: *const DnpProblem, out: *mut usize) -> DnpStatus {
    guard(|| {
        let p = problem(p)?;
        *out.as_mut().ok_or_else(|| null("out"))? = p.exp.model.node_count();
        Ok(())
    })
}

/// Node coordinates as `x0, y0, x1, y1, …`; `len` must be twice the node count.
///
/// # Safety
/// `xy` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn dnp_problem_nodes(p: *const DnpProblem, xy: *mut f64, len: usize) -> DnpStatus {
    guard(|| {
        let p = problem(p)?;
        let nodes = p.exp.model.mesh.nodes();
        if xy.is_null() {
            return Err(null("xy"));
        }
        if len != 2 * nodes.len() {
            return Err(Error::Shape { what: "coordinate buffer", expected: 2 * nodes.len(), got: len }.into());
        }
        let dst = std::slice::from_raw_parts_mut(xy, len);
        for (k, x) in nodes.iter().enumerate() {
            dst[2 * k] = x[0];
            dst[2 * k + 1] = x[1];
        }
        Ok(())
    })
}

/// λ₀ and δ₀ of the problem's source.
///
/// # Safety
/// `lambda0` and `delta0` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn dnp_problem_constants(p: *const DnpProblem, lambda0: *mut f64, delta0: *mut f64) -> DnpStatus {
    guard(|| {
        let p = problem(p)?;
        *lambda0.as_mut().ok_or_else(|| null("lambda0"))? = p.exp.model.src.lambda0();
        *delta0.as_mut().ok_or_else(|| null("delta0"))? = p.exp.model.src.delta0();
        Ok(())
    })
}

/// Minimal and maximal steady states by monotone iteration, using the
/// iteration and solver settings of the configuration.
///
/// # Safety
/// `lower` and `upper` must each point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn dnp_extremal_solutions(p: *const DnpProblem, lower: *mut f64, upper: *mut f64, len: usize) -> DnpStatus {
    guard(|| {
        let p = problem(p)?;
        let cfg = &p.exp.config;
        let ex = compute_extremal_solutions(&p.exp.model, &cfg.steady.iterate_options(), &cfg.solver)?;
        output(p, lower, len, &ex.lower)?;
        output(p, upper, len, &ex.upper)
    })
}

fn solve_options(p: &DnpProblem) -> SolveOptions {
    p.exp.config.solver
}

/// `out = 𝒦_λ(u)`.
///
/// # Safety
/// `u` must point to `len` readable and `out` to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn dnp_apply_k(p: *const DnpProblem, lambda: f64, u: *const f64, out: *mut f64, len: usize) -> DnpStatus {
    guard(|| {
        let p = problem(p)?;
        let u = input(p, u, len)?;
        let v = apply_k(&p.exp.model, lambda, &u, &solve_options(p))?;
        output(p, out, len, &v)
    })
}

/// One implicit time step of length `tau` from `u`.
///
/// # Safety
/// `u` must point to `len` readable and `out` to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn dnp_rothe_step(p: *const DnpProblem, tau: f64, u: *const f64, out: *mut f64, len: usize) -> DnpStatus {
    guard(|| {
        let p = problem(p)?;
        let u = input(p, u, len)?;
        let v = rothe_step(&p.exp.model, tau, &u, &solve_options(p))?;
        output(p, out, len, &v)
    })
}

/// Residuals of `u` as a steady state.
///
/// # Safety
/// `u` must point to `len` readable doubles and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dnp_verify(p: *const DnpProblem, u: *const f64, len: usize, out: *mut DnpResidual) -> DnpStatus {
    guard(|| {
        let p = problem(p)?;
        let u = input(p, u, len)?;
        let r = verify_solution(&p.exp.model, &u)?;
        *out.as_mut().ok_or_else(|| null("out"))? = DnpResidual {
            weak_residual: r.weak_residual,
            mean_zero_defect: r.mean_zero_defect,
            mean_zero_scale: r.mean_zero_scale,
            band_violation: r.band_violation,
        };
        Ok(())
    })
}

/// Runs the configured experiment and returns its JSON report, to be
/// released with `dnp_string_free`. `passed` receives 1 when every check held.
///
/// # Safety
/// `json` and `passed` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn dnp_run(p: *const DnpProblem, json: *mut *mut c_char, passed: *mut i32) -> DnpStatus {
    guard(|| {
        let p = problem(p)?;
        if json.is_null() || passed.is_null() {
            return Err(null("out"));
        }
        let run = run_experiment(&p.exp)?;
        let text = CString::new(run.report.to_string()).map_err(|e| Fail(DnpStatus::InvalidUtf8, e.to_string()))?;
        *json = text.into_raw();
        *passed = i32::from(run.passed);
        Ok(())
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dnp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
