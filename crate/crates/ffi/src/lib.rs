//! C ABI for `pricedisp`.
//!
//! Objects are opaque handles created by `pt_*` constructors and released
//! with the matching `*_free`. Every fallible call returns a [`PtStatus`];
//! on failure [`pt_last_error`] describes the cause. Strings returned by the
//! library are freed with [`pt_string_free`]. Firm indices are 1-based.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use pricedisp::curvature::{self, DemandSpec};
use pricedisp::margin_game::{self, EquilibriumProfile};
use pricedisp::{passthrough, ConsiderationStructure, Error};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Unsupported = 4,
    Domain = 5,
    VerificationFailed = 6,
    Io = 7,
    Panic = 8,
}

/// Opaque consideration structure.
pub struct PtStructure(ConsiderationStructure);

/// Opaque equilibrium profile.
pub struct PtProfile(EquilibriumProfile);

/// Transaction-weighted statistics of one firm.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PtPassthroughSummary {
    pub harmonic_b: f64,
    pub mean_paid: f64,
    pub tau_trans: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let clean = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = clean);
}

fn status_of(err: &Error) -> PtStatus {
    match err {
        Error::Parse(_) | Error::UnknownFamily(_) => PtStatus::Parse,
        Error::Io(_) => PtStatus::Io,
        Error::UnsupportedStructure
        | Error::NotSymmetric
        | Error::NotDuopoly(_)
        | Error::NotIndependent
        | Error::DegenerateRho { .. } => PtStatus::Unsupported,
        Error::InvertibilityViolated { .. }
        | Error::SupportTouchesCost { .. }
        | Error::PriceAtCost { .. }
        | Error::NoTransition { .. }
        | Error::AtomAtPoint { .. } => PtStatus::Domain,
        _ => PtStatus::InvalidArgument,
    }
}

fn guard<F: FnOnce() -> Result<(), (PtStatus, String)>>(f: F) -> PtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            PtStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PtStatus::Panic
        }
    }
}

trait IntoFfi<T> {
    fn ffi(self) -> Result<T, (PtStatus, String)>;
}

impl<T> IntoFfi<T> for pricedisp::Result<T> {
    fn ffi(self) -> Result<T, (PtStatus, String)> {
        self.map_err(|e| (status_of(&e), e.to_string()))
    }
}

fn null(what: &str) -> (PtStatus, String) {
    (PtStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, (PtStatus, String)> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s).to_str().map_err(|_| (PtStatus::Parse, format!("{what} is not valid UTF-8")))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), (PtStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, (PtStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

fn parse_demand(s: &str) -> Result<DemandSpec, (PtStatus, String)> {
    s.parse::<DemandSpec>().ffi()
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next `pt_*` call on the same thread.
#[no_mangle]
pub extern "C" fn pt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Binomial structure: each of `n` firms is considered independently with
/// probability `lambda`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pt_structure_binomial(n: usize, lambda: f64, out: *mut *mut PtStructure) -> PtStatus {
    guard(|| {
        let s = ConsiderationStructure::binomial(n, lambda).ffi()?;
        write(out, Box::into_raw(Box::new(PtStructure(s))), "out")
    })
}

/// Independent structure with per-firm consideration probabilities.
///
/// # Safety
/// `lambdas` must point to `len` readable doubles; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pt_structure_independent(
    lambdas: *const f64,
    len: usize,
    out: *mut *mut PtStructure,
) -> PtStatus {
    guard(|| {
        if lambdas.is_null() {
            return Err(null("lambdas"));
        }
        let l = std::slice::from_raw_parts(lambdas, len);
        let s = ConsiderationStructure::independent(l).ffi()?;
        write(out, Box::into_raw(Box::new(PtStructure(s))), "out")
    })
}

/// Structure from a generator string such as `spatial:n=4,k=2`.
///
/// # Safety
/// `spec` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pt_structure_parse(spec: *const c_char, out: *mut *mut PtStructure) -> PtStatus {
    guard(|| {
        let s: ConsiderationStructure = read_str(spec, "spec")?.parse().ffi()?;
        write(out, Box::into_raw(Box::new(PtStructure(s))), "out")
    })
}

/// Structure from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pt_structure_from_json(json: *const c_char, out: *mut *mut PtStructure) -> PtStatus {
    guard(|| {
        let s = ConsiderationStructure::from_json(read_str(json, "json")?).ffi()?;
        write(out, Box::into_raw(Box::new(PtStructure(s))), "out")
    })
}

/// # Safety
/// `s` must come from a `pt_structure_*` constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn pt_structure_free(s: *mut PtStructure) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Solves the margin game.
///
/// # Safety
/// `s` must be a live structure handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pt_solve(s: *const PtStructure, out: *mut *mut PtProfile) -> PtStatus {
    guard(|| {
        let s = handle(s, "structure")?;
        let p = margin_game::solve(&s.0).ffi()?;
        write(out, Box::into_raw(Box::new(PtProfile(p))), "out")
    })
}

/// # Safety
/// `p` must come from [`pt_solve`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn pt_profile_free(p: *mut PtProfile) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// # Safety
/// `p` must be a live profile handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pt_profile_firm_count(p: *const PtProfile, out: *mut usize) -> PtStatus {
    guard(|| write(out, handle(p, "profile")?.0.n(), "out"))
}

/// Margin quantile `μ_firm(u)`.
///
/// # Safety
/// `p` must be a live profile handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pt_profile_quantile(p: *const PtProfile, firm: usize, u: f64, out: *mut f64) -> PtStatus {
    guard(|| {
        if !(0.0..=1.0).contains(&u) {
            return Err((PtStatus::InvalidArgument, format!("u = {u} outside [0, 1]")));
        }
        let d = handle(p, "profile")?.0.dist(firm).ffi()?;
        write(out, d.quantile_eval(u), "out")
    })
}

/// Margin CDF `F_firm(mu)`.
///
/// # Safety
/// `p` must be a live profile handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pt_profile_cdf(p: *const PtProfile, firm: usize, mu: f64, out: *mut f64) -> PtStatus {
    guard(|| {
        let d = handle(p, "profile")?.0.dist(firm).ffi()?;
        write(out, d.cdf_eval(mu), "out")
    })
}

/// Equilibrium profit in the margin game.
///
/// # Safety
/// `p` must be a live profile handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pt_profile_profit(p: *const PtProfile, firm: usize, out: *mut f64) -> PtStatus {
    guard(|| write(out, handle(p, "profile")?.0.profit(firm).ffi()?, "out"))
}

/// Profile as JSON; free the string with [`pt_string_free`].
///
/// # Safety
/// `p` must be a live profile handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pt_profile_to_json(p: *const PtProfile, out: *mut *mut c_char) -> PtStatus {
    guard(|| {
        let text = serde_json::to_string(&handle(p, "profile")?.0)
            .map_err(|e| (PtStatus::InvalidArgument, e.to_string()))?;
        let c = CString::new(text).map_err(|e| (PtStatus::InvalidArgument, e.to_string()))?;
        write(out, c.into_raw(), "out")
    })
}

/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn pt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Price with normalized margin `mu` at cost `c` under `demand`
/// (e.g. `linear:b=1`).
///
/// # Safety
/// `demand` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pt_phi(demand: *const c_char, c: f64, mu: f64, out: *mut f64) -> PtStatus {
    guard(|| {
        let spec = parse_demand(read_str(demand, "demand")?)?;
        write(out, curvature::phi(&spec, c, mu).ffi()?, "out")
    })
}

/// Pass-through of a fixed margin, `∂φ/∂c`.
///
/// # Safety
/// `demand` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pt_phi_c(demand: *const c_char, c: f64, mu: f64, out: *mut f64) -> PtStatus {
    guard(|| {
        let spec = parse_demand(read_str(demand, "demand")?)?;
        write(out, curvature::phi_c(&spec, c, mu).ffi()?, "out")
    })
}

/// Harmonic integral, mean paid price and transaction-weighted pass-through.
///
/// # Safety
/// `p` must be a live profile handle, `demand` a NUL-terminated string and
/// `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pt_passthrough_summary(
    p: *const PtProfile,
    firm: usize,
    demand: *const c_char,
    c: f64,
    out: *mut PtPassthroughSummary,
) -> PtStatus {
    guard(|| {
        let p = &handle(p, "profile")?.0;
        let spec = parse_demand(read_str(demand, "demand")?)?;
        let b = passthrough::harmonic_b(p, firm, &spec, c).ffi()?;
        let tau = passthrough::transaction_passthrough(p, firm, &spec, c).ffi()?;
        write(out, PtPassthroughSummary { harmonic_b: b, mean_paid: c + 1.0 / b, tau_trans: tau }, "out")
    })
}

/// Checks `p` for profitable deviations on a margin grid of `grid` points.
/// Returns [`PtStatus::VerificationFailed`] when the largest gain exceeds
/// `tol`; `max_gap` receives it either way.
///
/// # Safety
/// `s` and `p` must be live handles; `max_gap` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pt_verify(
    s: *const PtStructure,
    p: *const PtProfile,
    grid: usize,
    tol: f64,
    max_gap: *mut f64,
) -> PtStatus {
    guard(|| {
        let s = handle(s, "structure")?;
        let p = handle(p, "profile")?;
        let r = margin_game::verify_equilibrium(&s.0, &p.0, grid, tol).ffi()?;
        write(max_gap, r.max_gap(), "max_gap")?;
        if r.passed {
            Ok(())
        } else {
            Err((PtStatus::VerificationFailed, format!("largest deviation gain {} exceeds {tol}", r.max_gap())))
        }
    })
}
