//! C ABI over `ratbek-core`.
//!
//! Realizations and perturbations are opaque handles owned by the caller and
//! released with their `_free` function. Every fallible call returns a
//! [`RatbekStatus`]; on failure a message is available from
//! [`ratbek_last_error`] on the same thread. Output pointers are written only
//! on success. All calls use the default tolerances.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use ratbek_core::backward_error;
use ratbek_core::linearize;
use ratbek_core::perturb::{self, Perturbation};
use ratbek_core::problems::io;
use ratbek_core::{Complex64, Error, NormSelector, Realization, Tolerances};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatbekStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    Parse = 4,
    Dimension = 5,
    Validation = 6,
    Io = 7,
    Pole = 8,
    SingularR = 9,
    ShiftSingular = 10,
    Degree = 11,
    NoConvergence = 12,
    Numeric = 13,
    /// The check ran but λ is not an eigenvalue of the perturbed realization.
    VerificationFailed = 14,
    Panic = 15,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatbekComplex {
    pub re: f64,
    pub im: f64,
}

impl From<RatbekComplex> for Complex64 {
    fn from(z: RatbekComplex) -> Self {
        Complex64::new(z.re, z.im)
    }
}

impl From<Complex64> for RatbekComplex {
    fn from(z: Complex64) -> Self {
        RatbekComplex { re: z.re, im: z.im }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatbekRegime {
    /// Polynomial coefficients and `C` move.
    PolyAndC = 0,
    /// Polynomial coefficients and `B` move.
    PolyAndB = 1,
}

/// Backward errors at one λ. `eta_companion` is NaN when the polynomial
/// degree is 0. When `singular` is set the structured errors are 0.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatbekBackwardError {
    pub eta_c: f64,
    pub eta_b_variational: f64,
    pub eta_b_sigma_min: f64,
    pub eta_poly_bound: f64,
    pub eta_poly_exact: f64,
    pub eta_companion: f64,
    pub sigma_min_r: f64,
    pub singular: bool,
}

/// Opaque realization handle.
pub struct RatbekRealization(Realization);

/// Opaque perturbation handle.
pub struct RatbekPerturbation(Perturbation);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = text);
}

fn status_of(err: &Error) -> RatbekStatus {
    match err {
        Error::Pole { .. } => RatbekStatus::Pole,
        Error::SingularR { .. } => RatbekStatus::SingularR,
        Error::ShiftSingular { .. } => RatbekStatus::ShiftSingular,
        Error::Degree { .. } => RatbekStatus::Degree,
        Error::NoConvergence => RatbekStatus::NoConvergence,
        Error::ZeroVector => RatbekStatus::InvalidArgument,
        Error::Dimension(_) => RatbekStatus::Dimension,
        Error::Validation(_) | Error::PoleCollision { .. } => RatbekStatus::Validation,
        Error::Parse(_) => RatbekStatus::Parse,
        Error::Io(_) => RatbekStatus::Io,
        Error::Degenerate(_) | Error::Domain { .. } | Error::Generation { .. } => RatbekStatus::Numeric,
    }
}

struct Failure(RatbekStatus, String);

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        Failure(status_of(&err), err.to_string())
    }
}

fn null(name: &str) -> Failure {
    Failure(RatbekStatus::NullPointer, format!("{name} is null"))
}

/// Runs `body`, turning errors and panics into a status and a last-error message.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> RatbekStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_last_error("");
            RatbekStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            RatbekStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(RatbekStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(RatbekStatus::InvalidArgument, "string contains NUL".into()))
}

/// Message for the most recent failure on this thread; empty after a success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn ratbek_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn ratbek_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a realization from JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ratbek_realization_from_json(json: *const c_char, out_handle: *mut *mut RatbekRealization) -> RatbekStatus {
    guard(|| {
        let slot = out(out_handle, "out")?;
        let rep = io::realization_from_json(text(json, "json")?)?;
        *slot = Box::into_raw(Box::new(RatbekRealization(rep)));
        Ok(())
    })
}

/// Loads a realization file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ratbek_realization_load(path: *const c_char, out_handle: *mut *mut RatbekRealization) -> RatbekStatus {
    guard(|| {
        let slot = out(out_handle, "out")?;
        let rep = io::load_realization(text(path, "path")?)?;
        *slot = Box::into_raw(Box::new(RatbekRealization(rep)));
        Ok(())
    })
}

/// # Safety
/// `rep` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ratbek_realization_save(rep: *const RatbekRealization, path: *const c_char) -> RatbekStatus {
    guard(|| {
        let rep = borrow(rep, "rep")?;
        io::save_realization(text(path, "path")?, &rep.0)?;
        Ok(())
    })
}

/// Serializes a realization; free the result with [`ratbek_string_free`].
///
/// # Safety
/// `rep` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ratbek_realization_to_json(rep: *const RatbekRealization, out_json: *mut *mut c_char) -> RatbekStatus {
    guard(|| {
        let rep = borrow(rep, "rep")?;
        let slot = out(out_json, "out")?;
        *slot = into_c_string(io::realization_to_json(&rep.0)?)?;
        Ok(())
    })
}

/// # Safety
/// `rep` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ratbek_realization_free(rep: *mut RatbekRealization) {
    if !rep.is_null() {
        drop(Box::from_raw(rep));
    }
}

/// # Safety
/// `rep` must be a live handle; each output pointer may be null.
#[no_mangle]
pub unsafe extern "C" fn ratbek_realization_dims(
    rep: *const RatbekRealization,
    n: *mut usize,
    m: *mut usize,
    r: *mut usize,
) -> RatbekStatus {
    guard(|| {
        let rep = &borrow(rep, "rep")?.0;
        for (p, v) in [(n, rep.n()), (m, rep.m()), (r, rep.r())] {
            if let Some(p) = p.as_mut() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Writes `R(λ)` row-major into `values`, which must hold `n * n` entries.
///
/// # Safety
/// `rep` must be a live handle and `values` must point to `len` writable entries.
#[no_mangle]
pub unsafe extern "C" fn ratbek_eval(
    rep: *const RatbekRealization,
    lambda: RatbekComplex,
    values: *mut RatbekComplex,
    len: usize,
) -> RatbekStatus {
    guard(|| {
        let rep = &borrow(rep, "rep")?.0;
        let n = rep.n();
        if len < n * n {
            return Err(Failure(RatbekStatus::BufferTooSmall, format!("need {} entries", n * n)));
        }
        if values.is_null() {
            return Err(null("values"));
        }
        let value = rep.eval_r(lambda.into(), &Tolerances::default())?;
        for i in 0..n {
            for j in 0..n {
                *values.add(i * n + j) = value[(i, j)].into();
            }
        }
        Ok(())
    })
}

/// # Safety
/// `rep` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ratbek_backward_error(
    rep: *const RatbekRealization,
    lambda: RatbekComplex,
    out_report: *mut RatbekBackwardError,
) -> RatbekStatus {
    guard(|| {
        let rep = &borrow(rep, "rep")?.0;
        let slot = out(out_report, "out")?;
        let report = backward_error::report(rep, lambda.into(), NormSelector::FROBENIUS_2, None, &Tolerances::default())?;
        *slot = RatbekBackwardError {
            eta_c: report.eta_c,
            eta_b_variational: report.eta_b_variational,
            eta_b_sigma_min: report.eta_b_sigma_min,
            eta_poly_bound: report.eta_poly_bound,
            eta_poly_exact: report.eta_poly_exact,
            eta_companion: report.eta_companion.unwrap_or(f64::NAN),
            sigma_min_r: report.sigma_values.sigma_min_r,
            singular: report.singular,
        };
        Ok(())
    })
}

/// Finite eigenvalues via the companion linearization. `count` receives the
/// number found; if it exceeds `capacity` nothing is written to `values` and
/// `RATBEK_STATUS_BUFFER_TOO_SMALL` is returned.
///
/// # Safety
/// `rep` must be a live handle, `count` valid, and `values` must point to
/// `capacity` writable entries (it may be null when `capacity` is 0).
#[no_mangle]
pub unsafe extern "C" fn ratbek_eigenvalues(
    rep: *const RatbekRealization,
    seed: u64,
    values: *mut RatbekComplex,
    capacity: usize,
    count: *mut usize,
) -> RatbekStatus {
    guard(|| {
        let rep = &borrow(rep, "rep")?.0;
        let count = out(count, "count")?;
        let (_, triples) = linearize::eigentriples(rep, &Tolerances::default(), seed)?;
        *count = triples.len();
        if triples.len() > capacity {
            return Err(Failure(
                RatbekStatus::BufferTooSmall,
                format!("{} eigenvalues, capacity {capacity}", triples.len()),
            ));
        }
        if !triples.is_empty() && values.is_null() {
            return Err(null("values"));
        }
        for (k, t) in triples.iter().enumerate() {
            *values.add(k) = t.lambda.into();
        }
        Ok(())
    })
}

/// Builds the minimal perturbation that makes λ an exact eigenvalue.
///
/// # Safety
/// `rep` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ratbek_perturb(
    rep: *const RatbekRealization,
    lambda: RatbekComplex,
    regime: RatbekRegime,
    out_handle: *mut *mut RatbekPerturbation,
) -> RatbekStatus {
    guard(|| {
        let rep = &borrow(rep, "rep")?.0;
        let slot = out(out_handle, "out")?;
        let tol = Tolerances::default();
        let delta = match regime {
            RatbekRegime::PolyAndC => perturb::construct_perturb_c(rep, lambda.into(), None, &tol)?,
            RatbekRegime::PolyAndB => perturb::construct_perturb_b(rep, lambda.into(), None, &tol)?,
        };
        *slot = Box::into_raw(Box::new(RatbekPerturbation(delta)));
        Ok(())
    })
}

/// # Safety
/// `delta` must be a live handle and `norm` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ratbek_perturbation_norm(delta: *const RatbekPerturbation, norm: *mut f64) -> RatbekStatus {
    guard(|| {
        *out(norm, "norm")? = borrow(delta, "delta")?.0.total_norm();
        Ok(())
    })
}

/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ratbek_perturbation_from_json(json: *const c_char, out_handle: *mut *mut RatbekPerturbation) -> RatbekStatus {
    guard(|| {
        let slot = out(out_handle, "out")?;
        let delta = io::perturbation_from_json(text(json, "json")?)?;
        *slot = Box::into_raw(Box::new(RatbekPerturbation(delta)));
        Ok(())
    })
}

/// Serializes a perturbation; free the result with [`ratbek_string_free`].
///
/// # Safety
/// `delta` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ratbek_perturbation_to_json(delta: *const RatbekPerturbation, out_json: *mut *mut c_char) -> RatbekStatus {
    guard(|| {
        let delta = borrow(delta, "delta")?;
        let slot = out(out_json, "out")?;
        *slot = into_c_string(io::perturbation_to_json(&delta.0)?)?;
        Ok(())
    })
}

/// # Safety
/// `delta` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ratbek_perturbation_free(delta: *mut RatbekPerturbation) {
    if !delta.is_null() {
        drop(Box::from_raw(delta));
    }
}

/// Returns a new realization with the perturbation added.
///
/// # Safety
/// `rep` and `delta` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ratbek_apply(
    rep: *const RatbekRealization,
    delta: *const RatbekPerturbation,
    out_handle: *mut *mut RatbekRealization,
) -> RatbekStatus {
    guard(|| {
        let rep = &borrow(rep, "rep")?.0;
        let delta = &borrow(delta, "delta")?.0;
        let slot = out(out_handle, "out")?;
        *slot = Box::into_raw(Box::new(RatbekRealization(perturb::apply(rep, delta)?)));
        Ok(())
    })
}

/// Checks that λ is an eigenvalue of the perturbed realization. Returns
/// `RATBEK_STATUS_VERIFICATION_FAILED` when it is not; `sigma_min` (may be
/// null) receives `σ_min` of the perturbed `R(λ)` in both cases.
///
/// # Safety
/// `rep` and `delta` must be live handles.
#[no_mangle]
pub unsafe extern "C" fn ratbek_verify(
    rep: *const RatbekRealization,
    delta: *const RatbekPerturbation,
    lambda: RatbekComplex,
    sigma_min: *mut f64,
) -> RatbekStatus {
    guard(|| {
        let rep = &borrow(rep, "rep")?.0;
        let delta = &borrow(delta, "delta")?.0;
        let check = perturb::verify_exactness(rep, delta, lambda.into(), &Tolerances::default())?;
        if let Some(s) = sigma_min.as_mut() {
            *s = check.sigma;
        }
        if check.ok {
            Ok(())
        } else {
            Err(Failure(
                RatbekStatus::VerificationFailed,
                format!("sigma_min = {:e} exceeds the verification threshold", check.sigma),
            ))
        }
    })
}

/// The λ a perturbation was built for.
///
/// # Safety
/// `delta` must be a live handle and `lambda` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ratbek_perturbation_target(delta: *const RatbekPerturbation, lambda: *mut RatbekComplex) -> RatbekStatus {
    guard(|| {
        *out(lambda, "lambda")? = borrow(delta, "delta")?.0.lambda_target().into();
        Ok(())
    })
}
