//! C ABI for threshreg.
//!
//! Every fallible function returns a `TrStatus`; on failure a message is
//! available from [`tr_last_error`] on the same thread. Data, fits and paths
//! are opaque heap handles released with their `_free` function. Strings
//! returned through `char **` are released with [`tr_string_free`].
//!
//! # Safety
//!
//! Pointer arguments must be non-null, aligned and valid for the documented
//! length unless stated otherwise. Handles must come from this library and
//! must not be used after being freed.
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::DVector;
use threshreg::data::LinearPredictor;
use threshreg::refit::{optimal_ridge, ridge_refit, RiskTarget, SpectralModel};
use threshreg::solver::{fit_at, FitExport, LambdaGrid, PathExport};
use threshreg::{
    penalty_value, solve_path, univariate_minimize, Error, PathConfig, PenaltyFamily, PenaltySpec,
    RegressionData, SparseFit,
};

pub const TR_PENALTY_HARD: u32 = 0;
pub const TR_PENALTY_L0: u32 = 1;
pub const TR_PENALTY_SICA: u32 = 2;
pub const TR_PENALTY_LASSO: u32 = 3;

pub const TR_TARGET_L2: u32 = 0;
pub const TR_TARGET_PREDICTION: u32 = 1;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Data = 3,
    Numerical = 4,
    OutOfRange = 5,
    Panic = 6,
}

/// Design matrix and response on the working (rescaled) column scale.
pub struct TrData {
    data: RegressionData,
}

/// One penalized fit.
pub struct TrFit {
    fit: SparseFit,
    export: FitExport,
    predictor: LinearPredictor,
}

/// A regularization path.
pub struct TrPath {
    fits: Vec<TrFit>,
    export: PathExport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> TrStatus {
    match e {
        _ if e.is_numerical() => TrStatus::Numerical,
        Error::AtLambda { source, .. } | Error::InReplication { source, .. } => status_of(source),
        Error::InvalidArgument(_) | Error::InvalidPenalty(_) | Error::BudgetExceeded { .. } => {
            TrStatus::InvalidArgument
        }
        _ => TrStatus::Data,
    }
}

fn fail(status: TrStatus, msg: impl Into<String>) -> TrStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, converting library errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), TrStatus>) -> TrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TrStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(TrStatus::Panic, "internal panic"),
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, TrStatus>;
}

impl<T> OrStatus<T> for threshreg::Result<T> {
    fn or_status(self) -> Result<T, TrStatus> {
        self.map_err(|e| fail(status_of(&e), e.to_string()))
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), TrStatus> {
    if p.is_null() {
        Err(fail(TrStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

fn family(code: u32) -> Result<PenaltyFamily, TrStatus> {
    match code {
        TR_PENALTY_HARD => Ok(PenaltyFamily::Hard),
        TR_PENALTY_L0 => Ok(PenaltyFamily::L0),
        TR_PENALTY_SICA => Ok(PenaltyFamily::Sica),
        TR_PENALTY_LASSO => Ok(PenaltyFamily::Lasso),
        _ => Err(fail(TrStatus::InvalidArgument, format!("unknown penalty code {code}"))),
    }
}

fn spec(code: u32, lambda: f64, shape_a: f64) -> Result<PenaltySpec, TrStatus> {
    let fam = family(code)?;
    Ok(if fam == PenaltyFamily::Sica {
        PenaltySpec::sica(lambda, shape_a)
    } else {
        PenaltySpec::new(fam, lambda)
    })
}

fn path_config(code: u32, shape_a: f64) -> PathConfig {
    let mut cfg = PathConfig::default();
    if code == TR_PENALTY_SICA && shape_a > 0.0 {
        cfg.sica_shape = shape_a;
        cfg.sica_pilot_shapes.retain(|s| *s > shape_a);
    }
    cfg
}

fn make_fit(fit: SparseFit, data: &RegressionData, lambda: f64) -> TrFit {
    TrFit {
        export: FitExport::new(&fit, data, lambda),
        predictor: data.predictor(&fit.beta),
        fit,
    }
}

unsafe fn write_json(value: &impl serde::Serialize, out: *mut *mut c_char) -> Result<(), TrStatus> {
    let s = serde_json::to_string(value).map_err(|e| fail(TrStatus::Data, e.to_string()))?;
    let c = CString::new(s).map_err(|e| fail(TrStatus::Data, e.to_string()))?;
    *out = c.into_raw();
    Ok(())
}

/// Message of the last failure on this thread, or NULL. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn tr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn tr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Minimizer of `(z - t)^2 / 2 + p(|t|)` over `t`. `shape_a` is used by SICA only.
#[no_mangle]
pub unsafe extern "C" fn tr_univariate_minimize(
    penalty: u32,
    lambda: f64,
    shape_a: f64,
    z: f64,
    out_value: *mut f64,
    out_thresholded: *mut bool,
) -> TrStatus {
    guard(|| {
        non_null(out_value, "out_value")?;
        let r = univariate_minimize(z, &spec(penalty, lambda, shape_a)?).or_status()?;
        *out_value = r.value;
        if !out_thresholded.is_null() {
            *out_thresholded = r.was_thresholded;
        }
        Ok(())
    })
}

/// Penalty value `p(t)` for `t >= 0`.
#[no_mangle]
pub unsafe extern "C" fn tr_penalty_value(
    penalty: u32,
    lambda: f64,
    shape_a: f64,
    t: f64,
    out: *mut f64,
) -> TrStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = penalty_value(&spec(penalty, lambda, shape_a)?, t).or_status()?;
        Ok(())
    })
}

/// Builds a data set from a row-major `n x p` matrix and a length-`n` response.
/// With `center` the columns and response are centered (fits get an intercept).
/// Columns are rescaled to norm `sqrt(n)`.
#[no_mangle]
pub unsafe extern "C" fn tr_data_new(
    n: usize,
    p: usize,
    x_row_major: *const f64,
    y: *const f64,
    center: bool,
    out: *mut *mut TrData,
) -> TrStatus {
    guard(|| {
        non_null(x_row_major, "x")?;
        non_null(y, "y")?;
        non_null(out, "out")?;
        let len = n.checked_mul(p).ok_or_else(|| fail(TrStatus::InvalidArgument, "n * p overflows"))?;
        let x = std::slice::from_raw_parts(x_row_major, len);
        let y = std::slice::from_raw_parts(y, n);
        let mut data = RegressionData::from_row_major(n, p, x, y).or_status()?;
        if center {
            data = data.centered().or_status()?;
        }
        let data = data.rescale_columns().or_status()?;
        *out = Box::into_raw(Box::new(TrData { data }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn tr_data_free(data: *mut TrData) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

#[no_mangle]
pub unsafe extern "C" fn tr_data_n(data: *const TrData) -> usize {
    data.as_ref().map_or(0, |d| d.data.n())
}

#[no_mangle]
pub unsafe extern "C" fn tr_data_p(data: *const TrData) -> usize {
    data.as_ref().map_or(0, |d| d.data.p())
}

/// Fits one penalty at one `lambda`, starting from zero. `shape_a <= 0`
/// selects the default SICA shape.
#[no_mangle]
pub unsafe extern "C" fn tr_fit(
    data: *const TrData,
    penalty: u32,
    lambda: f64,
    shape_a: f64,
    out: *mut *mut TrFit,
) -> TrStatus {
    guard(|| {
        non_null(data, "data")?;
        non_null(out, "out")?;
        let d = &(*data).data;
        let cfg = path_config(penalty, shape_a);
        let fit = fit_at(d, family(penalty)?, lambda, &DVector::zeros(d.p()), &cfg).or_status()?;
        *out = Box::into_raw(Box::new(make_fit(fit, d, lambda)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn tr_fit_free(fit: *mut TrFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Number of nonzero coefficients.
#[no_mangle]
pub unsafe extern "C" fn tr_fit_support_size(fit: *const TrFit) -> usize {
    fit.as_ref().map_or(0, |f| f.fit.support.len())
}

/// Copies the 0-based support indices into `out`, which holds `len` entries.
#[no_mangle]
pub unsafe extern "C" fn tr_fit_support(fit: *const TrFit, out: *mut usize, len: usize) -> TrStatus {
    guard(|| {
        non_null(fit, "fit")?;
        non_null(out, "out")?;
        let s = &(*fit).fit.support;
        if len < s.len() {
            return Err(fail(TrStatus::OutOfRange, format!("buffer holds {len}, support has {}", s.len())));
        }
        std::ptr::copy_nonoverlapping(s.as_ptr(), out, s.len());
        Ok(())
    })
}

/// Copies the `p` coefficients on the original column scale into `out`.
#[no_mangle]
pub unsafe extern "C" fn tr_fit_coefficients(fit: *const TrFit, out: *mut f64, len: usize) -> TrStatus {
    guard(|| {
        non_null(fit, "fit")?;
        non_null(out, "out")?;
        let c = &(*fit).predictor.coefficients;
        if len < c.len() {
            return Err(fail(TrStatus::OutOfRange, format!("buffer holds {len}, need {}", c.len())));
        }
        std::ptr::copy_nonoverlapping(c.as_slice().as_ptr(), out, c.len());
        Ok(())
    })
}

/// Intercept on the original scale (0 for uncentered data).
#[no_mangle]
pub unsafe extern "C" fn tr_fit_intercept(fit: *const TrFit) -> f64 {
    fit.as_ref().map_or(f64::NAN, |f| f.predictor.intercept)
}

/// Penalized objective on the working scale.
#[no_mangle]
pub unsafe extern "C" fn tr_fit_objective(fit: *const TrFit) -> f64 {
    fit.as_ref().map_or(f64::NAN, |f| f.fit.objective)
}

#[no_mangle]
pub unsafe extern "C" fn tr_fit_converged(fit: *const TrFit) -> bool {
    fit.as_ref().is_some_and(|f| f.fit.converged)
}

/// JSON export of the fit; release with `tr_string_free`.
#[no_mangle]
pub unsafe extern "C" fn tr_fit_to_json(fit: *const TrFit, out: *mut *mut c_char) -> TrStatus {
    guard(|| {
        non_null(fit, "fit")?;
        non_null(out, "out")?;
        write_json(&(*fit).export, out)
    })
}

/// Solves the path over `grid` (decreasing, `grid_len` values), or over the
/// default automatic grid when `grid` is NULL.
#[no_mangle]
pub unsafe extern "C" fn tr_path(
    data: *const TrData,
    penalty: u32,
    shape_a: f64,
    grid: *const f64,
    grid_len: usize,
    out: *mut *mut TrPath,
) -> TrStatus {
    guard(|| {
        non_null(data, "data")?;
        non_null(out, "out")?;
        let d = &(*data).data;
        let mut cfg = path_config(penalty, shape_a);
        if !grid.is_null() {
            cfg.lambda_grid = LambdaGrid::Explicit {
                values: std::slice::from_raw_parts(grid, grid_len).to_vec(),
            };
        }
        let path = solve_path(d, family(penalty)?, &cfg).or_status()?;
        let export = path.to_export(d);
        let fits = path.entries.into_iter().map(|e| make_fit(e.fit, d, e.lambda)).collect();
        *out = Box::into_raw(Box::new(TrPath { fits, export }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn tr_path_free(path: *mut TrPath) {
    if !path.is_null() {
        drop(Box::from_raw(path));
    }
}

/// Number of fitted grid points (the path stops early at the support cap).
#[no_mangle]
pub unsafe extern "C" fn tr_path_len(path: *const TrPath) -> usize {
    path.as_ref().map_or(0, |p| p.fits.len())
}

/// Borrowed fit at position `index`, valid while the path lives, or NULL.
#[no_mangle]
pub unsafe extern "C" fn tr_path_fit(path: *const TrPath, index: usize) -> *const TrFit {
    match path.as_ref().and_then(|p| p.fits.get(index)) {
        Some(f) => f,
        None => {
            set_error(format!("path index {index} out of range"));
            ptr::null()
        }
    }
}

#[no_mangle]
pub unsafe extern "C" fn tr_path_lambda(path: *const TrPath, index: usize) -> f64 {
    path.as_ref()
        .and_then(|p| p.fits.get(index))
        .map_or(f64::NAN, |f| f.export.lambda)
}

/// JSON export of the whole path; release with `tr_string_free`.
#[no_mangle]
pub unsafe extern "C" fn tr_path_to_json(path: *const TrPath, out: *mut *mut c_char) -> TrStatus {
    guard(|| {
        non_null(path, "path")?;
        non_null(out, "out")?;
        write_json(&(*path).export, out)
    })
}

/// Ridge refit on `support` (`support_len` sorted column indices). Writes
/// the `p` coefficients on the original column scale into `out` and the
/// intercept into `out_intercept` when it is non-null.
#[no_mangle]
pub unsafe extern "C" fn tr_ridge_refit(
    data: *const TrData,
    support: *const usize,
    support_len: usize,
    lambda1: f64,
    out: *mut f64,
    len: usize,
    out_intercept: *mut f64,
) -> TrStatus {
    guard(|| {
        non_null(data, "data")?;
        non_null(support, "support")?;
        non_null(out, "out")?;
        let d = &(*data).data;
        if len < d.p() {
            return Err(fail(TrStatus::OutOfRange, format!("buffer holds {len}, need {}", d.p())));
        }
        let s = std::slice::from_raw_parts(support, support_len);
        let r = ridge_refit(d, s, lambda1).or_status()?;
        let pred = d.predictor(&r.beta_refitted);
        std::ptr::copy_nonoverlapping(pred.coefficients.as_slice().as_ptr(), out, d.p());
        if !out_intercept.is_null() {
            *out_intercept = pred.intercept;
        }
        Ok(())
    })
}

/// Risk-minimizing ridge parameter of the model with eigenvalues `d` of
/// `X0'X0` and rotated coefficients `b` (both of length `s`).
#[no_mangle]
pub unsafe extern "C" fn tr_optimal_ridge(
    d: *const f64,
    b: *const f64,
    s: usize,
    sigma: f64,
    target: u32,
    out: *mut f64,
) -> TrStatus {
    guard(|| {
        non_null(d, "d")?;
        non_null(b, "b")?;
        non_null(out, "out")?;
        let target = match target {
            TR_TARGET_L2 => RiskTarget::L2,
            TR_TARGET_PREDICTION => RiskTarget::Prediction,
            _ => return Err(fail(TrStatus::InvalidArgument, format!("unknown risk target {target}"))),
        };
        let d = std::slice::from_raw_parts(d, s).to_vec();
        let b = std::slice::from_raw_parts(b, s).to_vec();
        let model = SpectralModel::from_spectrum(d, b, sigma).or_status()?;
        *out = optimal_ridge(&model, target).or_status()?;
        Ok(())
    })
}
