//! C interface to `closedpop`.
//!
//! Every function returns a [`ClosedpopStatus`]. On failure a message is kept
//! per thread and can be read with [`closedpop_last_error`]. Handles and
//! strings handed out here must be released with the matching `_free`
//! function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use closedpop::data::{parse_dataset, Dataset};
use closedpop::error::Error;
use closedpop::estimation::{fit, Approach, FitOptions, FitResult};
use closedpop::gof::pearson_gof;
use closedpop::model::parse_model_spec;
use closedpop::stats::SufficientStats;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosedpopStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Model = 4,
    Dimension = 5,
    NoConvergence = 6,
    InvalidArgument = 7,
    Internal = 8,
}

/// Parsed encounter histories with their sufficient statistics.
pub struct ClosedpopDataset {
    data: Dataset,
    stats: SufficientStats,
}

/// A fitted model.
pub struct ClosedpopFit {
    result: FitResult,
}

/// Headline numbers of a fit. Interval ends are NaN when unavailable.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ClosedpopFitSummary {
    pub n_hat: f64,
    pub n_lower: f64,
    pub n_upper: f64,
    pub log_lik: f64,
    pub aic: f64,
    pub n_params: usize,
    pub boundary: bool,
    pub gof_x2: f64,
    pub gof_df: i64,
    pub gof_p: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> ClosedpopStatus {
    match e {
        Error::EmptyInput
        | Error::RaggedRow { .. }
        | Error::StateOutOfRange { .. }
        | Error::AllZeroRow { .. }
        | Error::BadToken { .. }
        | Error::NoStates => ClosedpopStatus::Parse,
        Error::ModelSpec { .. } => ClosedpopStatus::Model,
        Error::Dimension(_) | Error::PopulationTooSmall { .. } => ClosedpopStatus::Dimension,
        Error::NoConvergence => ClosedpopStatus::NoConvergence,
        Error::InvalidParams(_) | Error::Scenario(_) => ClosedpopStatus::InvalidArgument,
        Error::Io(_) | Error::Json(_) | Error::Csv(_) => ClosedpopStatus::Internal,
    }
}

fn guard(body: impl FnOnce() -> Result<(), (ClosedpopStatus, String)>) -> ClosedpopStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => ClosedpopStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            ClosedpopStatus::Internal
        }
    }
}

fn lib_err(e: Error) -> (ClosedpopStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (ClosedpopStatus, String) {
    (ClosedpopStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (ClosedpopStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (ClosedpopStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

fn to_c_string(s: String) -> Result<*mut c_char, (ClosedpopStatus, String)> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| (ClosedpopStatus::Internal, "string contains NUL".into()))
}

/// Message for the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn closedpop_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses encounter histories (one per line) with `states` states.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn closedpop_dataset_parse(
    text: *const c_char,
    states: usize,
    out: *mut *mut ClosedpopDataset,
) -> ClosedpopStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = read_str(text, "text")?;
        let data = parse_dataset(text, states).map_err(lib_err)?;
        let stats = SufficientStats::from_dataset(&data);
        *out = Box::into_raw(Box::new(ClosedpopDataset { data, stats }));
        Ok(())
    })
}

/// # Safety
/// `dataset` must come from [`closedpop_dataset_parse`] or be NULL.
#[no_mangle]
pub unsafe extern "C" fn closedpop_dataset_free(dataset: *mut ClosedpopDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Number of individuals, occasions and states.
///
/// # Safety
/// `dataset` must be a live handle; the output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn closedpop_dataset_dims(
    dataset: *const ClosedpopDataset,
    n: *mut usize,
    occasions: *mut usize,
    states: *mut usize,
) -> ClosedpopStatus {
    guard(|| {
        let d = dataset.as_ref().ok_or_else(|| null("dataset"))?;
        if n.is_null() || occasions.is_null() || states.is_null() {
            return Err(null("output"));
        }
        *n = d.data.n();
        *occasions = d.data.occasions();
        *states = d.data.states();
        Ok(())
    })
}

/// Sufficient statistics as JSON. Free the string with [`closedpop_string_free`].
///
/// # Safety
/// `dataset` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn closedpop_stats_json(
    dataset: *const ClosedpopDataset,
    out: *mut *mut c_char,
) -> ClosedpopStatus {
    guard(|| {
        let d = dataset.as_ref().ok_or_else(|| null("dataset"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let json = serde_json::to_string(&d.stats).map_err(|e| lib_err(e.into()))?;
        *out = to_c_string(json)?;
        Ok(())
    })
}

/// Fits `model` (e.g. `"Mh^2"`) by maximum likelihood, unconditional unless
/// `conditional` is set. `starts` of 0 means the default.
///
/// # Safety
/// `dataset` must be a live handle, `model` a NUL-terminated string and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn closedpop_fit(
    dataset: *const ClosedpopDataset,
    model: *const c_char,
    conditional: bool,
    seed: u64,
    starts: usize,
    out: *mut *mut ClosedpopFit,
) -> ClosedpopStatus {
    guard(|| {
        let d = dataset.as_ref().ok_or_else(|| null("dataset"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = parse_model_spec(read_str(model, "model")?).map_err(lib_err)?;
        let mut opts = FitOptions {
            seed,
            ..FitOptions::default()
        };
        if starts > 0 {
            opts.starts = starts;
        }
        let approach = if conditional {
            Approach::Conditional
        } else {
            Approach::Unconditional
        };
        let mut result = fit(&d.stats, &spec, approach, &opts).map_err(lib_err)?;
        result.gof = Some(pearson_gof(&result, &d.stats).map_err(lib_err)?.summary);
        *out = Box::into_raw(Box::new(ClosedpopFit { result }));
        Ok(())
    })
}

/// # Safety
/// `fit` must come from [`closedpop_fit`] or be NULL.
#[no_mangle]
pub unsafe extern "C" fn closedpop_fit_free(fit: *mut ClosedpopFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// # Safety
/// `fit` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn closedpop_fit_summary(
    fit: *const ClosedpopFit,
    out: *mut ClosedpopFitSummary,
) -> ClosedpopStatus {
    guard(|| {
        let f = &fit.as_ref().ok_or_else(|| null("fit"))?.result;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let ci = f.n_estimate().ci;
        let gof = f.gof;
        *out = ClosedpopFitSummary {
            n_hat: f.n_hat,
            n_lower: ci.map_or(f64::NAN, |c| c[0]),
            n_upper: ci.map_or(f64::NAN, |c| c[1]),
            log_lik: f.log_lik,
            aic: f.aic,
            n_params: f.n_params,
            boundary: f.boundary,
            gof_x2: gof.map_or(f64::NAN, |g| g.x2),
            gof_df: gof.map_or(0, |g| g.df),
            gof_p: gof.and_then(|g| g.p_value).unwrap_or(f64::NAN),
        };
        Ok(())
    })
}

/// Looks up a reported parameter by name (`"N"`, `"p(1)"`, `"psi(1,2)"`, ...).
/// `se` is NaN when unavailable.
///
/// # Safety
/// `fit` must be a live handle, `name` a NUL-terminated string and the
/// output pointers valid.
#[no_mangle]
pub unsafe extern "C" fn closedpop_fit_param(
    fit: *const ClosedpopFit,
    name: *const c_char,
    estimate: *mut f64,
    se: *mut f64,
) -> ClosedpopStatus {
    guard(|| {
        let f = &fit.as_ref().ok_or_else(|| null("fit"))?.result;
        let name = read_str(name, "name")?;
        if estimate.is_null() || se.is_null() {
            return Err(null("output"));
        }
        let p = f
            .param(name)
            .ok_or_else(|| (ClosedpopStatus::InvalidArgument, format!("no parameter named {name:?}")))?;
        *estimate = p.estimate;
        *se = p.se.unwrap_or(f64::NAN);
        Ok(())
    })
}

/// Full fit as JSON. Free the string with [`closedpop_string_free`].
///
/// # Safety
/// `fit` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn closedpop_fit_json(fit: *const ClosedpopFit, out: *mut *mut c_char) -> ClosedpopStatus {
    guard(|| {
        let f = &fit.as_ref().ok_or_else(|| null("fit"))?.result;
        if out.is_null() {
            return Err(null("out"));
        }
        let json = serde_json::to_string(f).map_err(|e| lib_err(e.into()))?;
        *out = to_c_string(json)?;
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn closedpop_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
