//! C ABI for ceg-engine.
//!
//! Models are opaque handles created from bundle JSON and released with
//! [`ceg_model_free`]. Every fallible call returns a [`CegStatus`]; on
//! failure [`ceg_last_error`] describes it. Strings handed out by the
//! library are released with [`ceg_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ceg_engine::ceg::DEFAULT_PATH_CAP;
use ceg_engine::missingness::MissingError;
use ceg_engine::shell::{ceg_to_dot, evaluate, from_json, oracle_check, parse_bundle, Model, QueryDoc, QueryError, QueryKind};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CegStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    /// The bundle or query document is malformed or names unknown items.
    Schema = 3,
    /// A missingness query whose adjustment conditions fail.
    NotIdentifiable = 4,
    /// The engine rejected the query, e.g. an invalid back-door partition.
    Rejected = 5,
    /// The oracle check ran but the difference exceeds the tolerance.
    ToleranceExceeded = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CegQueryKind {
    Backdoor = 0,
    Control = 1,
    Mceg = 2,
}

impl From<CegQueryKind> for QueryKind {
    fn from(k: CegQueryKind) -> Self {
        match k {
            CegQueryKind::Backdoor => QueryKind::Backdoor,
            CegQueryKind::Control => QueryKind::Control,
            CegQueryKind::Mceg => QueryKind::Mceg,
        }
    }
}

/// Opaque resolved model.
pub struct CegModel {
    model: Model,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(CegStatus, String);

impl From<QueryError> for Failure {
    fn from(e: QueryError) -> Self {
        let status = match &e {
            QueryError::Schema(_) => CegStatus::Schema,
            QueryError::Missing(MissingError::NotIdentifiable(_)) => CegStatus::NotIdentifiable,
            _ => CegStatus::Rejected,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CegStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CegStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CegStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(CegStatus::NullArgument, "null string argument".into()));
    }
    CStr::from_ptr(p).to_str().map_err(|e| Failure(CegStatus::InvalidUtf8, e.to_string()))
}

unsafe fn model<'a>(m: *const CegModel) -> Result<&'a Model, Failure> {
    m.as_ref().map(|h| &h.model).ok_or_else(|| Failure(CegStatus::NullArgument, "null model handle".into()))
}

fn null_out() -> Failure {
    Failure(CegStatus::NullArgument, "null output pointer".into())
}

fn query_doc(json: &str) -> Result<QueryDoc, Failure> {
    from_json(json).map_err(|e| Failure(CegStatus::Schema, e.to_string()))
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn ceg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn ceg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses and resolves a bundle document. On success `*out` owns a new handle.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ceg_model_from_json(json: *const c_char, out: *mut *mut CegModel) -> CegStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_out());
        }
        *out = ptr::null_mut();
        let bundle = parse_bundle(text(json)?).map_err(|e| Failure(CegStatus::Schema, e.to_string()))?;
        let model = bundle.resolve().map_err(|e| Failure(CegStatus::Schema, e.to_string()))?;
        *out = Box::into_raw(Box::new(CegModel { model }));
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `m` must come from [`ceg_model_from_json`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ceg_model_free(m: *mut CegModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Internal positions of the model's CEG, sinks excluded.
///
/// # Safety
/// `m` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ceg_model_num_positions(m: *const CegModel, out: *mut usize) -> CegStatus {
    guard(|| {
        let model = model(m)?;
        if out.is_null() {
            return Err(null_out());
        }
        *out = model.ceg.num_internal();
        Ok(())
    })
}

/// DOT text of the CEG. Free the string with [`ceg_string_free`].
///
/// # Safety
/// `m` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ceg_model_to_dot(m: *const CegModel, out: *mut *mut c_char) -> CegStatus {
    guard(|| {
        let model = model(m)?;
        if out.is_null() {
            return Err(null_out());
        }
        let dot = CString::new(ceg_to_dot(&model.ceg)).map_err(|e| Failure(CegStatus::Rejected, e.to_string()))?;
        *out = dot.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ceg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Evaluates a query document. `cap` bounds path enumeration; 0 selects the default.
///
/// # Safety
/// `m` must be a live handle, `query_json` NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ceg_query(m: *const CegModel, kind: CegQueryKind, query_json: *const c_char, cap: usize, out: *mut f64) -> CegStatus {
    guard(|| {
        let model = model(m)?;
        let q = query_doc(text(query_json)?)?;
        if out.is_null() {
            return Err(null_out());
        }
        let cap = if cap == 0 { DEFAULT_PATH_CAP } else { cap };
        *out = evaluate(model, kind.into(), &q, cap)?.value;
        Ok(())
    })
}

/// Formula and oracle values for a query. Returns `ToleranceExceeded` with
/// both outputs filled when they differ by more than `tolerance`.
///
/// # Safety
/// `m` must be a live handle, `query_json` NUL-terminated, outputs valid.
#[no_mangle]
pub unsafe extern "C" fn ceg_oracle_check(
    m: *const CegModel,
    kind: CegQueryKind,
    query_json: *const c_char,
    tolerance: f64,
    out_formula: *mut f64,
    out_oracle: *mut f64,
) -> CegStatus {
    guard(|| {
        let model = model(m)?;
        let q = query_doc(text(query_json)?)?;
        if out_formula.is_null() || out_oracle.is_null() {
            return Err(null_out());
        }
        let r = oracle_check(model, kind.into(), &q, DEFAULT_PATH_CAP, tolerance)?;
        *out_formula = r.formula;
        *out_oracle = r.oracle;
        if !r.pass {
            return Err(Failure(CegStatus::ToleranceExceeded, format!("abs diff {:e} above {:e}", r.abs_diff, tolerance)));
        }
        Ok(())
    })
}
