//! C ABI over the bracket-linear function calculus.
//!
//! The surface follows the usual opaque-handle pattern: a [`GlfProgram`]
//! owns a parsed program (basis declarations, bindings, systems,
//! experiments) and a [`GlfExprHandle`] owns one expression tied to that
//! program's symbol session. Every function returns a [`GlfStatus`]; on
//! failure the thread-local message from [`glf_last_error`] explains why.
//! Strings returned by this library must be released with
//! [`glf_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};

use glf_calculus::dsl::{self, DslProgram};
use glf_calculus::glf_ast::GlfExpr;
use glf_calculus::runner::{self, RunConfig};
use glf_calculus::spectral;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Status codes returned by every entry point.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum GlfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    EvalError = 4,
    Unsupported = 5,
}

/// Opaque parsed program (declarations, bindings, systems, experiments).
pub struct GlfProgram {
    inner: DslProgram,
}

/// Opaque expression bound to a program's symbol session.
pub struct GlfExprHandle {
    expr: GlfExpr,
}

unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, GlfStatus> {
    if ptr.is_null() {
        set_error("null string pointer".into());
        return Err(GlfStatus::NullPointer);
    }
    unsafe { CStr::from_ptr(ptr) }.to_str().map_err(|_| {
        set_error("string is not valid UTF-8".into());
        GlfStatus::InvalidUtf8
    })
}

fn give_string(s: String) -> *mut c_char {
    CString::new(s)
        .unwrap_or_else(|_| CString::new("").unwrap())
        .into_raw()
}

/// Most recent error message on this thread, or null. Free with
/// [`glf_string_free`].
#[no_mangle]
pub extern "C" fn glf_last_error() -> *mut c_char {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        Some(c) => c.clone().into_raw(),
        None => std::ptr::null_mut(),
    })
}

/// Frees a string previously returned by this library.
///
/// # Safety
/// `ptr` must be null or a pointer obtained from this library's functions,
/// released at most once.
#[no_mangle]
pub unsafe extern "C" fn glf_string_free(ptr: *mut c_char) {
    if !ptr.is_null() {
        drop(unsafe { CString::from_raw(ptr) });
    }
}

/// Parses a program. On success writes a fresh handle to `out`.
///
/// # Safety
/// `text` must point to a NUL-terminated string; `out` must be valid for a
/// single pointer write.
#[no_mangle]
pub unsafe extern "C" fn glf_program_parse(
    text: *const c_char,
    out: *mut *mut GlfProgram,
) -> GlfStatus {
    if out.is_null() {
        set_error("null output pointer".into());
        return GlfStatus::NullPointer;
    }
    let text = match unsafe { read_str(text) } {
        Ok(t) => t,
        Err(s) => return s,
    };
    match dsl::parse(text) {
        Ok(program) => {
            unsafe { *out = Box::into_raw(Box::new(GlfProgram { inner: program })) };
            GlfStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            GlfStatus::ParseError
        }
    }
}

/// # Safety
/// `program` must be null or a handle from [`glf_program_parse`], released
/// at most once.
#[no_mangle]
pub unsafe extern "C" fn glf_program_free(program: *mut GlfProgram) {
    if !program.is_null() {
        drop(unsafe { Box::from_raw(program) });
    }
}

/// Canonical printed form of the program. Free with [`glf_string_free`].
///
/// # Safety
/// `program` must be a live handle from [`glf_program_parse`].
#[no_mangle]
pub unsafe extern "C" fn glf_program_print(program: *const GlfProgram) -> *mut c_char {
    if program.is_null() {
        set_error("null program".into());
        return std::ptr::null_mut();
    }
    give_string(dsl::print_program(unsafe { &(*program).inner }))
}

/// Runs the program's experiments; writes a human summary to `out_summary`
/// and the worst check exit code (0 ok / 2 refuted / 3 inconclusive) to
/// `out_code`.
///
/// # Safety
/// `program` must be a live handle; output pointers must be valid for single
/// writes.
#[no_mangle]
pub unsafe extern "C" fn glf_program_run(
    program: *const GlfProgram,
    out_summary: *mut *mut c_char,
    out_code: *mut i32,
) -> GlfStatus {
    if program.is_null() || out_summary.is_null() || out_code.is_null() {
        set_error("null pointer".into());
        return GlfStatus::NullPointer;
    }
    match runner::run(unsafe { &(*program).inner }, &RunConfig::default()) {
        Ok(outcome) => {
            unsafe {
                *out_summary = give_string(outcome.summary);
                *out_code = outcome.exit_code;
            }
            GlfStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            GlfStatus::EvalError
        }
    }
}

/// Parses an expression against the program's declared names.
///
/// # Safety
/// `program` must be a live handle; `text` a NUL-terminated string; `out`
/// valid for a single pointer write.
#[no_mangle]
pub unsafe extern "C" fn glf_expr_parse(
    program: *const GlfProgram,
    text: *const c_char,
    out: *mut *mut GlfExprHandle,
) -> GlfStatus {
    if program.is_null() || out.is_null() {
        set_error("null pointer".into());
        return GlfStatus::NullPointer;
    }
    let text = match unsafe { read_str(text) } {
        Ok(t) => t,
        Err(s) => return s,
    };
    match dsl::parse_expr_in(unsafe { &(*program).inner }, text) {
        Ok(expr) => {
            unsafe { *out = Box::into_raw(Box::new(GlfExprHandle { expr })) };
            GlfStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            GlfStatus::ParseError
        }
    }
}

/// # Safety
/// `expr` must be null or a handle from [`glf_expr_parse`], released at most
/// once.
#[no_mangle]
pub unsafe extern "C" fn glf_expr_free(expr: *mut GlfExprHandle) {
    if !expr.is_null() {
        drop(unsafe { Box::from_raw(expr) });
    }
}

/// Weight (floor/frac nesting depth) of the expression.
///
/// # Safety
/// `expr` must be a live handle; `out` valid for a single write.
#[no_mangle]
pub unsafe extern "C" fn glf_expr_weight(expr: *const GlfExprHandle, out: *mut u32) -> GlfStatus {
    if expr.is_null() || out.is_null() {
        set_error("null pointer".into());
        return GlfStatus::NullPointer;
    }
    unsafe { *out = (*expr).expr.weight() };
    GlfStatus::Ok
}

/// Coefficient of the linear trend of the expression, as a float.
///
/// # Safety
/// `expr` must be a live handle; `out` valid for a single write.
#[no_mangle]
pub unsafe extern "C" fn glf_expr_linear_part(
    expr: *const GlfExprHandle,
    out: *mut f64,
) -> GlfStatus {
    if expr.is_null() || out.is_null() {
        set_error("null pointer".into());
        return GlfStatus::NullPointer;
    }
    match unsafe { &(*expr).expr }.linear_part() {
        Ok(a) => {
            unsafe { *out = a.to_f64() };
            GlfStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            GlfStatus::EvalError
        }
    }
}

/// Whether the expression is bounded (zero linear trend).
///
/// # Safety
/// `expr` must be a live handle; `out` valid for a single write.
#[no_mangle]
pub unsafe extern "C" fn glf_expr_is_bounded(
    expr: *const GlfExprHandle,
    out: *mut bool,
) -> GlfStatus {
    if expr.is_null() || out.is_null() {
        set_error("null pointer".into());
        return GlfStatus::NullPointer;
    }
    match unsafe { &(*expr).expr }.is_bounded() {
        Ok(b) => {
            unsafe { *out = b };
            GlfStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            GlfStatus::EvalError
        }
    }
}

/// Evaluates the expression at an integer argument (float path with exact
/// fallback near discontinuities).
///
/// # Safety
/// `expr` must be a live handle; `out` valid for a single write.
#[no_mangle]
pub unsafe extern "C" fn glf_expr_eval(
    expr: *const GlfExprHandle,
    n: i64,
    out: *mut f64,
) -> GlfStatus {
    if expr.is_null() || out.is_null() {
        set_error("null pointer".into());
        return GlfStatus::NullPointer;
    }
    unsafe { *out = (*expr).expr.eval_f64(n) };
    GlfStatus::Ok
}

/// Exact evaluation rendered as a symbolic string. Free with
/// [`glf_string_free`].
///
/// # Safety
/// `expr` must be a live handle; `out` valid for a single pointer write.
#[no_mangle]
pub unsafe extern "C" fn glf_expr_eval_exact(
    expr: *const GlfExprHandle,
    n: i64,
    out: *mut *mut c_char,
) -> GlfStatus {
    if expr.is_null() || out.is_null() {
        set_error("null pointer".into());
        return GlfStatus::NullPointer;
    }
    match unsafe { &(*expr).expr }.eval_exact(n) {
        Ok(v) => {
            unsafe { *out = give_string(format!("{v}")) };
            GlfStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            GlfStatus::EvalError
        }
    }
}

/// Cesàro limit of `exp(2 pi i beta phi(n))` as a JSON record
/// `{re, im, exact, certificate}`. `beta_text` is parsed against the
/// program's names and must be constant. Free the string with
/// [`glf_string_free`].
///
/// # Safety
/// `program` and `expr` must be live handles; `beta_text` a NUL-terminated
/// string; `out` valid for a single pointer write.
#[no_mangle]
pub unsafe extern "C" fn glf_char_limit(
    program: *const GlfProgram,
    expr: *const GlfExprHandle,
    beta_text: *const c_char,
    out: *mut *mut c_char,
) -> GlfStatus {
    if program.is_null() || expr.is_null() || out.is_null() {
        set_error("null pointer".into());
        return GlfStatus::NullPointer;
    }
    let beta_text = match unsafe { read_str(beta_text) } {
        Ok(t) => t,
        Err(s) => return s,
    };
    let beta_expr = match dsl::parse_expr_in(unsafe { &(*program).inner }, beta_text) {
        Ok(e) => e,
        Err(e) => {
            set_error(e.to_string());
            return GlfStatus::ParseError;
        }
    };
    let Some(beta) = beta_expr.as_constant() else {
        set_error("beta must be a constant expression".into());
        return GlfStatus::Unsupported;
    };
    match spectral::char_limit(unsafe { &(*expr).expr }, &beta) {
        Ok(v) => {
            let json = serde_json::json!({
                "re": v.value.re,
                "im": v.value.im,
                "exact": v.exact,
                "certificate": v.certificate,
            });
            unsafe { *out = give_string(json.to_string()) };
            GlfStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            GlfStatus::EvalError
        }
    }
}
