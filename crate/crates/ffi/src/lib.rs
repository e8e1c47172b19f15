//! C ABI over `csa-core`.
//!
//! Conventions:
//!
//! * Every fallible function returns a [`CsaStatus`]. On failure a message is
//!   available from [`csa_last_error`] on the same thread.
//! * Strings handed out by this library are NUL-terminated UTF-8 and must be
//!   released with [`csa_string_free`].
//! * Sessions are opaque [`CsaSession`] handles released with [`csa_session_free`].
//!   A handle must not be used from two threads at once.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use csa_core::dsl::{check_digit, lint, parse_resource, select_instruction_set, serialize_resource, validate_barcode};
use csa_core::engine::Engine;
use csa_core::host::{SessionAction, SessionHost};
use csa_core::sim::SimConfig;

/// Result codes shared by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsaStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    ParseFailed = 3,
    LintFailed = 4,
    InvalidBarcode = 5,
    UnknownSet = 6,
    InvalidAction = 7,
    PreconditionViolated = 8,
    InvalidArgument = 9,
    Panic = 10,
}

/// A running session: one engine and one simulated appliance.
pub struct CsaSession {
    host: SessionHost,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn fail(status: CsaStatus, message: impl Into<String>) -> CsaStatus {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
    status
}

/// Runs `body`, clearing the last error first and turning panics into [`CsaStatus::Panic`].
fn guard(body: impl FnOnce() -> CsaStatus) -> CsaStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    catch_unwind(AssertUnwindSafe(body)).unwrap_or_else(|_| fail(CsaStatus::Panic, "internal panic"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, CsaStatus> {
    if p.is_null() {
        return Err(fail(CsaStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(CsaStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn bytes<'a>(p: *const u8, len: usize, what: &str) -> Result<&'a [u8], CsaStatus> {
    if p.is_null() {
        return Err(fail(CsaStatus::NullArgument, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn hand_out(out: *mut *mut c_char, s: String) -> CsaStatus {
    match CString::new(s) {
        Ok(c) => {
            *out = c.into_raw();
            CsaStatus::Ok
        }
        Err(_) => fail(CsaStatus::InvalidUtf8, "output contains a NUL byte"),
    }
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(status) => return status,
        }
    };
}

/// Message for the most recent failure on this thread, or NULL.
/// The pointer stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn csa_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn csa_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Checks a 13-digit barcode.
///
/// # Safety
/// `digits` must be NULL or a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn csa_barcode_validate(digits: *const c_char) -> CsaStatus {
    guard(|| {
        let digits = tri!(text(digits, "digits"));
        match validate_barcode(digits) {
            Ok(_) => CsaStatus::Ok,
            Err(e) => fail(CsaStatus::InvalidBarcode, e.to_string()),
        }
    })
}

/// Computes the check digit of a 12-digit payload into `out`.
///
/// # Safety
/// `payload` must be NULL or a valid NUL-terminated string; `out` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn csa_barcode_check_digit(payload: *const c_char, out: *mut u8) -> CsaStatus {
    guard(|| {
        let payload = tri!(text(payload, "payload"));
        if out.is_null() {
            return fail(CsaStatus::NullArgument, "out is null");
        }
        if payload.len() != 12 || !payload.bytes().all(|b| b.is_ascii_digit()) {
            return fail(CsaStatus::InvalidBarcode, "payload must be exactly 12 digits");
        }
        let digits: Vec<u8> = payload.bytes().map(|b| b - b'0').collect();
        *out = check_digit(&digits);
        CsaStatus::Ok
    })
}

/// Lints a resource document and writes the report as JSON to `out_report`.
///
/// Returns `Ok` for a report without errors and `LintFailed` when it has
/// errors; the report is written in both cases. A document that does not
/// parse yields `ParseFailed` and no report.
///
/// # Safety
/// `doc` must point to `len` readable bytes; `out_report` must be writable.
#[no_mangle]
pub unsafe extern "C" fn csa_lint(doc: *const u8, len: usize, out_report: *mut *mut c_char) -> CsaStatus {
    guard(|| {
        let doc = tri!(bytes(doc, len, "doc"));
        if out_report.is_null() {
            return fail(CsaStatus::NullArgument, "out_report is null");
        }
        let resource = match parse_resource(doc) {
            Ok(r) => r,
            Err(e) => return fail(CsaStatus::ParseFailed, format!("{}: {e}", e.code())),
        };
        let report = lint(&resource);
        let status = hand_out(out_report, serde_json::to_string(&report).expect("reports serialize"));
        if status != CsaStatus::Ok {
            return status;
        }
        if report.has_errors() {
            fail(CsaStatus::LintFailed, format!("{} lint error(s)", report.errors().count()))
        } else {
            CsaStatus::Ok
        }
    })
}

/// Parses a document and writes its canonical serialization to `out`.
///
/// # Safety
/// `doc` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn csa_canonicalize(doc: *const u8, len: usize, out: *mut *mut c_char) -> CsaStatus {
    guard(|| {
        let doc = tri!(bytes(doc, len, "doc"));
        if out.is_null() {
            return fail(CsaStatus::NullArgument, "out is null");
        }
        match parse_resource(doc) {
            Ok(r) => {
                let canonical = String::from_utf8(serialize_resource(&r)).expect("canonical form is UTF-8");
                hand_out(out, canonical)
            }
            Err(e) => fail(CsaStatus::ParseFailed, format!("{}: {e}", e.code())),
        }
    })
}

/// Starts a session on a lint-clean document. `set_id` picks the instruction
/// set by id; when NULL, `ability_level` selects it.
///
/// # Safety
/// `doc` must point to `len` readable bytes, `set_id` must be NULL or a valid
/// NUL-terminated string, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn csa_session_new(
    doc: *const u8,
    len: usize,
    set_id: *const c_char,
    ability_level: u32,
    out: *mut *mut CsaSession,
) -> CsaStatus {
    guard(|| {
        let doc = tri!(bytes(doc, len, "doc"));
        if out.is_null() {
            return fail(CsaStatus::NullArgument, "out is null");
        }
        let resource = match parse_resource(doc) {
            Ok(r) => r,
            Err(e) => return fail(CsaStatus::ParseFailed, format!("{}: {e}", e.code())),
        };
        let set = if set_id.is_null() {
            select_instruction_set(&resource, ability_level)
        } else {
            let id = tri!(text(set_id, "set_id"));
            match resource.set_by_id(id) {
                Some(set) => set,
                None => return fail(CsaStatus::UnknownSet, format!("no instruction set `{id}`")),
            }
        };
        match SessionHost::start(Arc::new(set.clone()), Engine::default(), SimConfig::default()) {
            Ok(host) => {
                *out = Box::into_raw(Box::new(CsaSession { host }));
                CsaStatus::Ok
            }
            Err(e) => fail(CsaStatus::LintFailed, e.to_string()),
        }
    })
}

/// Releases a session. NULL is ignored.
///
/// # Safety
/// `session` must come from [`csa_session_new`] and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn csa_session_free(session: *mut CsaSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Applies an action given as JSON, e.g. `{"action":"OpenDoor"}`.
/// A refused action returns `PreconditionViolated` and changes nothing.
///
/// # Safety
/// `session` must be a live handle and `action_json` a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn csa_session_action(session: *mut CsaSession, action_json: *const c_char) -> CsaStatus {
    guard(|| {
        let Some(session) = session.as_mut() else {
            return fail(CsaStatus::NullArgument, "session is null");
        };
        let json = tri!(text(action_json, "action_json"));
        let action: SessionAction = match serde_json::from_str(json) {
            Ok(a) => a,
            Err(e) => return fail(CsaStatus::InvalidAction, e.to_string()),
        };
        match session.host.act(&action) {
            Ok(_) => CsaStatus::Ok,
            Err(e) => fail(CsaStatus::PreconditionViolated, e.0),
        }
    })
}

/// Advances virtual time by `dt_millis`, which must be positive.
///
/// # Safety
/// `session` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn csa_session_advance(session: *mut CsaSession, dt_millis: u64) -> CsaStatus {
    guard(|| {
        let Some(session) = session.as_mut() else {
            return fail(CsaStatus::NullArgument, "session is null");
        };
        if dt_millis == 0 {
            return fail(CsaStatus::InvalidArgument, "dt_millis must be positive");
        }
        session.host.advance(dt_millis);
        CsaStatus::Ok
    })
}

/// Writes the current snapshot as JSON to `out`.
///
/// # Safety
/// `session` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn csa_session_snapshot(session: *const CsaSession, out: *mut *mut c_char) -> CsaStatus {
    guard(|| {
        let Some(session) = session.as_ref() else {
            return fail(CsaStatus::NullArgument, "session is null");
        };
        if out.is_null() {
            return fail(CsaStatus::NullArgument, "out is null");
        }
        hand_out(out, serde_json::to_string(&session.host.snapshot()).expect("snapshots serialize"))
    })
}

/// 1 when the session reached Complete or Aborted, 0 otherwise, -1 for NULL.
///
/// # Safety
/// `session` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn csa_session_is_terminal(session: *const CsaSession) -> i32 {
    match session.as_ref() {
        Some(s) => i32::from(s.host.is_terminal()),
        None => -1,
    }
}
