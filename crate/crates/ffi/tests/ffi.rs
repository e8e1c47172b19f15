use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::ptr;

use csa_ffi::*;

fn samples() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../samples")
}

fn soup() -> Vec<u8> {
    std::fs::read(samples().join("soup.json")).unwrap()
}

fn last_error() -> String {
    let p = csa_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn take(p: *mut c_char) -> String {
    let s = CStr::from_ptr(p).to_string_lossy().into_owned();
    csa_string_free(p);
    s
}

#[test]
fn barcode_functions() {
    let valid = CString::new("4006381333931").unwrap();
    let invalid = CString::new("4006381333932").unwrap();
    unsafe {
        assert_eq!(csa_barcode_validate(valid.as_ptr()), CsaStatus::Ok);
        assert!(csa_last_error().is_null());
        assert_eq!(csa_barcode_validate(invalid.as_ptr()), CsaStatus::InvalidBarcode);
        assert!(last_error().contains("check digit"));
        assert_eq!(csa_barcode_validate(ptr::null()), CsaStatus::NullArgument);

        let mut digit = 0u8;
        let payload = CString::new("123456789012").unwrap();
        assert_eq!(csa_barcode_check_digit(payload.as_ptr(), &mut digit), CsaStatus::Ok);
        assert_eq!(digit, 8);
        assert_eq!(csa_barcode_check_digit(valid.as_ptr(), &mut digit), CsaStatus::InvalidBarcode);
        assert_eq!(csa_barcode_check_digit(payload.as_ptr(), ptr::null_mut()), CsaStatus::NullArgument);
    }
}

#[test]
fn lint_and_canonicalize() {
    let doc = soup();
    let dirty = std::fs::read(samples().join("invalid/door-open-heating.json")).unwrap();
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(csa_lint(doc.as_ptr(), doc.len(), &mut out), CsaStatus::Ok);
        let report: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(report["diagnostics"][0]["rule"], "L2");

        let mut out = ptr::null_mut();
        assert_eq!(csa_lint(dirty.as_ptr(), dirty.len(), &mut out), CsaStatus::LintFailed);
        assert!(take(out).contains("\"L1\""));

        let mut out = ptr::null_mut();
        assert_eq!(csa_lint(b"{".as_ptr(), 1, &mut out), CsaStatus::ParseFailed);
        assert!(out.is_null());
        assert!(last_error().starts_with("SyntaxError"));

        let mut out = ptr::null_mut();
        assert_eq!(csa_canonicalize(doc.as_ptr(), doc.len(), &mut out), CsaStatus::Ok);
        let canonical = take(out);
        let mut again = ptr::null_mut();
        assert_eq!(csa_canonicalize(canonical.as_ptr(), canonical.len(), &mut again), CsaStatus::Ok);
        assert_eq!(take(again), canonical);
    }
}

#[test]
fn session_handle_lifecycle() {
    let doc = soup();
    let action = |s: *mut CsaSession, json: &str| {
        let c = CString::new(json).unwrap();
        unsafe { csa_session_action(s, c.as_ptr()) }
    };
    unsafe {
        let mut s = ptr::null_mut();
        let unknown = CString::new("nope").unwrap();
        assert_eq!(csa_session_new(doc.as_ptr(), doc.len(), unknown.as_ptr(), 1, &mut s), CsaStatus::UnknownSet);
        assert!(s.is_null());

        assert_eq!(csa_session_new(doc.as_ptr(), doc.len(), ptr::null(), 1, &mut s), CsaStatus::Ok);
        assert_eq!(csa_session_is_terminal(s), 0);
        assert_eq!(action(s, r#"{"action":"OpenDoor"}"#), CsaStatus::Ok);
        assert_eq!(action(s, r#"{"action":"OpenDoor"}"#), CsaStatus::PreconditionViolated);
        assert!(last_error().contains("already open"));
        assert_eq!(action(s, r#"{"action":"Fly"}"#), CsaStatus::InvalidAction);
        assert_eq!(action(s, r#"{"action":"PlaceLoad","grams":400,"initialTempC":5.0}"#), CsaStatus::Ok);
        assert_eq!(action(s, r#"{"action":"CloseDoor"}"#), CsaStatus::Ok);
        assert_eq!(csa_session_advance(s, 0), CsaStatus::InvalidArgument);
        assert_eq!(csa_session_advance(s, 60_000), CsaStatus::Ok);

        let mut out = ptr::null_mut();
        assert_eq!(csa_session_snapshot(s, &mut out), CsaStatus::Ok);
        let snap: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(snap["phase"], "Heating");
        assert_eq!(snap["remainingMillis"], 60_000);

        assert_eq!(action(s, r#"{"action":"Abort"}"#), CsaStatus::Ok);
        assert_eq!(csa_session_is_terminal(s), 1);
        csa_session_free(s);
        csa_session_free(ptr::null_mut());
        assert_eq!(csa_session_is_terminal(ptr::null()), -1);
        assert_eq!(csa_session_advance(ptr::null_mut(), 1), CsaStatus::NullArgument);
    }
}

#[test]
fn dirty_documents_do_not_start_sessions() {
    let dirty = std::fs::read(samples().join("invalid/door-open-heating.json")).unwrap();
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(csa_session_new(dirty.as_ptr(), dirty.len(), ptr::null(), 1, &mut s), CsaStatus::LintFailed);
    }
    assert!(s.is_null());
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/csa.h")).unwrap();
    for name in [
        "csa_last_error",
        "csa_string_free",
        "csa_barcode_validate",
        "csa_barcode_check_digit",
        "csa_lint",
        "csa_canonicalize",
        "csa_session_new",
        "csa_session_free",
        "csa_session_action",
        "csa_session_advance",
        "csa_session_snapshot",
        "csa_session_is_terminal",
        "CSA_STATUS_PRECONDITION_VIOLATED = 8",
        "typedef struct CsaSession CsaSession",
    ] {
        assert!(header.contains(name), "{name} missing from csa.h");
    }
}

/// Compiles the C smoke program against the generated header and the shared library.
#[test]
fn c_program_links_and_runs() {
    let deps = std::env::current_exe().unwrap().parent().unwrap().to_path_buf();
    let lib_dir = deps.parent().unwrap().to_path_buf();
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // `cargo test` builds only the rlib; the shared library needs its own build.
    let mut build = std::process::Command::new(env!("CARGO"));
    build.args(["build", "--quiet", "--lib", "--manifest-path"]).arg(manifest.join("Cargo.toml"));
    if !cfg!(debug_assertions) {
        build.arg("--release");
    }
    assert!(build.status().unwrap().success());
    let so = lib_dir.join(if cfg!(target_os = "macos") { "libcsa_ffi.dylib" } else { "libcsa_ffi.so" });
    assert!(so.exists(), "shared library not built at {}", so.display());
    let out_dir = tempfile::tempdir().unwrap();
    let exe = out_dir.path().join("smoke");
    let status = std::process::Command::new(std::env::var("CC").unwrap_or_else(|_| "cc".into()))
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg("-L")
        .arg(&lib_dir)
        .arg("-lcsa_ffi")
        .arg(format!("-Wl,-rpath,{}", lib_dir.display()))
        .arg("-o")
        .arg(&exe)
        .status()
        .expect("a C compiler is required for this test");
    assert!(status.success());
    let run = std::process::Command::new(&exe).arg(samples().join("soup.json")).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "ok");
}
