use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use ceg_engine::fixtures;
use ceg_engine_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(ceg_last_error()) }.to_str().unwrap().to_string()
}

fn load(json: &str) -> *mut CegModel {
    let mut m = ptr::null_mut();
    let status = unsafe { ceg_model_from_json(c(json).as_ptr(), &mut m) };
    assert_eq!(status, CegStatus::Ok, "{}", last_error());
    m
}

#[test]
fn bushing_handle_round_trip() {
    let m = load(fixtures::BUSHING_JSON);
    let mut n = 0;
    assert_eq!(unsafe { ceg_model_num_positions(m, &mut n) }, CegStatus::Ok);
    assert_eq!(n, 22);
    let mut dot = ptr::null_mut();
    assert_eq!(unsafe { ceg_model_to_dot(m, &mut dot) }, CegStatus::Ok);
    let text = unsafe { CStr::from_ptr(dot) }.to_str().unwrap().to_string();
    assert_eq!(text, include_str!("../../core/tests/golden/bushing_ceg.dot"));
    unsafe {
        ceg_string_free(dot);
        ceg_model_free(m);
    }
}

#[test]
fn queries_and_oracle() {
    let m = load(fixtures::HIERARCHY_JSON);
    let q = c(r#"{"pi_star": {"w0": ["0.5", "0.5"]}, "cut": ["w1", "w2"]}"#);
    let mut v = 0.0;
    assert_eq!(unsafe { ceg_query(m, CegQueryKind::Backdoor, q.as_ptr(), 0, &mut v) }, CegStatus::Ok);
    assert!((v - 0.1875).abs() < 1e-12);
    let (mut f, mut o) = (0.0, 0.0);
    let control = c(r#"{"variable": "U3", "state": "yes"}"#);
    assert_eq!(unsafe { ceg_oracle_check(m, CegQueryKind::Control, control.as_ptr(), 1e-10, &mut f, &mut o) }, CegStatus::Ok);
    assert!((f - o).abs() < 1e-10);
    assert_eq!(unsafe { ceg_oracle_check(m, CegQueryKind::Control, control.as_ptr(), -1.0, &mut f, &mut o) }, CegStatus::ToleranceExceeded);
    unsafe { ceg_model_free(m) };
}

#[test]
fn error_codes() {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { ceg_model_from_json(c("{\"version\": 1}").as_ptr(), &mut m) }, CegStatus::Schema);
    assert!(m.is_null());
    assert!(last_error().contains("staged_tree"), "{}", last_error());
    assert_eq!(unsafe { ceg_model_from_json(ptr::null(), &mut m) }, CegStatus::NullArgument);
    let bad_utf8 = [0xffu8, 0];
    assert_eq!(unsafe { ceg_model_from_json(bad_utf8.as_ptr().cast(), &mut m) }, CegStatus::InvalidUtf8);

    let wl = load(fixtures::WARNING_LIGHTS_JSON);
    // unequal missingness is set in the bundle, so build one with 0.1 / 0.3
    let mut doc: serde_json::Value = serde_json::from_str(fixtures::WARNING_LIGHTS_JSON).unwrap();
    doc["missingness"]["unobservable"]["v2"] = serde_json::json!("0.3");
    doc["missingness"]["unobservable"]["v1"] = serde_json::json!("0.1");
    let skewed = load(&doc.to_string());
    let q = c(r#"{"x": [{"position": "w4", "label": "2 on"}, {"position": "w6", "label": "2 on"}], "z": ["w1", "w2"]}"#);
    let mut v = 0.0;
    assert_eq!(unsafe { ceg_query(wl, CegQueryKind::Mceg, q.as_ptr(), 0, &mut v) }, CegStatus::Ok);
    assert_eq!(unsafe { ceg_query(skewed, CegQueryKind::Mceg, q.as_ptr(), 0, &mut v) }, CegStatus::NotIdentifiable);
    let invalid = c(r#"{"pi_star": {"w0": [0.5, 0.5]}, "cut": ["w1"]}"#);
    assert_eq!(unsafe { ceg_query(wl, CegQueryKind::Backdoor, invalid.as_ptr(), 0, &mut v) }, CegStatus::Rejected);
    assert_eq!(unsafe { ceg_query(wl, CegQueryKind::Backdoor, q.as_ptr(), 0, ptr::null_mut()) }, CegStatus::NullArgument);
    unsafe {
        ceg_model_free(wl);
        ceg_model_free(skewed);
        ceg_model_free(ptr::null_mut());
    }
}

#[test]
fn header_is_current() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/ceg_engine.h")).unwrap();
    for name in ["ceg_model_from_json", "ceg_model_free", "ceg_query", "ceg_oracle_check", "ceg_last_error", "CEG_STATUS_NOT_IDENTIFIABLE"] {
        assert!(header.contains(name), "{name}");
    }
}

/// Compiles the C smoke program against the static library.
#[test]
fn c_program_links_and_runs() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir: PathBuf = exe.parent().and_then(Path::parent).unwrap().to_path_buf();
    let lib = profile_dir.join("libceg_engine_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let out = std::env::temp_dir().join(format!("ceg-smoke-{}", std::process::id()));
    let status = Command::new("cc")
        .arg(dir.join("tests/smoke.c"))
        .arg("-I")
        .arg(dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&out)
        .status()
        .expect("a C compiler is installed");
    assert!(status.success());
    let fixture = dir.join("../core/fixtures/hierarchy.json");
    let run = Command::new(&out).arg(fixture).output().unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(run.status.success(), "{stdout} {}", String::from_utf8_lossy(&run.stderr));
    assert!(stdout.starts_with("positions=3 value=0.187500 bad=3"), "{stdout}");
    let _ = std::fs::remove_file(out);
}
