use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use pdnql_ffi::*;

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = pdnql_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn load() -> *mut PdnqlNetwork {
    let path = c(repo().join("data/sample/pdn.json").to_str().unwrap());
    let mut net = ptr::null_mut();
    assert_eq!(unsafe { pdnql_network_load(path.as_ptr(), &mut net) }, PdnqlStatus::Ok);
    assert!(!net.is_null());
    net
}

unsafe fn take(s: *mut std::ffi::c_char) -> String {
    let out = CStr::from_ptr(s).to_string_lossy().into_owned();
    pdnql_string_free(s);
    out
}

#[test]
fn run_matches_the_library() {
    let net = load();
    let sql = std::fs::read_to_string(repo().join("data/queries/aspirin_count.sql")).unwrap();
    let mut res = ptr::null_mut();
    unsafe {
        assert_eq!(pdnql_run(net, c(&sql).as_ptr(), PdnqlPreset::Full as u32, &mut res), PdnqlStatus::Ok);
        assert_eq!(pdnql_result_row_count(res), 1);
        assert_eq!(pdnql_result_column_count(res), 1);
        let mut s = ptr::null_mut();
        assert_eq!(pdnql_result_format(res, PdnqlFormat::Csv as u32, &mut s), PdnqlStatus::Ok);
        assert_eq!(take(s), "count\n4\n");
        assert_eq!(pdnql_result_format(res, PdnqlFormat::Json as u32, &mut s), PdnqlStatus::Ok);
        assert_eq!(take(s), r#"[{"count":4}]"#);
        assert_eq!(pdnql_result_format(res, PdnqlFormat::CostJson as u32, &mut s), PdnqlStatus::Ok);
        assert!(take(s).starts_with(r#"{"operators":"#));

        let pdn = pdnql::config::PdnConfig::load(&repo().join("data/sample/pdn.json")).unwrap();
        let direct = pdnql::federation::run_query(&sql, &pdn.catalog, &pdn.data, Default::default()).unwrap();
        assert_eq!(pdnql_result_total_compares(res), direct.cost.total_compares());
        pdnql_result_free(res);
        pdnql_network_free(net);
    }
}

#[test]
fn explain_uses_the_preset() {
    let net = load();
    let sql = c("SELECT diag, COUNT(*) cnt FROM diagnoses WHERE pid IN cdiff_cohort GROUP BY diag");
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(pdnql_explain(net, sql.as_ptr(), PdnqlPreset::Full as u32, &mut s), PdnqlStatus::Ok);
        assert!(take(s).contains("phase=low"));
        assert_eq!(pdnql_explain(net, sql.as_ptr(), PdnqlPreset::Baseline as u32, &mut s), PdnqlStatus::Ok);
        assert!(!take(s).contains("phase="));
        pdnql_network_free(net);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let net = load();
    unsafe {
        let mut res = ptr::null_mut();
        let st = pdnql_run(net, c("SELECT pid, time FROM diagnoses").as_ptr(), 2, &mut res);
        assert_eq!(st, PdnqlStatus::Policy);
        assert!(res.is_null());
        assert!(last_error().contains("private attribute"));

        assert_eq!(pdnql_run(net, c("SELEC pid").as_ptr(), 2, &mut res), PdnqlStatus::Parse);
        assert!(last_error().contains("line 1"));
        assert_eq!(pdnql_run(net, c("SELECT x FROM nowhere").as_ptr(), 2, &mut res), PdnqlStatus::Resolve);
        assert_eq!(pdnql_run(net, c("SELECT pid FROM diagnoses").as_ptr(), 9, &mut res), PdnqlStatus::InvalidArgument);
        assert_eq!(pdnql_run(net, ptr::null(), 2, &mut res), PdnqlStatus::NullArgument);
        assert_eq!(pdnql_run(ptr::null(), c("SELECT 1").as_ptr(), 2, &mut res), PdnqlStatus::NullArgument);
        let bad = [0xffu8, 0];
        assert_eq!(pdnql_run(net, bad.as_ptr().cast(), 2, &mut res), PdnqlStatus::InvalidUtf8);

        // success clears the message
        assert_eq!(pdnql_run(net, c("SELECT pid FROM diagnoses").as_ptr(), 2, &mut res), PdnqlStatus::Ok);
        assert!(pdnql_last_error().is_null());
        pdnql_result_free(res);
        pdnql_network_free(net);

        let mut net = ptr::null_mut();
        assert_eq!(pdnql_network_load(c("/nonexistent/pdn.json").as_ptr(), &mut net), PdnqlStatus::Load);
        assert!(net.is_null());
        assert!(last_error().contains("/nonexistent/pdn.json"));
    }
}

#[test]
fn null_handles_are_harmless() {
    unsafe {
        pdnql_network_free(ptr::null_mut());
        pdnql_result_free(ptr::null_mut());
        pdnql_string_free(ptr::null_mut());
        assert_eq!(pdnql_result_row_count(ptr::null()), 0);
        assert_eq!(pdnql_result_total_compares(ptr::null()), 0);
        let mut s = ptr::null_mut();
        assert_eq!(pdnql_result_format(ptr::null(), 0, &mut s), PdnqlStatus::NullArgument);
    }
}

#[test]
fn garble_eval_decodes_eq2() {
    let eq2 = c(&std::fs::read_to_string(repo().join("data/circuits/eq2.txt")).unwrap());
    for a in 0..4 {
        for b in 0..4 {
            let (mut bits, mut width) = (0u64, 0usize);
            let st = unsafe { pdnql_garble_eval(eq2.as_ptr(), a, b, a * 4 + b, &mut bits, &mut width) };
            assert_eq!(st, PdnqlStatus::Ok);
            assert_eq!((bits, width), (u64::from(a == b), 1), "{a} {b}");
        }
    }
    let (mut bits, mut width) = (0u64, 0usize);
    let st = unsafe { pdnql_garble_eval(c("G0 AND 0 1 -> 2").as_ptr(), 0, 0, 1, &mut bits, &mut width) };
    assert_eq!(st, PdnqlStatus::Circuit);
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/pdnql.h")).unwrap();
    let src = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert_eq!(exports.len(), 12);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    for ty in ["typedef struct PdnqlNetwork PdnqlNetwork;", "typedef struct PdnqlResult PdnqlResult;", "PDNQL_STATUS_POLICY = 14"] {
        assert!(header.contains(ty), "{ty}");
    }
}

/// Compiles the C smoke program against the header and the static library.
#[test]
fn c_program_links_and_runs() {
    let exe = std::env::current_exe().unwrap();
    let lib = exe.parent().unwrap().parent().unwrap().join("libpdnql_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("a C compiler on PATH");
    assert!(status.success());
    let out = Command::new(&bin).arg(repo().join("data/sample/pdn.json")).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "rows=1");
    assert_eq!(lines[1], "count");
    assert_eq!(lines[3], "policy=14 null");
    assert_eq!(lines[4], "or=1 width=1 status=0");
}
