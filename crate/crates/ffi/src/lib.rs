//! C ABI over the pdnql engine.
//!
//! Every fallible call returns a `PdnqlStatus`; on failure the message is
//! kept per thread and read back with `pdnql_last_error`. Handles and
//! strings handed out by this library are released with the matching
//! `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use pdnql::config::{Pdn, PdnConfig};
use pdnql::federation::{run_query, QueryOutput, RunOptions, TransportKind};
use pdnql::garble::{decode, evaluate, garble, select_input_labels, to_bits, BooleanCircuit};
use pdnql::planner::{explain, plan_query, OptimizerConfig};
use pdnql::{Error, Stage};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdnqlStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Catalog = 10,
    Load = 11,
    Parse = 12,
    Resolve = 13,
    Policy = 14,
    Plan = 15,
    Execute = 20,
    Codec = 21,
    Circuit = 30,
    Panic = 99,
}

/// Optimizer preset for planning and running.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdnqlPreset {
    Baseline = 0,
    SmcMinimized = 1,
    Full = 2,
}

/// A loaded network: catalog plus both providers' tables.
pub struct PdnqlNetwork {
    pdn: Pdn,
}

/// The outcome of one query run.
pub struct PdnqlResult {
    out: QueryOutput,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

struct Fail(PdnqlStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Fail {
        let status = match e.stage() {
            Stage::Catalog => PdnqlStatus::Catalog,
            Stage::Load => PdnqlStatus::Load,
            Stage::Parse => PdnqlStatus::Parse,
            Stage::Resolve => PdnqlStatus::Resolve,
            Stage::Policy => PdnqlStatus::Policy,
            Stage::Plan => PdnqlStatus::Plan,
            Stage::Execute => PdnqlStatus::Execute,
            Stage::Codec => PdnqlStatus::Codec,
            Stage::Circuit => PdnqlStatus::Circuit,
        };
        Fail(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PdnqlStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PdnqlStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            PdnqlStatus::Panic
        }
    }
}

/// # Safety
/// `p` is null or a valid nul-terminated string.
unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(PdnqlStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(PdnqlStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

fn null(what: &str) -> Fail {
    Fail(PdnqlStatus::NullArgument, format!("{what} is null"))
}

fn owned(s: String) -> Result<*mut c_char, Fail> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Fail(PdnqlStatus::Codec, "output contains a nul byte".into()))
}

/// `preset` is a `PdnqlPreset` value; anything else is rejected.
fn config(preset: u32) -> Result<OptimizerConfig, Fail> {
    match preset {
        p if p == PdnqlPreset::Baseline as u32 => Ok(OptimizerConfig::baseline()),
        p if p == PdnqlPreset::SmcMinimized as u32 => Ok(OptimizerConfig::smc_minimized()),
        p if p == PdnqlPreset::Full as u32 => Ok(OptimizerConfig::full()),
        p => Err(Fail(PdnqlStatus::InvalidArgument, format!("unknown preset {p}"))),
    }
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn pdnql_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Loads a network from a JSON config file.
///
/// # Safety
/// `config_path` is a nul-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pdnql_network_load(config_path: *const c_char, out: *mut *mut PdnqlNetwork) -> PdnqlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let path = text(config_path, "config_path")?;
        let pdn = PdnConfig::load(Path::new(path))?;
        *out = Box::into_raw(Box::new(PdnqlNetwork { pdn }));
        Ok(())
    })
}

/// # Safety
/// `net` is null or came from `pdnql_network_load`.
#[no_mangle]
pub unsafe extern "C" fn pdnql_network_free(net: *mut PdnqlNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Plans `sql` under a `PdnqlPreset` and writes its explain text to `out`.
///
/// # Safety
/// `net` is a live handle, `sql` a nul-terminated string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pdnql_explain(
    net: *const PdnqlNetwork,
    sql: *const c_char,
    preset: u32,
    out: *mut *mut c_char,
) -> PdnqlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let net = net.as_ref().ok_or_else(|| null("net"))?;
        let plan = plan_query(text(sql, "sql")?, &net.pdn.catalog, config(preset)?)?;
        *out = owned(explain(&plan, None))?;
        Ok(())
    })
}

/// Runs `sql` across both providers under a `PdnqlPreset`.
///
/// # Safety
/// `net` is a live handle, `sql` a nul-terminated string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pdnql_run(
    net: *const PdnqlNetwork,
    sql: *const c_char,
    preset: u32,
    out: *mut *mut PdnqlResult,
) -> PdnqlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let net = net.as_ref().ok_or_else(|| null("net"))?;
        let opts = RunOptions { config: config(preset)?, trace: false, transport: TransportKind::InProcess };
        let res = run_query(text(sql, "sql")?, &net.pdn.catalog, &net.pdn.data, opts)?;
        *out = Box::into_raw(Box::new(PdnqlResult { out: res }));
        Ok(())
    })
}

/// # Safety
/// `res` is null or came from `pdnql_run`.
#[no_mangle]
pub unsafe extern "C" fn pdnql_result_free(res: *mut PdnqlResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// Number of result rows; 0 for a null handle.
///
/// # Safety
/// `res` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pdnql_result_row_count(res: *const PdnqlResult) -> usize {
    res.as_ref().map_or(0, |r| r.out.result.rows.len())
}

/// Number of result columns; 0 for a null handle.
///
/// # Safety
/// `res` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pdnql_result_column_count(res: *const PdnqlResult) -> usize {
    res.as_ref().map_or(0, |r| r.out.result.schema.len())
}

/// Total oblivious comparisons the run performed; 0 for a null handle.
///
/// # Safety
/// `res` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pdnql_result_total_compares(res: *const PdnqlResult) -> u64 {
    res.as_ref().map_or(0, |r| r.out.cost.total_compares())
}

/// Output formats for `pdnql_result_format`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdnqlFormat {
    /// Header line, then one line per row.
    Csv = 0,
    /// An array of objects keyed by column name.
    Json = 1,
    /// Per-operator cost counters.
    CostJson = 2,
    /// The executed plan.
    Explain = 3,
}

/// Renders a result as text; `format` is a `PdnqlFormat` value.
///
/// # Safety
/// `res` is a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pdnql_result_format(
    res: *const PdnqlResult,
    format: u32,
    out: *mut *mut c_char,
) -> PdnqlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let r = &res.as_ref().ok_or_else(|| null("res"))?.out;
        *out = owned(match format {
            f if f == PdnqlFormat::Csv as u32 => r.result.to_csv(),
            f if f == PdnqlFormat::Json as u32 => r.result.to_json(),
            f if f == PdnqlFormat::CostJson as u32 => r.cost.to_json(),
            f if f == PdnqlFormat::Explain as u32 => r.explain.clone(),
            f => return Err(Fail(PdnqlStatus::InvalidArgument, format!("unknown format {f}"))),
        })?;
        Ok(())
    })
}

/// Garbles the circuit in `circuit_text`, evaluates it on the two parties'
/// integer inputs and writes the decoded output bits to `out_bits`, least
/// significant first.
///
/// # Safety
/// `circuit_text` is a nul-terminated string; `out_bits` and `out_width`
/// are writable.
#[no_mangle]
pub unsafe extern "C" fn pdnql_garble_eval(
    circuit_text: *const c_char,
    alice: u64,
    bob: u64,
    seed: u64,
    out_bits: *mut u64,
    out_width: *mut usize,
) -> PdnqlStatus {
    guard(|| {
        if out_bits.is_null() || out_width.is_null() {
            return Err(null("out_bits or out_width"));
        }
        let c = BooleanCircuit::parse(text(circuit_text, "circuit_text")?)?;
        if c.outputs.len() > 64 {
            return Err(Fail(PdnqlStatus::InvalidArgument, format!("{} outputs exceed 64 bits", c.outputs.len())));
        }
        let a = to_bits(alice, c.alice_inputs.len());
        let b = to_bits(bob, c.bob_inputs.len());
        let (g, t) = garble(&c, seed)?;
        let labels = select_input_labels(&t, &a, &b)?;
        let bits = decode(&t, &evaluate(&g, &labels)?)?;
        *out_bits = bits.iter().enumerate().fold(0, |acc, (i, bit)| acc | (u64::from(*bit) << i));
        *out_width = bits.len();
        Ok(())
    })
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` is null or came from this library and was not freed before.
#[no_mangle]
pub unsafe extern "C" fn pdnql_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
