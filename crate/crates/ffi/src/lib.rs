//! C ABI over the kaemsim pipeline.
//!
//! Every entry point returns a [`KsStatus`]. Results live behind an opaque
//! [`KsRun`] handle; strings and arrays it hands out stay valid until the
//! handle is freed with [`ks_run_free`]. After a failing call,
//! [`ks_last_error_message`] describes the failure on the calling thread.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use kaemsim::cli::{check_source, run_source, EmitSet, OrderArg, RunConfig};
use kaemsim::dmf::DeviceConfig;
use kaemsim::sim::Tolerances;
use kaemsim::Error;

/// Outcome of a call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KsStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    SyntaxError = 3,
    RuntimeError = 4,
    ProtocolError = 5,
    DeviceError = 6,
    InvalidConfig = 7,
    OutOfRange = 8,
    BufferTooSmall = 9,
    Internal = 10,
}

/// Settings for [`ks_run_source`]. Obtain defaults from
/// [`ks_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct KsOptions {
    pub lna: bool,
    pub rtol: f64,
    pub atol: f64,
    pub points: u32,
    pub device: bool,
    pub seed: u64,
}

/// Opaque result of a run.
pub struct KsRun {
    output: kaemsim::cli::RunOutput,
    species_names: Vec<CString>,
    artifact_names: Vec<CString>,
    artifact_contents: Vec<CString>,
}

struct LastError {
    message: CString,
    line: u32,
    column: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<LastError>> = const { RefCell::new(None) };
}

fn set_error(message: &str, location: Option<(u32, u32)>) {
    let message = CString::new(message.replace('\0', " ")).unwrap_or_default();
    let (line, column) = location.unwrap_or((0, 0));
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(LastError { message, line, column }));
}

fn fail(status: KsStatus, message: &str) -> KsStatus {
    set_error(message, None);
    status
}

fn status_of(e: &Error) -> KsStatus {
    match e {
        Error::Syntax(_) => KsStatus::SyntaxError,
        Error::Eval(_) => KsStatus::RuntimeError,
        Error::Protocol(_) => KsStatus::ProtocolError,
        Error::Device(_) => KsStatus::DeviceError,
        Error::Config(_) | Error::Score(_) | Error::Json(_) => KsStatus::InvalidConfig,
        Error::Io(_) => KsStatus::Internal,
    }
}

fn from_error(e: Error) -> KsStatus {
    set_error(&e.message(), e.location());
    status_of(&e)
}

/// Runs `body` with panics turned into [`KsStatus::Internal`].
fn guard(body: impl FnOnce() -> KsStatus) -> KsStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(s) => {
            if s == KsStatus::Ok {
                LAST_ERROR.with(|e| *e.borrow_mut() = None);
            }
            s
        }
        Err(_) => fail(KsStatus::Internal, "internal error (panic)"),
    }
}

unsafe fn source_str<'a>(source: *const c_char) -> Result<&'a str, KsStatus> {
    if source.is_null() {
        return Err(fail(KsStatus::NullArgument, "source is null"));
    }
    CStr::from_ptr(source).to_str().map_err(|_| fail(KsStatus::InvalidUtf8, "source is not valid UTF-8"))
}

fn c_string(s: &str) -> CString {
    CString::new(s.replace('\0', " ")).unwrap_or_default()
}

/// Default options: no noise, tolerances 1e-6/1e-8, 1000 points, no device.
#[no_mangle]
pub extern "C" fn ks_options_default() -> KsOptions {
    let t = Tolerances::default();
    KsOptions { lna: false, rtol: t.rtol, atol: t.atol, points: t.points as u32, device: false, seed: 0 }
}

/// Evaluates and simulates `source`. On success `*out` receives a handle
/// to free with [`ks_run_free`]. `options` may be null for defaults.
#[no_mangle]
pub unsafe extern "C" fn ks_run_source(
    source: *const c_char,
    options: *const KsOptions,
    out: *mut *mut KsRun,
) -> KsStatus {
    guard(|| {
        if out.is_null() {
            return fail(KsStatus::NullArgument, "out is null");
        }
        *out = ptr::null_mut();
        let src = match source_str(source) {
            Ok(s) => s,
            Err(s) => return s,
        };
        let o = if options.is_null() { ks_options_default() } else { *options };
        if !(o.rtol > 0.0 && o.atol > 0.0) || o.points < 2 {
            return fail(KsStatus::InvalidConfig, "tolerances must be positive and points at least 2");
        }
        let config = RunConfig {
            lna: o.lna,
            tolerances: Tolerances { rtol: o.rtol, atol: o.atol, points: o.points as usize, events: Vec::new() },
            binomial_split: false,
            device: o.device.then(|| DeviceConfig { seed: o.seed, ..DeviceConfig::default() }),
            emit: EmitSet { csv: true, plot: false, score: true, dot: true, trace: true, odes: false },
            order: OrderArg::Creation,
        };
        match run_source(src, &config) {
            Ok(output) => {
                let run = KsRun {
                    species_names: output.trace.network.species.iter().map(|s| c_string(&s.display_name)).collect(),
                    artifact_names: output.artifacts.iter().map(|a| c_string(&a.name)).collect(),
                    artifact_contents: output.artifacts.iter().map(|a| c_string(&a.contents)).collect(),
                    output,
                };
                *out = Box::into_raw(Box::new(run));
                KsStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Parses and statically checks `source` without simulating. Either
/// count pointer may be null.
#[no_mangle]
pub unsafe extern "C" fn ks_check_source(
    source: *const c_char,
    species: *mut usize,
    reactions: *mut usize,
) -> KsStatus {
    guard(|| {
        let src = match source_str(source) {
            Ok(s) => s,
            Err(s) => return s,
        };
        match check_source(src) {
            Ok((summary, _)) => {
                if !species.is_null() {
                    *species = summary.species;
                }
                if !reactions.is_null() {
                    *reactions = summary.reactions;
                }
                KsStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Releases a handle. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ks_run_free(run: *mut KsRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

unsafe fn handle<'a>(run: *const KsRun) -> Option<&'a KsRun> {
    run.as_ref()
}

#[no_mangle]
pub unsafe extern "C" fn ks_run_species_count(run: *const KsRun) -> usize {
    handle(run).map_or(0, |r| r.output.trace.network.species.len())
}

#[no_mangle]
pub unsafe extern "C" fn ks_run_reaction_count(run: *const KsRun) -> usize {
    handle(run).map_or(0, |r| r.output.trace.network.reactions.len())
}

/// Display name of species `index`, or null when out of range.
#[no_mangle]
pub unsafe extern "C" fn ks_run_species_name(run: *const KsRun, index: usize) -> *const c_char {
    handle(run).and_then(|r| r.species_names.get(index)).map_or(ptr::null(), |s| s.as_ptr())
}

/// Number of completed simulations.
#[no_mangle]
pub unsafe extern "C" fn ks_run_timecourse_count(run: *const KsRun) -> usize {
    handle(run).map_or(0, |r| r.output.trace.runs.len())
}

/// Output points of simulation `tc`.
#[no_mangle]
pub unsafe extern "C" fn ks_run_point_count(run: *const KsRun, tc: usize) -> usize {
    handle(run).and_then(|r| r.output.trace.runs.get(tc)).map_or(0, |t| t.len())
}

unsafe fn copy_out(values: &[f64], buffer: *mut f64, len: usize) -> KsStatus {
    if buffer.is_null() {
        return fail(KsStatus::NullArgument, "buffer is null");
    }
    if len < values.len() {
        return fail(KsStatus::BufferTooSmall, &format!("buffer holds {len} values, {} needed", values.len()));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), buffer, values.len());
    KsStatus::Ok
}

/// Copies the time grid of simulation `tc` into `buffer`.
#[no_mangle]
pub unsafe extern "C" fn ks_run_copy_times(run: *const KsRun, tc: usize, buffer: *mut f64, len: usize) -> KsStatus {
    guard(|| match handle(run).and_then(|r| r.output.trace.runs.get(tc)) {
        Some(t) => copy_out(&t.times, buffer, len),
        None => fail(KsStatus::OutOfRange, "no such simulation"),
    })
}

/// Copies the mean concentration of network species `species` over
/// simulation `tc`. Species absent from that simulation's sample yield
/// [`KsStatus::OutOfRange`].
#[no_mangle]
pub unsafe extern "C" fn ks_run_copy_means(
    run: *const KsRun,
    tc: usize,
    species: usize,
    buffer: *mut f64,
    len: usize,
) -> KsStatus {
    guard(|| {
        let Some(t) = handle(run).and_then(|r| r.output.trace.runs.get(tc)) else {
            return fail(KsStatus::OutOfRange, "no such simulation");
        };
        match t.mean_series(kaemsim::crn::SpeciesId(species as u32)) {
            Some(v) => copy_out(&v, buffer, len),
            None => fail(KsStatus::OutOfRange, "species not simulated in this run"),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn ks_run_artifact_count(run: *const KsRun) -> usize {
    handle(run).map_or(0, |r| r.artifact_names.len())
}

/// File name of artifact `index` (e.g. `run1.csv`), or null.
#[no_mangle]
pub unsafe extern "C" fn ks_run_artifact_name(run: *const KsRun, index: usize) -> *const c_char {
    handle(run).and_then(|r| r.artifact_names.get(index)).map_or(ptr::null(), |s| s.as_ptr())
}

/// Contents of artifact `index`, or null.
#[no_mangle]
pub unsafe extern "C" fn ks_run_artifact_contents(run: *const KsRun, index: usize) -> *const c_char {
    handle(run).and_then(|r| r.artifact_contents.get(index)).map_or(ptr::null(), |s| s.as_ptr())
}

/// Frames in the device trace; zero when device mode was off.
#[no_mangle]
pub unsafe extern "C" fn ks_run_device_frame_count(run: *const KsRun) -> usize {
    handle(run).and_then(|r| r.output.frames.as_ref()).map_or(0, Vec::len)
}

/// Message of the last failure on this thread, or null. Valid until the
/// next call on this thread.
#[no_mangle]
pub extern "C" fn ks_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |e| e.message.as_ptr()))
}

/// Source line of the last failure, or 0 when it has none.
#[no_mangle]
pub extern "C" fn ks_last_error_line() -> u32 {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |e| e.line))
}

/// Source column of the last failure, or 0 when it has none.
#[no_mangle]
pub extern "C" fn ks_last_error_column() -> u32 {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |e| e.column))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ks_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
