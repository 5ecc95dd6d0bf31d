//! C ABI for the tqs simulator.
//!
//! Configs and batch results live behind opaque handles that the caller frees
//! with the matching `*_free` function. Every fallible call returns a
//! [`TqsStatus`]; the message for the most recent failure on the calling
//! thread is available from [`tqs_last_error`].
//!
//! Buffers follow one rule: the caller passes a pointer and a capacity, the
//! library writes the required length to `*len`, and returns
//! `TQS_STATUS_BUFFER_TOO_SMALL` without touching the buffer when the capacity
//! is short. A null buffer with capacity 0 is a valid length query.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use tqs_core::analytics::{
    compute_n0, deviation_origins, is_black_region, DEFAULT_BLACK_REGION_TOL,
};
use tqs_core::cli::config::{parse_config, RunConfig, APPENDIX_CFG};
use tqs_core::histogram::accumulate;
use tqs_core::sweep::{run_batch, BatchResult};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TqsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    InvalidArgument = 4,
    BufferTooSmall = 5,
    NoImpacts = 6,
    Panic = 7,
}

/// Opaque validated configuration.
pub struct TqsConfig {
    inner: RunConfig,
}

/// Opaque result of one batch run.
pub struct TqsBatch {
    result: BatchResult,
}

/// Particles that did not reach the detector, by cause.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TqsFailures {
    pub max_steps: u64,
    pub absorbed: u64,
    pub non_finite: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: TqsStatus, msg: impl Into<String>) -> TqsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
    status
}

fn guard(f: impl FnOnce() -> TqsStatus) -> TqsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(TqsStatus::Panic, "internal panic"),
    }
}

/// Copies `src` into `(buf, cap)` under the buffer rule.
unsafe fn fill<T: Copy>(src: &[T], buf: *mut T, cap: usize, len: *mut usize) -> TqsStatus {
    if len.is_null() {
        return fail(TqsStatus::NullPointer, "len is null");
    }
    *len = src.len();
    if src.is_empty() {
        return TqsStatus::Ok;
    }
    if cap < src.len() {
        return fail(
            TqsStatus::BufferTooSmall,
            format!("need {} elements", src.len()),
        );
    }
    if buf.is_null() {
        return fail(TqsStatus::NullPointer, "buffer is null");
    }
    std::ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    TqsStatus::Ok
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tqs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread, NUL-terminated, into `buf`.
/// Returns the message length without the terminator; a result `>= cap`
/// means it was truncated.
///
/// # Safety
/// `buf` must be null or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn tqs_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

fn store_config(cfg: RunConfig, out: *mut *mut TqsConfig) -> TqsStatus {
    unsafe { *out = Box::into_raw(Box::new(TqsConfig { inner: cfg })) };
    TqsStatus::Ok
}

/// The bundled reference configuration.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn tqs_config_appendix(out: *mut *mut TqsConfig) -> TqsStatus {
    tqs_config_parse(APPENDIX_CFG.as_ptr().cast(), APPENDIX_CFG.len(), out)
}

/// Parses `key = value` config text of `len` bytes (no terminator needed).
///
/// # Safety
/// `text` must point to `len` readable bytes and `out` to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn tqs_config_parse(
    text: *const c_char,
    len: usize,
    out: *mut *mut TqsConfig,
) -> TqsStatus {
    guard(|| {
        if text.is_null() || out.is_null() {
            return fail(TqsStatus::NullPointer, "text or out is null");
        }
        let bytes = std::slice::from_raw_parts(text.cast::<u8>(), len);
        let Ok(s) = std::str::from_utf8(bytes) else {
            return fail(TqsStatus::InvalidUtf8, "config text is not UTF-8");
        };
        match parse_config(s) {
            Ok(cfg) => store_config(cfg, out),
            Err(e) => fail(TqsStatus::InvalidConfig, e.to_string()),
        }
    })
}

/// Like [`tqs_config_parse`] for a NUL-terminated string.
///
/// # Safety
/// `text` must be a valid C string and `out` a handle slot.
#[no_mangle]
pub unsafe extern "C" fn tqs_config_parse_cstr(
    text: *const c_char,
    out: *mut *mut TqsConfig,
) -> TqsStatus {
    if text.is_null() {
        return fail(TqsStatus::NullPointer, "text is null");
    }
    let bytes = CStr::from_ptr(text).to_bytes();
    tqs_config_parse(bytes.as_ptr().cast(), bytes.len(), out)
}

/// # Safety
/// `cfg` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn tqs_config_free(cfg: *mut TqsConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Number of particles the config emits.
///
/// # Safety
/// `cfg` must be a live config handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tqs_config_particle_count(
    cfg: *const TqsConfig,
    out: *mut u64,
) -> TqsStatus {
    if cfg.is_null() || out.is_null() {
        return fail(TqsStatus::NullPointer, "cfg or out is null");
    }
    guard(|| {
        *out = tqs_core::EmissionStream::new(&(*cfg).inner.sim).total();
        TqsStatus::Ok
    })
}

/// Runs every particle of `cfg`. `threads` 0 uses all cores.
///
/// # Safety
/// `cfg` must be a live config handle and `out` a handle slot.
#[no_mangle]
pub unsafe extern "C" fn tqs_run_batch(
    cfg: *const TqsConfig,
    threads: u32,
    out: *mut *mut TqsBatch,
) -> TqsStatus {
    if cfg.is_null() || out.is_null() {
        return fail(TqsStatus::NullPointer, "cfg or out is null");
    }
    guard(|| {
        let result = run_batch(&(*cfg).inner.sim, threads as usize);
        *out = Box::into_raw(Box::new(TqsBatch { result }));
        TqsStatus::Ok
    })
}

/// # Safety
/// `batch` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn tqs_batch_free(batch: *mut TqsBatch) {
    if !batch.is_null() {
        drop(Box::from_raw(batch));
    }
}

/// Number of recorded impacts; 0 for a null handle.
///
/// # Safety
/// `batch` must be null or a live batch handle.
#[no_mangle]
pub unsafe extern "C" fn tqs_batch_len(batch: *const TqsBatch) -> usize {
    batch.as_ref().map_or(0, |b| b.result.impacts.len())
}

/// # Safety
/// `batch` must be a live batch handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tqs_batch_failures(
    batch: *const TqsBatch,
    out: *mut TqsFailures,
) -> TqsStatus {
    let (Some(b), false) = (batch.as_ref(), out.is_null()) else {
        return fail(TqsStatus::NullPointer, "batch or out is null");
    };
    let f = b.result.failures;
    *out = TqsFailures {
        max_steps: f.max_steps,
        absorbed: f.absorbed,
        non_finite: f.non_finite,
    };
    TqsStatus::Ok
}

/// Detector ordinates in emission order. `indices` may be null; otherwise it
/// receives the matching emission indices and must have the same capacity.
///
/// # Safety
/// `y` and `indices` must be null or hold `cap` elements; `len` writable.
#[no_mangle]
pub unsafe extern "C" fn tqs_batch_impacts(
    batch: *const TqsBatch,
    y: *mut f64,
    indices: *mut u64,
    cap: usize,
    len: *mut usize,
) -> TqsStatus {
    let Some(b) = batch.as_ref() else {
        return fail(TqsStatus::NullPointer, "batch is null");
    };
    let ys: Vec<f64> = b.result.impacts.iter().map(|r| r.y_impact).collect();
    let status = fill(&ys, y, cap, len);
    if status != TqsStatus::Ok || indices.is_null() {
        return status;
    }
    let idx: Vec<u64> = b.result.impacts.iter().map(|r| r.emission_index).collect();
    fill(&idx, indices, cap, len)
}

/// Bins the impacts with width `bin_width` on a grid through `origin`.
/// `first_edge` receives the lower edge of `counts[0]`.
///
/// # Safety
/// `counts` must be null or hold `cap` elements; `len` and `first_edge`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn tqs_batch_histogram(
    batch: *const TqsBatch,
    bin_width: f64,
    origin: f64,
    counts: *mut u64,
    cap: usize,
    len: *mut usize,
    first_edge: *mut f64,
) -> TqsStatus {
    let Some(b) = batch.as_ref() else {
        return fail(TqsStatus::NullPointer, "batch is null");
    };
    if first_edge.is_null() {
        return fail(TqsStatus::NullPointer, "first_edge is null");
    }
    if !(bin_width > 0.0 && bin_width.is_finite() && origin.is_finite()) {
        return fail(
            TqsStatus::InvalidArgument,
            "bin_width must be positive and origin finite",
        );
    }
    if b.result.impacts.is_empty() {
        return fail(TqsStatus::NoImpacts, "batch has no impacts");
    }
    guard(|| {
        let h = accumulate(&b.result.impacts, bin_width, origin);
        *first_edge = h.bin_edges(0).0;
        fill(h.counts(), counts, cap, len)
    })
}

/// `floor(d / (v0 tau))` with integer snapping; 0 for invalid input.
#[no_mangle]
pub extern "C" fn tqs_compute_n0(d: f64, v0: f64, tau: f64) -> u64 {
    if !(d >= 0.0 && v0 > 0.0 && tau > 0.0) || !(d / (v0 * tau)).is_finite() {
        return 0;
    }
    compute_n0(d, v0, tau)
}

/// True when `d / (v0 tau)` is an integer of at least one.
#[no_mangle]
pub extern "C" fn tqs_is_black_region(d: f64, v0: f64, tau: f64) -> bool {
    is_black_region(d, v0, tau, DEFAULT_BLACK_REGION_TOL)
}

/// Fork heights `a_i` and angles `phi_i` for `i = -i_max..-1, 1..i_max`
/// (`2 * i_max` values each).
///
/// # Safety
/// `a` and `phi` must be null or hold `cap` elements; `len` writable.
#[no_mangle]
pub unsafe extern "C" fn tqs_deviation_origins(
    d: f64,
    v0: f64,
    tau: f64,
    i_max: u32,
    a: *mut f64,
    phi: *mut f64,
    cap: usize,
    len: *mut usize,
) -> TqsStatus {
    if !(d > 0.0 && v0 > 0.0 && tau > 0.0 && d.is_finite() && v0.is_finite() && tau.is_finite()) {
        return fail(
            TqsStatus::InvalidArgument,
            "d, v0 and tau must be positive and finite",
        );
    }
    guard(|| {
        let o = deviation_origins(d, v0, tau, i_max);
        let s = fill(&o.a, a, cap, len);
        if s != TqsStatus::Ok {
            return s;
        }
        fill(&o.phi, phi, cap, len)
    })
}
