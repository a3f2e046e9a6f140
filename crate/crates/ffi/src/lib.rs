//! C ABI over the `domino` crate.
//!
//! Objects are opaque handles created by `*_new`/`*_open` functions and
//! released with the matching `*_free`. Every fallible function returns a
//! [`DominoStatus`]; on failure a message for the calling thread is available
//! from [`domino_last_error`]. Complex samples are passed as arrays of
//! [`DominoComplex`] in layout order.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;
use std::sync::Arc;

use num_complex::Complex64;

use domino::cir_estimation::{build_ls_operator, CirEstimator, IdftEstimator, Ridge};
use domino::compensation::{CompensationConfig, Compensator};
use domino::respiration::{estimate_rate, Band};
use domino::trace::TraceFile;
use domino::{CsiFrame, Error, SubcarrierLayout, TapSet};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DominoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidLayout = 3,
    IllConditioned = 4,
    LengthMismatch = 5,
    EmptySignal = 6,
    DominantTapTooWeak = 7,
    TooShort = 8,
    /// The rate output still holds the best in-band guess.
    NoPeak = 9,
    Format = 10,
    Io = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DominoComplex {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for DominoComplex {
    fn from(v: Complex64) -> Self {
        Self { re: v.re, im: v.im }
    }
}

/// Subcarrier layout handle.
pub struct DominoLayout(Arc<SubcarrierLayout>);

/// Dominant-path compensator bound to one layout and tap window.
pub struct DominoCompensator(Compensator);

/// Trace file loaded in memory.
pub struct DominoTrace(TraceFile);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> DominoStatus {
    match e {
        Error::InvalidLayout(_) | Error::InvalidTapSet(_) | Error::LayoutMismatch | Error::RefNotActive(_) => {
            DominoStatus::InvalidLayout
        }
        Error::IllConditioned { .. } => DominoStatus::IllConditioned,
        Error::LengthMismatch { .. } => DominoStatus::LengthMismatch,
        Error::EmptySignal { .. } => DominoStatus::EmptySignal,
        Error::DominantTapTooWeak { .. } | Error::MissingZeroTap => DominoStatus::DominantTapTooWeak,
        Error::TooShort { .. } => DominoStatus::TooShort,
        Error::NoPeak { .. } => DominoStatus::NoPeak,
        Error::Format(_) => DominoStatus::Format,
        Error::Io(_) => DominoStatus::Io,
        _ => DominoStatus::InvalidArgument,
    }
}

fn fail(e: Error) -> DominoStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn null(what: &str) -> DominoStatus {
    set_error(format!("{what} is null"));
    DominoStatus::NullPointer
}

/// Runs `f`, turning a panic into [`DominoStatus::Panic`].
fn guard(f: impl FnOnce() -> DominoStatus) -> DominoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            DominoStatus::Panic
        }
    }
}

unsafe fn input<'a, T>(p: *const T, len: usize) -> Option<&'a [T]> {
    if p.is_null() {
        None
    } else {
        Some(slice::from_raw_parts(p, len))
    }
}

unsafe fn output<'a, T>(p: *mut T, len: usize) -> Option<&'a mut [T]> {
    if p.is_null() {
        None
    } else {
        Some(slice::from_raw_parts_mut(p, len))
    }
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn domino_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// The 256-bin, 234-subcarrier, 625 kHz layout.
#[no_mangle]
pub extern "C" fn domino_layout_desk() -> *mut DominoLayout {
    Box::into_raw(Box::new(DominoLayout(Arc::new(SubcarrierLayout::desk_default()))))
}

/// Layout from explicit active bin indices (FFT order, sorted, unique).
///
/// # Safety
/// `active` must point to `n_active` readable values and `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn domino_layout_new(
    n_fft: usize,
    active: *const usize,
    n_active: usize,
    delta_f_hz: f64,
    out: *mut *mut DominoLayout,
) -> DominoStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        let Some(active) = input(active, n_active) else { return null("active") };
        match SubcarrierLayout::new(n_fft, active.to_vec(), delta_f_hz) {
            Ok(l) => {
                *out = Box::into_raw(Box::new(DominoLayout(Arc::new(l))));
                DominoStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `layout` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn domino_layout_n_active(layout: *const DominoLayout) -> usize {
    layout.as_ref().map_or(0, |l| l.0.n_active())
}

/// # Safety
/// `layout` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn domino_layout_free(layout: *mut DominoLayout) {
    if !layout.is_null() {
        drop(Box::from_raw(layout));
    }
}

/// Compensator over taps `[-taps_before, taps_after]`. `use_idft` selects the
/// IDFT estimator instead of least squares; `ridge < 0` picks the ridge
/// automatically.
///
/// # Safety
/// `layout` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn domino_compensator_new(
    layout: *const DominoLayout,
    taps_before: usize,
    taps_after: usize,
    use_idft: bool,
    ridge: f64,
    out: *mut *mut DominoCompensator,
) -> DominoStatus {
    guard(|| {
        let Some(layout) = layout.as_ref() else { return null("layout") };
        if out.is_null() {
            return null("out");
        }
        let layout = Arc::clone(&layout.0);
        let tapset = match TapSet::centered(layout.n_fft(), taps_before, taps_after) {
            Ok(t) => Arc::new(t),
            Err(e) => return fail(e),
        };
        let est: Arc<dyn CirEstimator> = if use_idft {
            match IdftEstimator::new(layout, tapset) {
                Ok(e) => Arc::new(e),
                Err(e) => return fail(e),
            }
        } else {
            let ridge = if ridge < 0.0 { Ridge::Auto.resolve(&layout, &tapset) } else { ridge };
            match build_ls_operator(layout, tapset, ridge) {
                Ok(op) => Arc::new(op),
                Err(e) => return fail(e),
            }
        };
        *out = Box::into_raw(Box::new(DominoCompensator(Compensator::new(est, CompensationConfig::default()))));
        DominoStatus::Ok
    })
}

/// Number of taps written by the estimate and compensate calls.
///
/// # Safety
/// `comp` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn domino_compensator_n_taps(comp: *const DominoCompensator) -> usize {
    comp.as_ref().map_or(0, |c| c.0.estimator().tapset().len())
}

/// Signed delay (in taps) of each output position.
///
/// # Safety
/// `comp` must be a live handle and `out_delays` hold `n_taps` values.
#[no_mangle]
pub unsafe extern "C" fn domino_compensator_tap_delays(
    comp: *const DominoCompensator,
    out_delays: *mut i64,
    n_taps: usize,
) -> DominoStatus {
    guard(|| {
        let Some(c) = comp.as_ref() else { return null("comp") };
        let taps = c.0.estimator().tapset().signed_taps();
        if n_taps != taps.len() {
            return fail(Error::LengthMismatch { left: n_taps, right: taps.len() });
        }
        let Some(out) = output(out_delays, n_taps) else { return null("out_delays") };
        out.copy_from_slice(&taps);
        DominoStatus::Ok
    })
}

unsafe fn frame_from(comp: &DominoCompensator, csi: *const DominoComplex, n: usize) -> Result<CsiFrame, DominoStatus> {
    let layout = comp.0.estimator().layout();
    let Some(csi) = input(csi, n) else { return Err(null("csi")) };
    let values = csi.iter().map(|v| Complex64::new(v.re, v.im)).collect();
    CsiFrame::new(0.0, Arc::clone(layout), values).map_err(fail)
}

unsafe fn write_taps(taps: &[Complex64], out: *mut DominoComplex, n: usize) -> DominoStatus {
    if n != taps.len() {
        return fail(Error::LengthMismatch { left: n, right: taps.len() });
    }
    let Some(out) = output(out, n) else { return null("out_taps") };
    for (o, t) in out.iter_mut().zip(taps) {
        *o = (*t).into();
    }
    DominoStatus::Ok
}

/// Raw CIR estimate of one frame, without alignment or normalization.
///
/// # Safety
/// `csi` must hold `n_csi` values and `out_taps` room for `n_taps`.
#[no_mangle]
pub unsafe extern "C" fn domino_estimate_cir(
    comp: *const DominoCompensator,
    csi: *const DominoComplex,
    n_csi: usize,
    out_taps: *mut DominoComplex,
    n_taps: usize,
) -> DominoStatus {
    guard(|| {
        let Some(c) = comp.as_ref() else { return null("comp") };
        let frame = match frame_from(c, csi, n_csi) {
            Ok(f) => f,
            Err(s) => return s,
        };
        match c.0.estimator().estimate(&frame) {
            Ok(cir) => write_taps(&cir.taps, out_taps, n_taps),
            Err(e) => fail(e),
        }
    })
}

/// Aligns one frame on its dominant path and writes the normalized CIR (tap 0
/// equals exactly 1). `out_epsilon` may be NULL; otherwise it receives the
/// delay correction in taps.
///
/// # Safety
/// `csi` must hold `n_csi` values and `out_taps` room for `n_taps`.
#[no_mangle]
pub unsafe extern "C" fn domino_compensate(
    comp: *const DominoCompensator,
    csi: *const DominoComplex,
    n_csi: usize,
    out_taps: *mut DominoComplex,
    n_taps: usize,
    out_epsilon: *mut f64,
) -> DominoStatus {
    guard(|| {
        let Some(c) = comp.as_ref() else { return null("comp") };
        let frame = match frame_from(c, csi, n_csi) {
            Ok(f) => f,
            Err(s) => return s,
        };
        match c.0.compensate(&frame) {
            Ok(cf) => {
                let s = write_taps(&cf.cir_norm.taps, out_taps, n_taps);
                if s == DominoStatus::Ok && !out_epsilon.is_null() {
                    *out_epsilon = cf.alignment.epsilon_est;
                }
                s
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `comp` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn domino_compensator_free(comp: *mut DominoCompensator) {
    if !comp.is_null() {
        drop(Box::from_raw(comp));
    }
}

/// Breathing rate of a real series sampled at `fs_hz`, searched in
/// `[lo_hz, hi_hz]`. On [`DominoStatus::NoPeak`] `out_bpm` still receives the
/// best guess and `out_confidence` the peak ratio. `out_confidence` may be
/// NULL.
///
/// # Safety
/// `signal` must hold `len` values; `out_bpm` must be writable.
#[no_mangle]
pub unsafe extern "C" fn domino_estimate_rate(
    signal: *const f64,
    len: usize,
    fs_hz: f64,
    lo_hz: f64,
    hi_hz: f64,
    out_bpm: *mut f64,
    out_confidence: *mut f64,
) -> DominoStatus {
    guard(|| {
        let Some(signal) = input(signal, len) else { return null("signal") };
        if out_bpm.is_null() {
            return null("out_bpm");
        }
        let band = match Band::new(lo_hz, hi_hz) {
            Ok(b) => b,
            Err(e) => return fail(e),
        };
        let (bpm, conf, status) = match estimate_rate(signal, fs_hz, band) {
            Ok(r) => (r.bpm, r.confidence, DominoStatus::Ok),
            Err(Error::NoPeak { ratio, bpm }) => {
                let s = fail(Error::NoPeak { ratio, bpm });
                (bpm, ratio, s)
            }
            Err(e) => return fail(e),
        };
        *out_bpm = bpm;
        if !out_confidence.is_null() {
            *out_confidence = conf;
        }
        status
    })
}

/// # Safety
/// `path` must be a NUL-terminated UTF-8 string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn domino_trace_open(path: *const c_char, out: *mut *mut DominoTrace) -> DominoStatus {
    guard(|| {
        if path.is_null() {
            return null("path");
        }
        if out.is_null() {
            return null("out");
        }
        let Ok(p) = CStr::from_ptr(path).to_str() else {
            set_error("path is not valid UTF-8".into());
            return DominoStatus::InvalidArgument;
        };
        match TraceFile::read_file(Path::new(p)) {
            Ok(t) => {
                *out = Box::into_raw(Box::new(DominoTrace(t)));
                DominoStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `trace` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn domino_trace_n_antennas(trace: *const DominoTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.0.n_antennas())
}

/// # Safety
/// `trace` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn domino_trace_n_frames(trace: *const DominoTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.0.n_frames())
}

/// New handle for the trace's layout; free it with [`domino_layout_free`].
///
/// # Safety
/// `trace` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn domino_trace_layout(trace: *const DominoTrace) -> *mut DominoLayout {
    trace.as_ref().map_or(ptr::null_mut(), |t| Box::into_raw(Box::new(DominoLayout(Arc::clone(&t.0.layout)))))
}

/// Copies one frame. `out_timestamp` may be NULL.
///
/// # Safety
/// `trace` must be a live handle and `out_values` hold `n_values` entries.
#[no_mangle]
pub unsafe extern "C" fn domino_trace_frame(
    trace: *const DominoTrace,
    antenna: usize,
    frame: usize,
    out_values: *mut DominoComplex,
    n_values: usize,
    out_timestamp: *mut f64,
) -> DominoStatus {
    guard(|| {
        let Some(t) = trace.as_ref() else { return null("trace") };
        let Some(f) = t.0.streams.get(antenna).and_then(|s| s.get(frame)) else {
            set_error(format!("frame {frame} of antenna {antenna} out of range"));
            return DominoStatus::InvalidArgument;
        };
        if n_values != f.values.len() {
            return fail(Error::LengthMismatch { left: n_values, right: f.values.len() });
        }
        let Some(out) = output(out_values, n_values) else { return null("out_values") };
        for (o, v) in out.iter_mut().zip(&f.values) {
            *o = (*v).into();
        }
        if !out_timestamp.is_null() {
            *out_timestamp = f.timestamp;
        }
        DominoStatus::Ok
    })
}

/// # Safety
/// `trace` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn domino_trace_free(trace: *mut DominoTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}
