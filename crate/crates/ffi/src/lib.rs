//! C interface to the OTFS simulator.
//!
//! Configurations are opaque handles created with `otfs_config_*` and released
//! with `otfs_config_free`. Every fallible call returns an `OtfsStatus`;
//! on failure a description is available from `otfs_last_error_message` on
//! the same thread until the next failing call.
//!
//! Complex arrays are interleaved `re, im` doubles. Matrices are column-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use num_complex::Complex64;

use otfs_core::matrix::CMatrix;
use otfs_core::sim::{run_detector, write_results, DetectorKind, LinkRealization, Runner, SimConfig};
use otfs_core::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OtfsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    Numerical = 5,
    Panic = 6,
}

/// Detector selector for `otfs_detect`.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OtfsDetector {
    Lmmse = 0,
    Amp = 1,
    Uamp = 2,
    UampMfic = 3,
    Turbo = 4,
    Iw = 5,
}

impl From<OtfsDetector> for DetectorKind {
    fn from(d: OtfsDetector) -> Self {
        match d {
            OtfsDetector::Lmmse => DetectorKind::Lmmse,
            OtfsDetector::Amp => DetectorKind::Amp,
            OtfsDetector::Uamp => DetectorKind::Uamp,
            OtfsDetector::UampMfic => DetectorKind::UampMfic,
            OtfsDetector::Turbo => DetectorKind::Turbo,
            OtfsDetector::Iw => DetectorKind::Iw,
        }
    }
}

/// Opaque simulation configuration.
pub struct OtfsConfig {
    inner: SimConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> OtfsStatus {
    match e {
        Error::Config(_) | Error::InfeasibleConfig(_) | Error::InvalidParameter(_) => OtfsStatus::Config,
        Error::Io { .. } | Error::Csv { .. } => OtfsStatus::Io,
        Error::Numerical(_) => OtfsStatus::Numerical,
        _ => OtfsStatus::InvalidArgument,
    }
}

fn fail(status: OtfsStatus, msg: impl Into<String>) -> OtfsStatus {
    set_last_error(msg.into());
    status
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), OtfsStatus>) -> OtfsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OtfsStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(OtfsStatus::Panic, format!("panic: {msg}"))
        }
    }
}

fn core_err(e: Error) -> OtfsStatus {
    fail(status_of(&e), e.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, OtfsStatus> {
    if p.is_null() {
        return Err(fail(OtfsStatus::NullPointer, format!("`{name}` is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(OtfsStatus::InvalidArgument, format!("`{name}` is not valid UTF-8")))
}

unsafe fn config_ref<'a>(cfg: *const OtfsConfig) -> Result<&'a OtfsConfig, OtfsStatus> {
    cfg.as_ref().ok_or_else(|| fail(OtfsStatus::NullPointer, "configuration handle is NULL"))
}

unsafe fn complex_slice(p: *const f64, len: usize, name: &str) -> Result<Vec<Complex64>, OtfsStatus> {
    if p.is_null() {
        return Err(fail(OtfsStatus::NullPointer, format!("`{name}` is NULL")));
    }
    let raw = std::slice::from_raw_parts(p, 2 * len);
    Ok(raw.chunks_exact(2).map(|z| Complex64::new(z[0], z[1])).collect())
}

fn threads_arg(threads: usize) -> Option<usize> {
    (threads > 0).then_some(threads)
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn otfs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn otfs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a configuration holding the built-in defaults.
#[no_mangle]
pub extern "C" fn otfs_config_new_default() -> *mut OtfsConfig {
    Box::into_raw(Box::new(OtfsConfig {
        inner: SimConfig::default(),
    }))
}

/// Loads a TOML configuration file into `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn otfs_config_from_file(path: *const c_char, out: *mut *mut OtfsConfig) -> OtfsStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(OtfsStatus::NullPointer, "`out` is NULL"));
        }
        let path = str_arg(path, "path")?;
        let inner = SimConfig::load(Path::new(path)).map_err(core_err)?;
        *out = Box::into_raw(Box::new(OtfsConfig { inner }));
        Ok(())
    })
}

/// Parses a TOML configuration document into `*out`.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn otfs_config_from_toml(text: *const c_char, out: *mut *mut OtfsConfig) -> OtfsStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(OtfsStatus::NullPointer, "`out` is NULL"));
        }
        let inner = SimConfig::from_toml_str(str_arg(text, "text")?).map_err(core_err)?;
        *out = Box::into_raw(Box::new(OtfsConfig { inner }));
        Ok(())
    })
}

/// Overrides one key, e.g. `("snr_grid_db", "8,10,12")` or `("frame.m", "16")`.
/// The configuration is unchanged on failure.
///
/// # Safety
/// `cfg` must come from this library; `key` and `value` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn otfs_config_set(cfg: *mut OtfsConfig, key: *const c_char, value: *const c_char) -> OtfsStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| fail(OtfsStatus::NullPointer, "configuration handle is NULL"))?;
        let key = str_arg(key, "key")?;
        let value = str_arg(value, "value")?;
        cfg.inner.set(key, value).map_err(core_err)
    })
}

/// Number of delay-Doppler symbols per frame (`M N`), 0 for a NULL handle.
///
/// # Safety
/// `cfg` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn otfs_config_frame_len(cfg: *const OtfsConfig) -> usize {
    cfg.as_ref().map_or(0, |c| c.inner.frame.len())
}

/// Number of detectors selected by the configuration, 0 for a NULL handle.
///
/// # Safety
/// `cfg` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn otfs_config_detector_count(cfg: *const OtfsConfig) -> usize {
    cfg.as_ref().map_or(0, |c| c.inner.detectors.len())
}

/// Releases a configuration. NULL is ignored.
///
/// # Safety
/// `cfg` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn otfs_config_free(cfg: *mut OtfsConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Detects one frame from `y = H x + w`.
///
/// `h` holds the `n x n` delay-Doppler channel (`n = otfs_config_frame_len`),
/// `y` the `n` received samples, both interleaved. Constellation indices are
/// written to `out_indices[0..n]`.
///
/// # Safety
/// `h` must point to `2 n n` doubles, `y` to `2 n` doubles and `out_indices`
/// to `n` writable entries.
#[no_mangle]
pub unsafe extern "C" fn otfs_detect(
    cfg: *const OtfsConfig,
    detector: OtfsDetector,
    h: *const f64,
    y: *const f64,
    gamma: f64,
    out_indices: *mut usize,
) -> OtfsStatus {
    guard(|| {
        let cfg = &config_ref(cfg)?.inner;
        if out_indices.is_null() {
            return Err(fail(OtfsStatus::NullPointer, "`out_indices` is NULL"));
        }
        let n = cfg.frame.len();
        let h_dd = CMatrix::from_col_major(n, n, complex_slice(h, n * n, "h")?).map_err(core_err)?;
        let link = LinkRealization {
            bits: Vec::new(),
            symbols: Vec::new(),
            h_dd,
            y: complex_slice(y, n, "y")?,
            gamma,
        };
        let report = run_detector(cfg, detector.into(), &link, None, false).map_err(core_err)?;
        std::slice::from_raw_parts_mut(out_indices, n).copy_from_slice(&report.decided_indices);
        Ok(())
    })
}

/// Simulates one operating point and writes the BER of each configured
/// detector, in configuration order, to `out_ber[0..len]`.
/// `threads = 0` uses every available core.
///
/// # Safety
/// `out_ber` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn otfs_run_point(
    cfg: *const OtfsConfig,
    snr_db: f64,
    velocity_mps: f64,
    threads: usize,
    out_ber: *mut f64,
    len: usize,
) -> OtfsStatus {
    guard(|| {
        let cfg = &config_ref(cfg)?.inner;
        if out_ber.is_null() {
            return Err(fail(OtfsStatus::NullPointer, "`out_ber` is NULL"));
        }
        if len != cfg.detectors.len() {
            return Err(fail(
                OtfsStatus::InvalidArgument,
                format!("`len` is {len} but {} detectors are configured", cfg.detectors.len()),
            ));
        }
        if !snr_db.is_finite() || !(velocity_mps.is_finite() && velocity_mps >= 0.0) {
            return Err(fail(
                OtfsStatus::InvalidArgument,
                format!("invalid operating point: snr {snr_db}, velocity {velocity_mps}"),
            ));
        }
        let runner = Runner::new(cfg, threads_arg(threads)).map_err(core_err)?;
        let out = runner.run_point(&cfg.detectors, snr_db, velocity_mps, false).map_err(core_err)?;
        let dst = std::slice::from_raw_parts_mut(out_ber, len);
        for (slot, d) in dst.iter_mut().zip(&cfg.detectors) {
            *slot = out.records.iter().find(|r| r.detector == *d).map_or(f64::NAN, |r| r.ber);
        }
        Ok(())
    })
}

/// Runs the BER-versus-SNR sweep and writes the results CSV (plus its
/// `.meta.toml` sidecar) to `path`. `threads = 0` uses every available core.
///
/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn otfs_sweep_snr_csv(cfg: *const OtfsConfig, path: *const c_char, threads: usize) -> OtfsStatus {
    guard(|| {
        let cfg = &config_ref(cfg)?.inner;
        let path = str_arg(path, "path")?;
        let runner = Runner::new(cfg, threads_arg(threads)).map_err(core_err)?;
        let records = runner.sweep_snr().map_err(core_err)?;
        write_results(&records, cfg, Path::new(path)).map_err(core_err)
    })
}
