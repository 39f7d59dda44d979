use std::ffi::{CStr, CString};
use std::ptr;

use otfs_ffi::*;

fn last_error() -> String {
    let p = otfs_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn small_config() -> *mut OtfsConfig {
    let cfg = otfs_config_new_default();
    for (k, v) in [
        ("channel.paths", "2"),
        ("channel.l_max", "2"),
        ("frame.m", "4"),
        ("frame.n", "2"),
        ("frame.constellation", "qpsk"),
        ("min_frames", "4"),
        ("min_bit_errors", "1"),
        ("max_frames", "8"),
        ("batch_frames", "4"),
        ("n_iter", "4"),
        ("detectors", "lmmse,uamp-mfic"),
        ("snr_grid_db", "10,20"),
    ] {
        let (k, v) = (CString::new(k).unwrap(), CString::new(v).unwrap());
        assert_eq!(unsafe { otfs_config_set(cfg, k.as_ptr(), v.as_ptr()) }, OtfsStatus::Ok, "{}", last_error());
    }
    cfg
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(otfs_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn unknown_key_is_a_config_error() {
    let cfg = otfs_config_new_default();
    let key = CString::new("no_such_key").unwrap();
    let value = CString::new("1").unwrap();
    let status = unsafe { otfs_config_set(cfg, key.as_ptr(), value.as_ptr()) };
    assert_eq!(status, OtfsStatus::Config);
    assert!(last_error().contains("no_such_key"));
    unsafe { otfs_config_free(cfg) };
}

#[test]
fn null_arguments_are_reported() {
    let key = CString::new("n_iter").unwrap();
    assert_eq!(unsafe { otfs_config_set(ptr::null_mut(), key.as_ptr(), key.as_ptr()) }, OtfsStatus::NullPointer);
    assert_eq!(unsafe { otfs_config_from_toml(ptr::null(), ptr::null_mut()) }, OtfsStatus::NullPointer);
    assert_eq!(unsafe { otfs_config_frame_len(ptr::null()) }, 0);
    unsafe { otfs_config_free(ptr::null_mut()) };
}

#[test]
fn toml_and_file_constructors() {
    let text = CString::new("master_seed = 9\n[frame]\nm = 8\nn = 4\ndelta_f = 15000.0\nf_c = 4e9\nconstellation = \"bpsk\"\n").unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { otfs_config_from_toml(text.as_ptr(), &mut cfg) }, OtfsStatus::Ok);
    assert_eq!(unsafe { otfs_config_frame_len(cfg) }, 32);
    assert_eq!(unsafe { otfs_config_detector_count(cfg) }, 6);
    unsafe { otfs_config_free(cfg) };

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.toml");
    std::fs::write(&path, text.to_str().unwrap()).unwrap();
    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { otfs_config_from_file(c_path.as_ptr(), &mut cfg) }, OtfsStatus::Ok);
    assert_eq!(unsafe { otfs_config_frame_len(cfg) }, 32);
    unsafe { otfs_config_free(cfg) };

    let missing = CString::new(dir.path().join("missing.toml").to_str().unwrap()).unwrap();
    let mut cfg = ptr::null_mut();
    assert_ne!(unsafe { otfs_config_from_file(missing.as_ptr(), &mut cfg) }, OtfsStatus::Ok);
    assert!(cfg.is_null());
}

#[test]
fn detect_identity_channel() {
    let cfg = small_config();
    let n = unsafe { otfs_config_frame_len(cfg) };
    assert_eq!(n, 8);
    // QPSK points at (±1 ± j)/sqrt(2); the detectors return their indices.
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let points = [(s, s), (s, -s), (-s, s), (-s, -s)];
    let mut h = vec![0.0; 2 * n * n];
    for i in 0..n {
        h[2 * (i * n + i)] = 1.0;
    }
    let y: Vec<f64> = (0..n).flat_map(|i| [points[i % 4].0, points[i % 4].1]).collect();
    let mut first = vec![usize::MAX; n];
    for det in [
        OtfsDetector::Lmmse,
        OtfsDetector::Amp,
        OtfsDetector::Uamp,
        OtfsDetector::UampMfic,
        OtfsDetector::Turbo,
        OtfsDetector::Iw,
    ] {
        let mut out = vec![usize::MAX; n];
        let status = unsafe { otfs_detect(cfg, det, h.as_ptr(), y.as_ptr(), 1e-6, out.as_mut_ptr()) };
        assert_eq!(status, OtfsStatus::Ok, "{det:?}: {}", last_error());
        if first[0] == usize::MAX {
            first = out.clone();
        }
        assert_eq!(out, first, "{det:?}");
    }
    // Four distinct points, repeated.
    assert_eq!(&first[..4], &first[4..]);
    let mut distinct = first[..4].to_vec();
    distinct.sort();
    distinct.dedup();
    assert_eq!(distinct.len(), 4);
    unsafe { otfs_config_free(cfg) };
}

#[test]
fn run_point_checks_length_and_fills_ber() {
    let cfg = small_config();
    let mut ber = [f64::NAN; 2];
    assert_eq!(
        unsafe { otfs_run_point(cfg, 15.0, 50.0, 1, ber.as_mut_ptr(), 1) },
        OtfsStatus::InvalidArgument
    );
    assert_eq!(unsafe { otfs_run_point(cfg, 15.0, 50.0, 1, ber.as_mut_ptr(), 2) }, OtfsStatus::Ok);
    assert!(ber.iter().all(|b| (0.0..=1.0).contains(b)), "{ber:?}");
    assert_eq!(
        unsafe { otfs_run_point(cfg, f64::NAN, 50.0, 1, ber.as_mut_ptr(), 2) },
        OtfsStatus::InvalidArgument
    );
    unsafe { otfs_config_free(cfg) };
}

#[test]
fn sweep_writes_csv_independent_of_threads() {
    let cfg = small_config();
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for threads in [1usize, 2] {
        let path = dir.path().join(format!("t{threads}.csv"));
        let c_path = CString::new(path.to_str().unwrap()).unwrap();
        assert_eq!(unsafe { otfs_sweep_snr_csv(cfg, c_path.as_ptr(), threads) }, OtfsStatus::Ok, "{}", last_error());
        bytes.push(std::fs::read(&path).unwrap());
        assert!(path.with_file_name(format!("t{threads}.csv.meta.toml")).exists());
    }
    assert_eq!(bytes[0], bytes[1]);
    let text = String::from_utf8(bytes.pop().unwrap()).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 2);
    unsafe { otfs_config_free(cfg) };
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/otfs.h")).unwrap();
    for name in [
        "otfs_config_new_default",
        "otfs_config_from_file",
        "otfs_config_set",
        "otfs_config_free",
        "otfs_detect",
        "otfs_run_point",
        "otfs_sweep_snr_csv",
        "otfs_last_error_message",
        "typedef struct OtfsConfig OtfsConfig",
        "OTFS_STATUS_OK",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}
