use std::ffi::{c_void, CStr, CString};
use std::ptr;

use ergolab_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 512];
    let mut needed = 0;
    unsafe { ergolab_last_error(buf.as_mut_ptr(), buf.len(), &mut needed) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn map(family: &str, gamma: f64) -> *mut ErgolabMap {
    let name = CString::new(family).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { ergolab_map_new(name.as_ptr(), gamma, &mut m) }, ErgolabStatus::Ok);
    m
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(ergolab_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn map_evaluation_and_errors() {
    let m = map("boole_like", 0.0);
    let (mut y, mut branch) = (0.0, 99usize);
    assert_eq!(unsafe { ergolab_map_evaluate(m, 0.25, &mut y, &mut branch) }, ErgolabStatus::Ok);
    assert!((y - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(branch, 0);
    assert_eq!(unsafe { ergolab_map_evaluate(m, 1.5, &mut y, &mut branch) }, ErgolabStatus::OutsideDomain);
    assert!(last_error().contains("outside the domain"));
    assert_eq!(unsafe { ergolab_map_evaluate(m, 0.25, ptr::null_mut(), &mut branch) }, ErgolabStatus::NullPointer);
    let mut h = 0.0;
    assert_eq!(unsafe { ergolab_map_density(m, 0.25, &mut h) }, ErgolabStatus::Ok);
    assert_eq!(h, 4.0);
    let mut orbit = [0.0; 3];
    assert_eq!(unsafe { ergolab_map_orbit(m, 0.75, orbit.as_mut_ptr(), 3) }, ErgolabStatus::Ok);
    assert!((orbit[0] - 0.5).abs() < 1e-11);
    unsafe { ergolab_map_free(m) };

    let name = CString::new("nope").unwrap();
    let mut bad = ptr::null_mut();
    assert_eq!(unsafe { ergolab_map_new(name.as_ptr(), 0.5, &mut bad) }, ErgolabStatus::InvalidArgument);
    assert!(bad.is_null());
    let thaler = CString::new("thaler").unwrap();
    assert_eq!(unsafe { ergolab_map_new(thaler.as_ptr(), 1.5, &mut bad) }, ErgolabStatus::InvalidGamma);
}

extern "C" fn inverse(x: f64, scale: *mut c_void) -> f64 {
    let s = unsafe { *(scale as *const f64) };
    s / x
}

#[test]
fn transfer_fixes_the_boole_density() {
    let m = map("boole_like", 0.0);
    let pts = [0.1, 0.5, 0.9];
    let mut out = [0.0; 3];
    let mut scale = 2.0f64;
    let status = unsafe {
        ergolab_transfer_apply(m, Some(inverse), &mut scale as *mut f64 as *mut c_void, pts.as_ptr(), out.as_mut_ptr(), 3)
    };
    assert_eq!(status, ErgolabStatus::Ok);
    for (x, v) in pts.iter().zip(out) {
        assert!((v * x / 2.0 - 1.0).abs() < 1e-12);
    }
    let status = unsafe { ergolab_transfer_apply(m, None, ptr::null_mut(), pts.as_ptr(), out.as_mut_ptr(), 3) };
    assert_eq!(status, ErgolabStatus::NullPointer);
    unsafe { ergolab_map_free(m) };
}

#[test]
fn occupation_counts_visits() {
    let m = map("doubling", 0.0);
    let mut count = 0;
    assert_eq!(unsafe { ergolab_map_occupation(m, 1.0 / 3.0, 0.0, 0.5, 10, &mut count) }, ErgolabStatus::Ok);
    assert_eq!(count, 5);
    assert_eq!(unsafe { ergolab_map_occupation(m, 0.3, 0.6, 0.2, 10, &mut count) }, ErgolabStatus::InvalidArgument);
    unsafe { ergolab_map_free(m) };
}

#[test]
fn limit_law_values() {
    let mut v = 0.0;
    assert_eq!(unsafe { ergolab_ml_moment(0.5, 2, &mut v) }, ErgolabStatus::Ok);
    assert!((v - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    assert_eq!(unsafe { ergolab_stable_laplace(0.5, 1.0, &mut v) }, ErgolabStatus::Ok);
    assert!((v - 0.412_208_114_266_963_7).abs() < 1e-12);
    assert_eq!(unsafe { ergolab_ml_cdf(0.5, 1.0, &mut v) }, ErgolabStatus::Ok);
    assert!(v > 0.0 && v < 1.0);
    assert_eq!(unsafe { ergolab_stable_cdf(0.5, 1.0, &mut v) }, ErgolabStatus::Ok);
    assert!(v > 0.0 && v < 1.0);
    let (mut k, mut c) = (0.0, 0.0);
    assert_eq!(unsafe { ergolab_lil_constants(0.5, &mut k, &mut c) }, ErgolabStatus::Ok);
    assert!((c - 1.0 / std::f64::consts::PI).abs() < 1e-12);
    assert_eq!(unsafe { ergolab_lil_constants(1.0, &mut k, &mut c) }, ErgolabStatus::InvalidGamma);
    assert_eq!(unsafe { ergolab_ml_moment(2.0, 1, &mut v) }, ErgolabStatus::InvalidGamma);
}

fn config(text: &str) -> *mut ErgolabConfig {
    let t = CString::new(text).unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { ergolab_config_from_toml(t.as_ptr(), &mut cfg) }, ErgolabStatus::Ok, "{}", last_error());
    cfg
}

fn string_of(f: impl Fn(*mut std::ffi::c_char, usize, *mut usize) -> ErgolabStatus) -> String {
    let mut needed = 0;
    assert_eq!(f(ptr::null_mut(), 0, &mut needed), ErgolabStatus::BufferTooSmall);
    let mut buf = vec![0 as std::ffi::c_char; needed];
    assert_eq!(f(buf.as_mut_ptr(), buf.len(), &mut needed), ErgolabStatus::Ok);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn run_and_read_a_table() {
    let cfg = config("[map]\nfamily = \"boole_like\"\n[run]\ntrajectories = 10\ngrid_max = 1000\n");
    let digest = string_of(|b, l, n| unsafe { ergolab_config_digest(cfg, b, l, n) });
    assert_eq!(digest.len(), 64);
    let exp = CString::new("duality").unwrap();
    let mut table = ptr::null_mut();
    assert_eq!(unsafe { ergolab_run(cfg, exp.as_ptr(), 2, &mut table) }, ErgolabStatus::Ok);
    let mut len = 0;
    assert_eq!(unsafe { ergolab_table_len(table, &mut len) }, ErgolabStatus::Ok);
    assert!(len >= 1);
    let mut row = ErgolabRow { n: 0, value: f64::NAN, se: 0.0, outcome: ErgolabOutcome::Info };
    assert_eq!(unsafe { ergolab_table_row(table, 0, &mut row) }, ErgolabStatus::Ok);
    assert_eq!((row.n, row.value, row.outcome), (1000, 0.0, ErgolabOutcome::Pass));
    assert_eq!(string_of(|b, l, n| unsafe { ergolab_table_statistic(table, 0, b, l, n) }), "duality_violations");
    assert_eq!(string_of(|b, l, n| unsafe { ergolab_table_verdict(table, 0, b, l, n) }), "pass:DUAL-EXACT");
    assert_eq!(unsafe { ergolab_table_row(table, len, &mut row) }, ErgolabStatus::IndexOutOfBounds);
    let mut ok = false;
    assert_eq!(unsafe { ergolab_table_all_pass(table, &mut ok) }, ErgolabStatus::Ok);
    assert!(ok);
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().to_str().unwrap()).unwrap();
    assert_eq!(unsafe { ergolab_table_write(table, path.as_ptr()) }, ErgolabStatus::Ok);
    let meta = std::fs::read_to_string(dir.path().join("run_metadata.toml")).unwrap();
    assert!(meta.contains(&digest));
    unsafe {
        ergolab_table_free(table);
        ergolab_config_free(cfg);
    }
}

#[test]
fn config_and_run_errors() {
    let t = CString::new("[map]\nfamily = \"boole_like\"\nbogus = 1\n").unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { ergolab_config_from_toml(t.as_ptr(), &mut cfg) }, ErgolabStatus::Config);
    assert!(!last_error().is_empty());
    let path = CString::new("/no/such/config.toml").unwrap();
    assert_eq!(unsafe { ergolab_config_load(path.as_ptr(), &mut cfg) }, ErgolabStatus::Io);

    let cfg = config("[map]\nfamily = \"boole_like\"\n");
    let exp = CString::new("warp").unwrap();
    let mut table = ptr::null_mut();
    assert_eq!(unsafe { ergolab_run(cfg, exp.as_ptr(), 0, &mut table) }, ErgolabStatus::Config);
    let wpde = CString::new("tail").unwrap();
    assert_eq!(unsafe { ergolab_config_set_seed(cfg, 5) }, ErgolabStatus::Ok);
    assert_eq!(unsafe { ergolab_run(cfg, wpde.as_ptr(), 0, &mut table) }, ErgolabStatus::Ok);
    assert_eq!(unsafe { ergolab_run(ptr::null(), wpde.as_ptr(), 0, &mut table) }, ErgolabStatus::NullPointer);
    unsafe {
        ergolab_table_free(table);
        ergolab_config_free(cfg);
        ergolab_config_free(ptr::null_mut());
    }
}
