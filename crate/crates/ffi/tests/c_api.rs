use std::ffi::{c_char, CStr, CString};
use std::ptr;

use tempered_bo_ffi::*;

fn last_error() -> String {
    let mut needed = 0usize;
    unsafe {
        tb_last_error_message(ptr::null_mut(), 0, &mut needed);
        let mut buf = vec![0 as c_char; needed];
        assert_eq!(tb_last_error_message(buf.as_mut_ptr(), buf.len(), ptr::null_mut()), TbStatus::Ok);
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(tb_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn tau_and_inverse_round_trip() {
    let mut t = 0.0;
    let mut v = 1.0;
    unsafe {
        assert_eq!(tb_tau(0.0, 2.0, &mut t), TbStatus::Ok);
        assert!((t - 0.5).abs() < 1e-13);
        assert_eq!(tb_tau(0.7, 1.5, &mut t), TbStatus::Ok);
        assert_eq!(tb_tau_inverse(t, 1.5, &mut v), TbStatus::Ok);
        assert!((v - 0.7).abs() < 1e-9);
        assert_eq!(tb_tau_inverse(5.0, 0.0, &mut v), TbStatus::Domain);
        assert!(last_error().contains("outside"));
        assert_eq!(tb_tau(0.0, -1.0, &mut t), TbStatus::Domain);
        assert_eq!(tb_tau(0.0, 1.0, ptr::null_mut()), TbStatus::NullPointer);
    }
}

#[test]
fn gei_values() {
    let mut out = 0.0;
    unsafe {
        assert_eq!(tb_gei(0.0, 1.0, 0.0, 1.0, 0.0, &mut out), TbStatus::Ok);
        assert!((out - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert_eq!(tb_gei(0.0, 1.0, 0.0, 0.0, 0.0, &mut out), TbStatus::Ok);
        assert_eq!(out, 0.5);
        assert_eq!(tb_gei(0.0, 0.0, 0.0, 1.0, 0.0, &mut out), TbStatus::Ok);
        assert_eq!(out, 0.0);
        assert_eq!(tb_gei(0.0, 1.0, 0.0, 1.0, -0.1, &mut out), TbStatus::Config);
    }
}

#[test]
fn gp_handle_lifecycle() {
    let kernel = CString::new("se").unwrap();
    let ls = [0.5];
    let pts = [0.0, 1.0];
    let y = [1.0, -1.0];
    let mut gp: *mut TbGp = ptr::null_mut();
    unsafe {
        assert_eq!(tb_gp_create(kernel.as_ptr(), 1, ls.as_ptr(), 1.0, 0.01, 0.5, pts.as_ptr(), y.as_ptr(), 2, &mut gp), TbStatus::Ok);
        assert!(!gp.is_null());
        let (mut m, mut v) = (0.0, 0.0);
        assert_eq!(tb_gp_predict(gp, [0.0].as_ptr(), 1, &mut m, &mut v), TbStatus::Ok);
        // two points 2 length-scales apart; tempered noise 0.02
        let k = (-2.0f64).exp();
        let a = [[1.02, k], [k, 1.02]];
        let det = a[0][0] * a[1][1] - k * k;
        let w = [(a[1][1] + k) / det, (-a[0][0] - k) / det];
        let want_m = w[0] + k * w[1];
        assert!((m - want_m).abs() < 1e-12, "{m} vs {want_m}");
        assert!(v > 0.0 && v < 0.05);
        assert_eq!(tb_gp_predict(gp, [0.0, 1.0].as_ptr(), 2, &mut m, &mut v), TbStatus::InvalidArgument);
        tb_gp_free(gp);

        let bad = CString::new("rbf").unwrap();
        let mut gp2: *mut TbGp = ptr::null_mut();
        let s = tb_gp_create(bad.as_ptr(), 1, ls.as_ptr(), 1.0, 0.01, 0.5, pts.as_ptr(), y.as_ptr(), 2, &mut gp2);
        assert_eq!(s, TbStatus::InvalidArgument);
        assert!(gp2.is_null());
        assert!(last_error().contains("rbf"));
        tb_gp_free(ptr::null_mut());
    }
}

#[test]
fn run_from_toml() {
    let cfg = CString::new(
        "[objective]\nname = \"sphere\"\ndim = 2\n\n[bo]\nhorizon = 3\nacq_budget = 48\nfit_restarts = 1\nfit_max_iter = 10\nseed = 9\n",
    )
    .unwrap();
    let mut run: *mut TbRun = ptr::null_mut();
    unsafe {
        assert_eq!(tb_run_toml(cfg.as_ptr(), &mut run), TbStatus::Ok, "{}", last_error());
        assert_eq!(tb_run_dim(run), 2);
        let n = tb_run_len(run);
        assert_eq!(n, 4 + 3);
        let mut best = f64::NEG_INFINITY;
        for i in 0..n {
            let mut x = [0.0; 2];
            let mut y = 0.0;
            assert_eq!(tb_run_row(run, i, x.as_mut_ptr(), 2, &mut y), TbStatus::Ok);
            best = best.max(y);
        }
        let mut reported = 0.0;
        assert_eq!(tb_run_best_observed(run, &mut reported), TbStatus::Ok);
        assert_eq!(reported, best);

        let mut needed = 0;
        assert_eq!(tb_run_trace_csv(run, ptr::null_mut(), 0, &mut needed), TbStatus::BufferTooSmall);
        let mut buf = vec![0 as c_char; needed];
        assert_eq!(tb_run_trace_csv(run, buf.as_mut_ptr(), needed, ptr::null_mut()), TbStatus::Ok);
        let csv = CStr::from_ptr(buf.as_ptr()).to_str().unwrap();
        assert_eq!(csv.lines().count(), 1 + n);
        assert_eq!(tb_run_row(run, n, [0.0; 2].as_mut_ptr(), 2, &mut reported), TbStatus::InvalidArgument);
        tb_run_free(run);
    }

    let bad = CString::new("[bo]\nhorizon = 2\n").unwrap();
    let mut none: *mut TbRun = ptr::null_mut();
    unsafe {
        assert_eq!(tb_run_toml(bad.as_ptr(), &mut none), TbStatus::Config);
        assert!(none.is_null());
        assert!(last_error().contains("objective.name"));
        assert_eq!(tb_run_len(none), 0);
    }
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/tempered_bo.h");
    for f in [
        "tb_version",
        "tb_last_error_message",
        "tb_tau",
        "tb_tau_inverse",
        "tb_gei",
        "tb_gp_create",
        "tb_gp_predict",
        "tb_gp_free",
        "tb_run_toml",
        "tb_run_len",
        "tb_run_dim",
        "tb_run_row",
        "tb_run_best_observed",
        "tb_run_trace_csv",
        "tb_run_free",
    ] {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(header.contains("typedef struct TbGp TbGp;"));
    assert!(header.contains("TB_STATUS_NUMERICAL = 5"));
}

#[test]
fn header_compiles_as_c() {
    let Some(cc) = ["cc", "gcc", "clang"].into_iter().find(|c| std::process::Command::new(c).arg("--version").output().is_ok())
    else {
        eprintln!("no C compiler found; header syntax check not run");
        return;
    };
    let dir = tempfile_dir();
    let src = dir.join("check.c");
    std::fs::write(&src, "#include \"tempered_bo.h\"\nint main(void) { double t; return tb_tau(0.0, 1.0, &t) == TB_STATUS_OK ? 0 : 1; }\n").unwrap();
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let out = std::process::Command::new(cc).args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I", include]).arg(&src).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn tempfile_dir() -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("tb-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}
