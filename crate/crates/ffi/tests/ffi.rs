use std::ffi::{CStr, CString};
use std::ptr;

use steklov_ffi::*;

fn last_error() -> String {
    let p = steklov_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn context(nl: &str, params: &str) -> *mut SteklovContext {
    let nl = CString::new(nl).unwrap();
    let params = CString::new(params).unwrap();
    let mut ctx = ptr::null_mut();
    let status = unsafe {
        steklov_context_new(SteklovShape::Disk, 1.0, 0.2, 1.0, nl.as_ptr(), params.as_ptr(), 4, &mut ctx)
    };
    assert_eq!(status, SteklovStatus::Ok);
    assert!(!ctx.is_null());
    ctx
}

#[test]
fn spectrum_and_energy_round_trip() {
    let ctx = context("quartic-well", "delta=0.1");
    unsafe {
        let n = steklov_context_dim(ctx);
        assert!(n > 10);
        assert_eq!(steklov_eigen_count(ctx), 4);
        let mut mus = [0.0; 4];
        assert_eq!(steklov_eigenvalues(ctx, mus.as_mut_ptr(), 4), SteklovStatus::Ok);
        assert!((mus[0] - 0.44638996589653457).abs() < 0.02, "{mus:?}");
        assert!(mus.windows(2).all(|w| w[0] <= w[1]));

        let mut phi = vec![0.0; n];
        assert_eq!(steklov_eigenfunction(ctx, 1, phi.as_mut_ptr(), n), SteklovStatus::Ok);
        let mut j = f64::NAN;
        assert_eq!(steklov_energy(ctx, phi.as_ptr(), n, &mut j), SteklovStatus::Ok);
        assert!(j.is_finite());
        let mut g = vec![0.0; n];
        assert_eq!(steklov_gradient(ctx, phi.as_ptr(), n, g.as_mut_ptr(), n), SteklovStatus::Ok);

        // Directional derivative against a central difference.
        let eps = 1e-6;
        let plus: Vec<f64> = phi.iter().map(|x| x * (1.0 + eps)).collect();
        let minus: Vec<f64> = phi.iter().map(|x| x * (1.0 - eps)).collect();
        let (mut jp, mut jm) = (0.0, 0.0);
        steklov_energy(ctx, plus.as_ptr(), n, &mut jp);
        steklov_energy(ctx, minus.as_ptr(), n, &mut jm);
        let fd = (jp - jm) / (2.0 * eps);
        let dot: f64 = g.iter().zip(&phi).map(|(a, b)| a * b).sum();
        assert!((fd - dot).abs() <= 1e-6 * (1.0 + dot.abs()), "{fd} vs {dot}");
        steklov_context_free(ctx);
    }
}

#[test]
fn minimizers_and_mountain_pass() {
    let ctx = context("quartic-well", "delta=0.1");
    unsafe {
        let n = steklov_context_dim(ctx);
        let mut phi1 = vec![0.0; n];
        steklov_eigenfunction(ctx, 1, phi1.as_mut_ptr(), n);
        let mut u = vec![0.0; n];
        let mut plus = SteklovSolution::default();
        let u0: Vec<f64> = phi1.iter().map(|x| 2.0 * x).collect();
        let status = steklov_minimize(ctx, SteklovFinder::HalfSpacePlus, u0.as_ptr(), n, 1e-7, 2000, &mut plus, u.as_mut_ptr());
        assert_eq!(status, SteklovStatus::Ok);
        assert!(plus.converged && !plus.constraint_active);
        assert!(plus.j_value < 0.0);
        assert_eq!(plus.morse_negatives, 0);

        let e: Vec<f64> = u.clone();
        let mut saddle = SteklovSolution::default();
        let status = steklov_mountain_pass(ctx, e.as_ptr(), n, 21, 1e-6, 5000, &mut saddle, u.as_mut_ptr());
        assert_eq!(status, SteklovStatus::Ok, "{}", last_error());
        assert!(saddle.j_value > plus.j_value);
        steklov_context_free(ctx);
    }
}

#[test]
fn error_codes_and_messages() {
    unsafe {
        let mut ctx = ptr::null_mut();
        let bogus = CString::new("no-such-thing").unwrap();
        let status = steklov_context_new(SteklovShape::Disk, 1.0, 0.2, 1.0, bogus.as_ptr(), ptr::null(), 4, &mut ctx);
        assert_eq!(status, SteklovStatus::Parameter);
        assert!(ctx.is_null());
        assert!(last_error().contains("no-such-thing"));

        let nl = CString::new("quartic-well").unwrap();
        let bad = CString::new("delta=abc").unwrap();
        let status = steklov_context_new(SteklovShape::Disk, 1.0, 0.2, 1.0, nl.as_ptr(), bad.as_ptr(), 4, &mut ctx);
        assert_eq!(status, SteklovStatus::Parse);

        let status = steklov_context_new(SteklovShape::Disk, 1.0, 0.2, 1.0, ptr::null(), ptr::null(), 4, &mut ctx);
        assert_eq!(status, SteklovStatus::NullPointer);

        let mut out = 0.0;
        assert_eq!(steklov_energy(ptr::null(), ptr::null(), 0, &mut out), SteklovStatus::NullPointer);
        assert_eq!(steklov_context_dim(ptr::null()), 0);
        steklov_context_free(ptr::null_mut());

        let ctx = context("zero", "");
        let n = steklov_context_dim(ctx);
        let u = vec![0.0; n - 1];
        assert_eq!(steklov_energy(ctx, u.as_ptr(), n - 1, &mut out), SteklovStatus::DimensionMismatch);
        let mut small = [0.0; 2];
        assert_eq!(steklov_eigenvalues(ctx, small.as_mut_ptr(), 2), SteklovStatus::BufferTooSmall);
        assert_eq!(steklov_eigenfunction(ctx, 9, small.as_mut_ptr(), 2), SteklovStatus::Parameter);

        // Success clears the message.
        let mut mus = [0.0; 4];
        assert_eq!(steklov_eigenvalues(ctx, mus.as_mut_ptr(), 4), SteklovStatus::Ok);
        assert!(steklov_last_error_message().is_null());
        steklov_context_free(ctx);
    }
}

#[test]
fn run_config_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.conf");
    std::fs::write(&cfg, "scenario=spectrum_only\ndomain.h=0.25\n").unwrap();
    let path = CString::new(cfg.to_str().unwrap()).unwrap();
    let out = CString::new(dir.path().join("out").to_str().unwrap()).unwrap();
    let mut code = -1;
    let status = unsafe { steklov_run_config(path.as_ptr(), out.as_ptr(), &mut code) };
    assert_eq!(status, SteklovStatus::Ok, "{}", last_error());
    assert_eq!(code, 0);
    assert!(dir.path().join("out/report.txt").exists());

    let missing = CString::new(dir.path().join("nope.conf").to_str().unwrap()).unwrap();
    let status = unsafe { steklov_run_config(missing.as_ptr(), ptr::null(), &mut code) };
    assert_eq!(status, SteklovStatus::Io);
}

#[test]
fn version_and_header() {
    let v = unsafe { CStr::from_ptr(steklov_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/steklov.h")).unwrap();
    for name in [
        "steklov_context_new",
        "steklov_context_free",
        "steklov_minimize",
        "steklov_mountain_pass",
        "steklov_run_config",
        "steklov_last_error_message",
        "STEKLOV_STATUS_NULL_POINTER",
        "typedef struct SteklovContext SteklovContext",
    ] {
        assert!(header.contains(name), "{name}");
    }
}
