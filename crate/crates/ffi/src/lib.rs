//! C interface.
//!
//! Every fallible function returns a [`SteklovStatus`]; on failure the
//! message is available from [`steklov_last_error_message`] on the same
//! thread. Handles are opaque and must be released with their `_free`
//! function. Output arrays are caller-allocated.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use steklov::assembly::{CoefficientField, OperatorTriple};
use steklov::config::RunConfig;
use steklov::critical::{minimize_global, minimize_halfspace, mountain_pass, CriticalPoint, HalfSpaceConstraint, SolverOptions};
use steklov::functional::EnergyContext;
use steklov::mesh::{generate_disk, generate_square, NodeCap};
use steklov::nonlinearity::builtin;
use steklov::run::run;
use steklov::steklov::solve_steklov;
use steklov::Error;

/// Result codes.
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteklovStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parameter = 3,
    Parse = 4,
    ResourceLimit = 5,
    Validation = 6,
    DimensionMismatch = 7,
    Definiteness = 8,
    Geometry = 9,
    Invariant = 10,
    Io = 11,
    DivisionGuard = 12,
    BufferTooSmall = 13,
    Panic = 14,
}

/// Domain shapes accepted by [`steklov_context_new`].
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteklovShape {
    Disk = 0,
    Square = 1,
}

/// Finders accepted by [`steklov_minimize`].
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteklovFinder {
    Global = 0,
    HalfSpacePlus = 1,
    HalfSpaceMinus = 2,
}

/// Scalar summary of a critical point.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SteklovSolution {
    pub j_value: f64,
    pub grad_norm: f64,
    pub cerami_metric: f64,
    pub iterations: u64,
    pub converged: bool,
    pub constraint_active: bool,
    pub morse_negatives: u64,
    pub morse_near_zeros: u64,
}

/// Mesh, operators, spectrum and energy functional for one problem.
pub struct SteklovContext {
    inner: EnergyContext,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SteklovStatus {
    match e {
        Error::ResourceLimit { .. } => SteklovStatus::ResourceLimit,
        Error::Parameter { .. } => SteklovStatus::Parameter,
        Error::Parse { .. } => SteklovStatus::Parse,
        Error::Invariant { .. } => SteklovStatus::Invariant,
        Error::Validation { .. } => SteklovStatus::Validation,
        Error::DimensionMismatch { .. } => SteklovStatus::DimensionMismatch,
        Error::Definiteness { .. } => SteklovStatus::Definiteness,
        Error::Geometry { .. } => SteklovStatus::Geometry,
        Error::DivisionGuard { .. } => SteklovStatus::DivisionGuard,
        Error::Io { .. } => SteklovStatus::Io,
    }
}

struct Failure(SteklovStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

/// Runs `f`, records any error or panic, and returns its status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SteklovStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SteklovStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            SteklovStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(SteklovStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(SteklovStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn read_slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_slice<'a>(p: *mut f64, len: usize, need: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    if len < need {
        return Err(Failure(SteklovStatus::BufferTooSmall, format!("{what} holds {len} values, {need} needed")));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

unsafe fn context<'a>(ctx: *const SteklovContext) -> Result<&'a EnergyContext, Failure> {
    ctx.as_ref().map(|c| &c.inner).ok_or_else(|| null("context"))
}

/// `"delta=0.1,beta=2"`; empty or null means no parameters.
fn parse_params(text: &str) -> Result<BTreeMap<String, f64>, Failure> {
    let mut out = BTreeMap::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Failure(SteklovStatus::Parse, format!("expected key=value, got `{item}`")))?;
        let v: f64 =
            v.trim().parse().map_err(|_| Failure(SteklovStatus::Parse, format!("`{k}`: bad number `{v}`")))?;
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

fn summarize(cp: &CriticalPoint) -> SteklovSolution {
    let morse = cp.morse.unwrap_or(steklov::critical::MorseIndex { negatives: 0, near_zeros: 0, threshold: 0.0 });
    SteklovSolution {
        j_value: cp.j_value,
        grad_norm: cp.grad_norm,
        cerami_metric: cp.cerami_metric,
        iterations: cp.iterations as u64,
        converged: cp.converged,
        constraint_active: cp.constraint_active,
        morse_negatives: morse.negatives as u64,
        morse_near_zeros: morse.near_zeros as u64,
    }
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn steklov_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn steklov_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a context on a generated mesh with `c ≡ coefficient`, the named
/// library nonlinearity and `n_eigs` Steklov pairs.
///
/// # Safety
/// `nonlinearity` must be a NUL-terminated string, `params` null or
/// NUL-terminated, and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn steklov_context_new(
    shape: SteklovShape,
    size: f64,
    h: f64,
    coefficient: f64,
    nonlinearity: *const c_char,
    params: *const c_char,
    n_eigs: usize,
    out: *mut *mut SteklovContext,
) -> SteklovStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let name = read_str(nonlinearity, "nonlinearity")?;
        let params = if params.is_null() { BTreeMap::new() } else { parse_params(read_str(params, "params")?)? };
        let nl = builtin(name, &params)?;
        let cap = NodeCap::from_env();
        let mesh = match shape {
            SteklovShape::Disk => generate_disk(size, h, cap)?,
            SteklovShape::Square => generate_square(size, h, cap)?,
        };
        let ops = OperatorTriple::assemble(&mesh, &CoefficientField::constant(coefficient))?;
        let spectrum = solve_steklov(&mesh, &ops, n_eigs)?;
        let inner = EnergyContext::new(&mesh, &ops, &spectrum, nl)?;
        *out = Box::into_raw(Box::new(SteklovContext { inner }));
        Ok(())
    })
}

/// Releases a context. Null is ignored.
///
/// # Safety
/// `ctx` must come from [`steklov_context_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn steklov_context_free(ctx: *mut SteklovContext) {
    if !ctx.is_null() {
        drop(Box::from_raw(ctx));
    }
}

/// Number of mesh nodes, the length of every coefficient vector; 0 for null.
///
/// # Safety
/// `ctx` must be null or a live context.
#[no_mangle]
pub unsafe extern "C" fn steklov_context_dim(ctx: *const SteklovContext) -> usize {
    ctx.as_ref().map_or(0, |c| c.inner.dim())
}

/// Number of computed Steklov pairs; 0 for null.
///
/// # Safety
/// `ctx` must be null or a live context.
#[no_mangle]
pub unsafe extern "C" fn steklov_eigen_count(ctx: *const SteklovContext) -> usize {
    ctx.as_ref().map_or(0, |c| c.inner.spectrum().k())
}

/// Copies the eigenvalues `μ₁ ≤ … ≤ μ_k` into `out`.
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn steklov_eigenvalues(ctx: *const SteklovContext, out: *mut f64, len: usize) -> SteklovStatus {
    guard(|| {
        let c = context(ctx)?;
        let mus = c.spectrum().eigenvalues();
        write_slice(out, len, mus.len(), "out")?.copy_from_slice(mus);
        Ok(())
    })
}

/// Copies the nodal values of eigenfunction `i` (1-based) into `out`.
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn steklov_eigenfunction(
    ctx: *const SteklovContext,
    i: usize,
    out: *mut f64,
    len: usize,
) -> SteklovStatus {
    guard(|| {
        let c = context(ctx)?;
        let k = c.spectrum().k();
        if i == 0 || i > k {
            return Err(Failure(SteklovStatus::Parameter, format!("eigenfunction index {i} outside 1..={k}")));
        }
        let phi = c.spectrum().phi(i);
        write_slice(out, len, phi.len(), "out")?.copy_from_slice(phi);
        Ok(())
    })
}

/// Energy `J(u)`.
///
/// # Safety
/// `u` must hold `len` doubles and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn steklov_energy(ctx: *const SteklovContext, u: *const f64, len: usize, out: *mut f64) -> SteklovStatus {
    guard(|| {
        let c = context(ctx)?;
        let u = read_slice(u, len, "u")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = c.eval_j(u)?;
        Ok(())
    })
}

/// Gradient `J′(u)` in the Euclidean dual basis.
///
/// # Safety
/// `u` must hold `len` doubles and `out` `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn steklov_gradient(
    ctx: *const SteklovContext,
    u: *const f64,
    len: usize,
    out: *mut f64,
    out_len: usize,
) -> SteklovStatus {
    guard(|| {
        let c = context(ctx)?;
        let g = c.grad_j(read_slice(u, len, "u")?)?;
        write_slice(out, out_len, g.len(), "out")?.copy_from_slice(&g);
        Ok(())
    })
}

/// Descent from `u0`; the critical point goes to `out_u` and its summary to
/// `out`. A non-converged run still returns `Ok` with `converged = false`.
///
/// # Safety
/// `u0` must hold `len` doubles, `out_u` `len` doubles, `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn steklov_minimize(
    ctx: *const SteklovContext,
    finder: SteklovFinder,
    u0: *const f64,
    len: usize,
    tol: f64,
    max_iters: usize,
    out: *mut SteklovSolution,
    out_u: *mut f64,
) -> SteklovStatus {
    guard(|| {
        let c = context(ctx)?;
        let u0 = read_slice(u0, len, "u0")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let opts = SolverOptions { tol, max_iters };
        let cp = match finder {
            SteklovFinder::Global => minimize_global(c, u0, &opts)?,
            SteklovFinder::HalfSpacePlus => minimize_halfspace(c, HalfSpaceConstraint::Plus, u0, &opts)?,
            SteklovFinder::HalfSpaceMinus => minimize_halfspace(c, HalfSpaceConstraint::Minus, u0, &opts)?,
        };
        write_slice(out_u, len, cp.u.len(), "out_u")?.copy_from_slice(cp.u.coefficients());
        *out = summarize(&cp);
        Ok(())
    })
}

/// Mountain pass between `0` and `e` with `n_path` path points.
///
/// # Safety
/// `e` must hold `len` doubles, `out_u` `len` doubles, `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn steklov_mountain_pass(
    ctx: *const SteklovContext,
    e: *const f64,
    len: usize,
    n_path: usize,
    tol: f64,
    max_iters: usize,
    out: *mut SteklovSolution,
    out_u: *mut f64,
) -> SteklovStatus {
    guard(|| {
        let c = context(ctx)?;
        let e = read_slice(e, len, "e")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cp = mountain_pass(c, e, n_path, &SolverOptions { tol, max_iters })?;
        write_slice(out_u, len, cp.u.len(), "out_u")?.copy_from_slice(cp.u.coefficients());
        *out = summarize(&cp);
        Ok(())
    })
}

/// Runs a config file like the `steklov run` command. `out_dir` may be null
/// to keep the config's directory. `exit_code` receives 0 or 2 as the
/// command would return.
///
/// # Safety
/// `config_path` must be NUL-terminated, `out_dir` null or NUL-terminated,
/// `exit_code` valid.
#[no_mangle]
pub unsafe extern "C" fn steklov_run_config(
    config_path: *const c_char,
    out_dir: *const c_char,
    exit_code: *mut i32,
) -> SteklovStatus {
    guard(|| {
        if exit_code.is_null() {
            return Err(null("exit_code"));
        }
        let mut cfg = RunConfig::load(read_str(config_path, "config_path")?)?;
        if !out_dir.is_null() {
            cfg.output_dir = PathBuf::from(read_str(out_dir, "out_dir")?);
        }
        *exit_code = run(&cfg)?.status.exit_code();
        Ok(())
    })
}
