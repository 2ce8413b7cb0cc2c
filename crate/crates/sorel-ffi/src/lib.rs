//! C ABI for the spectral risk minimization toolkit.
//!
//! Conventions:
//! - every fallible call returns a [`SorelStatus`]; `Ok` is 0;
//! - objects are returned through out-pointers as opaque handles and must be
//!   released with the matching `sorel_*_free` function;
//! - the last error message of the calling thread is available via
//!   [`sorel_last_error_message`];
//! - arrays are caller-allocated `double` buffers with explicit lengths;
//!   feature matrices are row-major.
//!
//! The generated header lives at `include/sorel.h`.

// The whole surface is a C contract: handles and buffers arrive as raw
// pointers by design, validated for null before use.
#![allow(clippy::not_unsafe_ptr_arg_deref)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use sorel::baselines::{reference_solution, run_lsvrg, run_prospect, run_sgd, BaselineConfig};
use sorel::objective::{Dataset, LossKind, ObjectiveModel};
use sorel::schedule::{PracticalSchedule, TheoreticalSchedule};
use sorel::solver::{run_sorel, InnerStrategy, SorelOptions};
use sorel::spectra::{LossVector, SpectralWeights};
use sorel::trace::RunResult;
use sorel::{Direction, Error};

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SorelStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    LengthMismatch = 3,
    NotInPermutahedron = 4,
    Diverged = 5,
    ToleranceNotReached = 6,
    IoError = 7,
    InternalError = 8,
}

fn status_of(err: &Error) -> SorelStatus {
    match err {
        Error::InvalidParameter { .. }
        | Error::Config(_)
        | Error::NonFinite { .. }
        | Error::DegenerateDenominator { .. }
        | Error::Parse { .. } => SorelStatus::InvalidArgument,
        Error::LengthMismatch { .. } | Error::IndexOutOfRange { .. } => SorelStatus::LengthMismatch,
        Error::NotInPermutahedron { .. } => SorelStatus::NotInPermutahedron,
        Error::Diverged { .. } => SorelStatus::Diverged,
        Error::ToleranceNotReached { .. } => SorelStatus::ToleranceNotReached,
        Error::Io(_) => SorelStatus::IoError,
    }
}

fn capture(err: Error) -> SorelStatus {
    set_last_error(&err.to_string());
    status_of(&err)
}

/// Runs a closure, converting panics into `InternalError` so they never
/// unwind across the FFI boundary.
fn guarded(f: impl FnOnce() -> SorelStatus) -> SorelStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("internal panic");
            SorelStatus::InternalError
        }
    }
}

unsafe fn slice_arg<'a>(ptr: *const f64, len: usize) -> Option<&'a [f64]> {
    if ptr.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(ptr, len))
    }
}

macro_rules! require {
    ($opt:expr, $msg:literal) => {
        match $opt {
            Some(v) => v,
            None => {
                set_last_error($msg);
                return SorelStatus::NullPointer;
            }
        }
    };
}

/// Message describing the calling thread's most recent error. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sorel_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

// ---------------------------------------------------------------------------
// spectral weights

/// Opaque spectral weight vector.
pub struct SorelWeights {
    inner: SpectralWeights,
}

fn emit_weights(
    out: *mut *mut SorelWeights,
    built: Result<SpectralWeights, Error>,
) -> SorelStatus {
    match built {
        Ok(inner) => {
            unsafe { *out = Box::into_raw(Box::new(SorelWeights { inner })) };
            SorelStatus::Ok
        }
        Err(e) => capture(e),
    }
}

#[no_mangle]
pub extern "C" fn sorel_weights_cvar(
    n: usize,
    alpha: f64,
    out: *mut *mut SorelWeights,
) -> SorelStatus {
    guarded(|| {
        let out = require!((!out.is_null()).then_some(out), "null out pointer");
        emit_weights(out, SpectralWeights::cvar(n, alpha))
    })
}

#[no_mangle]
pub extern "C" fn sorel_weights_esrm(
    n: usize,
    rho: f64,
    out: *mut *mut SorelWeights,
) -> SorelStatus {
    guarded(|| {
        let out = require!((!out.is_null()).then_some(out), "null out pointer");
        emit_weights(out, SpectralWeights::esrm(n, rho))
    })
}

#[no_mangle]
pub extern "C" fn sorel_weights_extremile(
    n: usize,
    r: f64,
    out: *mut *mut SorelWeights,
) -> SorelStatus {
    guarded(|| {
        let out = require!((!out.is_null()).then_some(out), "null out pointer");
        emit_weights(out, SpectralWeights::extremile(n, r))
    })
}

#[no_mangle]
pub extern "C" fn sorel_weights_custom(
    values: *const f64,
    n: usize,
    out: *mut *mut SorelWeights,
) -> SorelStatus {
    guarded(|| {
        let out = require!((!out.is_null()).then_some(out), "null out pointer");
        let values = require!(unsafe { slice_arg(values, n) }, "null weights pointer");
        emit_weights(out, SpectralWeights::custom(values.to_vec()))
    })
}

/// Number of weights in the vector; 0 for a null handle.
#[no_mangle]
pub extern "C" fn sorel_weights_len(weights: *const SorelWeights) -> usize {
    if weights.is_null() {
        return 0;
    }
    unsafe { (*weights).inner.n() }
}

/// Copies the weights into `out` (length `len`, which must equal
/// `sorel_weights_len`).
#[no_mangle]
pub extern "C" fn sorel_weights_values(
    weights: *const SorelWeights,
    out: *mut f64,
    len: usize,
) -> SorelStatus {
    guarded(|| {
        if weights.is_null() || out.is_null() {
            set_last_error("null pointer");
            return SorelStatus::NullPointer;
        }
        let w = unsafe { &(*weights).inner };
        if len != w.n() {
            set_last_error("output buffer length mismatch");
            return SorelStatus::LengthMismatch;
        }
        unsafe { std::slice::from_raw_parts_mut(out, len) }.copy_from_slice(w.weights());
        SorelStatus::Ok
    })
}

/// # Safety
/// `weights` must be a handle returned by this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn sorel_weights_free(weights: *mut SorelWeights) {
    if !weights.is_null() {
        drop(Box::from_raw(weights));
    }
}

/// Spectral risk of a loss vector: the weight-sorted-loss dot product.
#[no_mangle]
pub extern "C" fn sorel_spectral_risk(
    weights: *const SorelWeights,
    losses: *const f64,
    n: usize,
    out: *mut f64,
) -> SorelStatus {
    guarded(|| {
        if weights.is_null() || out.is_null() {
            set_last_error("null pointer");
            return SorelStatus::NullPointer;
        }
        let losses = require!(unsafe { slice_arg(losses, n) }, "null losses pointer");
        let sigma = unsafe { &(*weights).inner };
        let value = LossVector::new(losses.to_vec())
            .and_then(|lv| sorel::spectral_risk(&lv, sigma));
        match value {
            Ok(v) => {
                unsafe { *out = v };
                SorelStatus::Ok
            }
            Err(e) => capture(e),
        }
    })
}

// ---------------------------------------------------------------------------
// permutahedron operations

/// Euclidean projection onto the permutahedron of `weights`; writes the
/// projected point into `out` (length `n`).
#[no_mangle]
pub extern "C" fn sorel_permutahedron_project(
    weights: *const SorelWeights,
    point: *const f64,
    n: usize,
    out: *mut f64,
) -> SorelStatus {
    guarded(|| {
        if weights.is_null() || out.is_null() {
            set_last_error("null pointer");
            return SorelStatus::NullPointer;
        }
        let point = require!(unsafe { slice_arg(point, n) }, "null point pointer");
        match sorel::project(point, unsafe { &(*weights).inner }) {
            Ok(p) => {
                unsafe { std::slice::from_raw_parts_mut(out, n) }.copy_from_slice(p.coords());
                SorelStatus::Ok
            }
            Err(e) => capture(e),
        }
    })
}

/// Vertex of the permutahedron maximizing `<lambda, scores>`.
#[no_mangle]
pub extern "C" fn sorel_permutahedron_lmo(
    weights: *const SorelWeights,
    scores: *const f64,
    n: usize,
    out: *mut f64,
) -> SorelStatus {
    guarded(|| {
        if weights.is_null() || out.is_null() {
            set_last_error("null pointer");
            return SorelStatus::NullPointer;
        }
        let scores = require!(unsafe { slice_arg(scores, n) }, "null scores pointer");
        match sorel::lmo(scores, unsafe { &(*weights).inner }) {
            Ok(p) => {
                unsafe { std::slice::from_raw_parts_mut(out, n) }.copy_from_slice(p.coords());
                SorelStatus::Ok
            }
            Err(e) => capture(e),
        }
    })
}

/// Membership test at tolerance `tol`; writes 1 or 0 into `out`.
#[no_mangle]
pub extern "C" fn sorel_permutahedron_contains(
    weights: *const SorelWeights,
    point: *const f64,
    n: usize,
    tol: f64,
    out: *mut i32,
) -> SorelStatus {
    guarded(|| {
        if weights.is_null() || out.is_null() {
            set_last_error("null pointer");
            return SorelStatus::NullPointer;
        }
        let point = require!(unsafe { slice_arg(point, n) }, "null point pointer");
        let inside = sorel::contains(point, unsafe { &(*weights).inner }, tol);
        unsafe { *out = inside as i32 };
        SorelStatus::Ok
    })
}

/// Isotonic regression of `y` into `out` (length `n`); nonzero
/// `nonincreasing` selects the decreasing direction.
#[no_mangle]
pub extern "C" fn sorel_isotonic_regression(
    y: *const f64,
    n: usize,
    nonincreasing: i32,
    out: *mut f64,
) -> SorelStatus {
    guarded(|| {
        let out = require!((!out.is_null()).then_some(out), "null out pointer");
        let y = require!(unsafe { slice_arg(y, n) }, "null input pointer");
        let direction = if nonincreasing != 0 {
            Direction::Nonincreasing
        } else {
            Direction::Nondecreasing
        };
        match sorel::isotonic_regression(y, direction) {
            Ok(fit) => {
                unsafe { std::slice::from_raw_parts_mut(out, n) }.copy_from_slice(&fit);
                SorelStatus::Ok
            }
            Err(e) => capture(e),
        }
    })
}

// ---------------------------------------------------------------------------
// objective model

/// Loss family selector for [`sorel_model_new`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SorelLoss {
    LeastSquares = 0,
    Logistic = 1,
}

/// Opaque objective: dataset + loss family + ridge regularizer.
pub struct SorelModel {
    inner: ObjectiveModel,
}

/// Builds a model from a row-major `n x d` feature matrix, `n` targets, the
/// loss family, and the regularization modulus `mu`.
#[no_mangle]
pub extern "C" fn sorel_model_new(
    features: *const f64,
    targets: *const f64,
    n: usize,
    d: usize,
    loss: SorelLoss,
    mu: f64,
    out: *mut *mut SorelModel,
) -> SorelStatus {
    guarded(|| {
        let out = require!((!out.is_null()).then_some(out), "null out pointer");
        let features = require!(
            unsafe { slice_arg(features, n.saturating_mul(d)) },
            "null features pointer"
        );
        let targets = require!(unsafe { slice_arg(targets, n) }, "null targets pointer");
        let kind = match loss {
            SorelLoss::LeastSquares => LossKind::LeastSquares,
            SorelLoss::Logistic => LossKind::Logistic,
        };
        let built = Dataset::new(features.to_vec(), targets.to_vec(), n, d)
            .and_then(|ds| ObjectiveModel::new(ds, kind, mu));
        match built {
            Ok(inner) => {
                unsafe { *out = Box::into_raw(Box::new(SorelModel { inner })) };
                SorelStatus::Ok
            }
            Err(e) => capture(e),
        }
    })
}

/// # Safety
/// `model` must be a handle returned by this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn sorel_model_free(model: *mut SorelModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Composite objective (spectral risk + regularizer) at `w` (length `d`).
#[no_mangle]
pub extern "C" fn sorel_model_objective(
    model: *const SorelModel,
    weights: *const SorelWeights,
    w: *const f64,
    d: usize,
    out: *mut f64,
) -> SorelStatus {
    guarded(|| {
        if model.is_null() || weights.is_null() || out.is_null() {
            set_last_error("null pointer");
            return SorelStatus::NullPointer;
        }
        let w = require!(unsafe { slice_arg(w, d) }, "null parameter pointer");
        let m = unsafe { &(*model).inner };
        match m.primal_objective(unsafe { &(*weights).inner }, w) {
            Ok(v) => {
                unsafe { *out = v };
                SorelStatus::Ok
            }
            Err(e) => capture(e),
        }
    })
}

// ---------------------------------------------------------------------------
// optimizer runs

/// Opaque result of an optimizer run: the final iterate plus the recorded
/// trace rows.
pub struct SorelRun {
    inner: RunResult,
}

/// Which optimizer [`sorel_optimize`] runs.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SorelMethod {
    /// Stabilized primal-dual with the tuned schedule (`c`, `alpha`).
    SorelPractical = 0,
    /// Stabilized primal-dual with the guarantee-carrying schedule and
    /// exact inner solves (`c`, `alpha` ignored).
    SorelTheoretical = 1,
    /// Minibatch SGD with the batch-local spectrum (`alpha` = step size,
    /// `c` = batch size).
    Sgd = 2,
    /// LSVRG with epoch length n (`alpha` = step size).
    Lsvrg = 3,
    /// Prospect-style gradient-table method (`alpha` = step size).
    Prospect = 4,
}

/// Runs an optimizer from the zero start under a pass budget. `c` and
/// `alpha` are method-specific (see [`SorelMethod`]); pass 0 for defaults.
#[no_mangle]
pub extern "C" fn sorel_optimize(
    model: *const SorelModel,
    weights: *const SorelWeights,
    method: SorelMethod,
    pass_budget: f64,
    c: f64,
    alpha: f64,
    seed: u64,
    out: *mut *mut SorelRun,
) -> SorelStatus {
    guarded(|| {
        if model.is_null() || weights.is_null() || out.is_null() {
            set_last_error("null pointer");
            return SorelStatus::NullPointer;
        }
        let m = unsafe { &(*model).inner };
        let sigma = unsafe { &(*weights).inner };
        let result = match method {
            SorelMethod::SorelPractical => {
                let c = if c > 0.0 { c } else { 1.0 };
                let alpha = if alpha > 0.0 {
                    alpha
                } else {
                    1.0 / (12.0 * m.smoothness())
                };
                PracticalSchedule::new(m.n(), c, alpha).and_then(|schedule| {
                    run_sorel(
                        m,
                        sigma,
                        &schedule,
                        &SorelOptions {
                            outer_iters: usize::MAX / 2,
                            pass_budget: Some(pass_budget),
                            seed,
                            inner: InnerStrategy::Svrg,
                            w0: None,
                            batch_size: 1,
                        },
                    )
                })
            }
            SorelMethod::SorelTheoretical => {
                TheoreticalSchedule::new(m.reg_mu(), m.lipschitz(), m.smoothness()).and_then(
                    |schedule| {
                        run_sorel(
                            m,
                            sigma,
                            &schedule,
                            &SorelOptions {
                                outer_iters: usize::MAX / 2,
                                pass_budget: Some(pass_budget),
                                seed,
                                inner: InnerStrategy::Exact,
                                w0: None,
                                batch_size: 1,
                            },
                        )
                    },
                )
            }
            SorelMethod::Sgd => run_sgd(
                m,
                sigma,
                &BaselineConfig {
                    step_size: if alpha > 0.0 { alpha } else { 0.01 },
                    batch_size: if c > 0.0 { c as usize } else { 64.min(m.n()) },
                    seed,
                    pass_budget,
                    ..Default::default()
                },
            ),
            SorelMethod::Lsvrg => run_lsvrg(
                m,
                sigma,
                &BaselineConfig {
                    step_size: if alpha > 0.0 { alpha } else { 0.01 },
                    seed,
                    pass_budget,
                    ..Default::default()
                },
            ),
            SorelMethod::Prospect => run_prospect(
                m,
                sigma,
                &BaselineConfig {
                    step_size: if alpha > 0.0 { alpha } else { 0.01 },
                    seed,
                    pass_budget,
                    ..Default::default()
                },
            ),
        };
        match result {
            Ok(inner) => {
                unsafe { *out = Box::into_raw(Box::new(SorelRun { inner })) };
                SorelStatus::Ok
            }
            Err(e) => capture(e),
        }
    })
}

/// High-accuracy reference minimizer with a certified objective gap `tol`;
/// writes the minimizer into `out` (length `d`).
#[no_mangle]
pub extern "C" fn sorel_reference_solution(
    model: *const SorelModel,
    weights: *const SorelWeights,
    tol: f64,
    out: *mut f64,
    d: usize,
) -> SorelStatus {
    guarded(|| {
        if model.is_null() || weights.is_null() || out.is_null() {
            set_last_error("null pointer");
            return SorelStatus::NullPointer;
        }
        let m = unsafe { &(*model).inner };
        if d != m.d() {
            set_last_error("output buffer length mismatch");
            return SorelStatus::LengthMismatch;
        }
        match reference_solution(m, unsafe { &(*weights).inner }, tol) {
            Ok(w) => {
                unsafe { std::slice::from_raw_parts_mut(out, d) }.copy_from_slice(&w);
                SorelStatus::Ok
            }
            Err(e) => capture(e),
        }
    })
}

/// Dimension of the run's final iterate.
#[no_mangle]
pub extern "C" fn sorel_run_dim(run: *const SorelRun) -> usize {
    if run.is_null() {
        return 0;
    }
    unsafe { (*run).inner.w.len() }
}

/// Copies the final iterate into `out` (length `d`).
#[no_mangle]
pub extern "C" fn sorel_run_final_iterate(
    run: *const SorelRun,
    out: *mut f64,
    d: usize,
) -> SorelStatus {
    guarded(|| {
        if run.is_null() || out.is_null() {
            set_last_error("null pointer");
            return SorelStatus::NullPointer;
        }
        let w = unsafe { &(*run).inner.w };
        if d != w.len() {
            set_last_error("output buffer length mismatch");
            return SorelStatus::LengthMismatch;
        }
        unsafe { std::slice::from_raw_parts_mut(out, d) }.copy_from_slice(w);
        SorelStatus::Ok
    })
}

/// Number of recorded trace rows.
#[no_mangle]
pub extern "C" fn sorel_run_trace_len(run: *const SorelRun) -> usize {
    if run.is_null() {
        return 0;
    }
    unsafe { (*run).inner.trace.rows.len() }
}

/// Reads one trace row; any of the out-pointers may be null to skip that
/// field.
#[no_mangle]
pub extern "C" fn sorel_run_trace_row(
    run: *const SorelRun,
    index: usize,
    passes: *mut f64,
    seconds: *mut f64,
    objective: *mut f64,
) -> SorelStatus {
    guarded(|| {
        if run.is_null() {
            set_last_error("null run handle");
            return SorelStatus::NullPointer;
        }
        let rows = unsafe { &(*run).inner.trace.rows };
        let Some(row) = rows.get(index) else {
            set_last_error("trace row index out of range");
            return SorelStatus::InvalidArgument;
        };
        unsafe {
            if !passes.is_null() {
                *passes = row.passes;
            }
            if !seconds.is_null() {
                *seconds = row.seconds;
            }
            if !objective.is_null() {
                *objective = row.objective;
            }
        }
        SorelStatus::Ok
    })
}

/// # Safety
/// `run` must be a handle returned by this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn sorel_run_free(run: *mut SorelRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}
