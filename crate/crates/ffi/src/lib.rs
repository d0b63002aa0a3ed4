//! C ABI over `mprk`.
//!
//! Every fallible function returns an [`MprkStatus`]; on failure the message
//! is available from [`mprk_last_error`] on the same thread. Objects are
//! opaque handles returned through `out` parameters and released with the
//! matching `*_free`. Arrays are caller-owned and sized by the problem
//! dimension `n` (matrices are `n * n`, row-major).

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use mprk::analysis::{convergence_study, StudyConfig};
use mprk::dense::DenseFormula;
use mprk::linalg::DenseMatrix;
use mprk::pds::{builtin, linear_pds_from_matrix, PdSystem};
use mprk::schemes::{integrate, Scheme, StepRecord};
use mprk::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MprkStatus {
    Ok = 0,
    NullPointer = 1,
    Usage = 2,
    Domain = 3,
    Model = 4,
    Solver = 5,
    Integration = 6,
    Oracle = 7,
    Io = 8,
    Panic = 9,
}

/// A production-destruction system.
pub struct MprkProblem(PdSystem);

/// A configured time-stepping scheme.
pub struct MprkScheme(Scheme);

/// One completed step, usable for dense output.
pub struct MprkStepRecord(StepRecord);

/// The records of a full integration.
pub struct MprkTrajectory {
    y0: Vec<f64>,
    records: Vec<StepRecord>,
}

/// Fills `p_out` (row-major `n * n`) with production rates at state `y`.
/// `p_out[k * n + nu]` is the rate from species `nu` into species `k`.
pub type MprkRateFn = Option<unsafe extern "C" fn(user: *mut c_void, n: usize, y: *const f64, p_out: *mut f64)>;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(err: &Error) -> MprkStatus {
    match err {
        Error::Usage(_) => MprkStatus::Usage,
        Error::Domain(_) => MprkStatus::Domain,
        Error::Model(_) => MprkStatus::Model,
        Error::Solver(_) => MprkStatus::Solver,
        Error::Integration { .. } => MprkStatus::Integration,
        Error::Oracle(_) => MprkStatus::Oracle,
        Error::Io(_) => MprkStatus::Io,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MprkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            MprkStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            MprkStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            MprkStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &'static str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn string<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Lib(Error::Usage(format!("{what} is not valid UTF-8"))))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn mprk_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Built-in problem by name: "linear-test" or "nonlinear-test".
#[no_mangle]
pub unsafe extern "C" fn mprk_problem_builtin(name: *const c_char, out: *mut *mut MprkProblem) -> MprkStatus {
    guard(|| {
        let name = string(name, "name")?;
        let pds = builtin(name).ok_or_else(|| Error::Usage(format!("unknown problem {name:?}")))?;
        put(out, MprkProblem(pds))
    })
}

/// Linear system `y' = A y`; `A` must be Metzler with zero column sums.
#[no_mangle]
pub unsafe extern "C" fn mprk_problem_from_matrix(
    n: usize,
    a: *const f64,
    y0: *const f64,
    out: *mut *mut MprkProblem,
) -> MprkStatus {
    guard(|| {
        let a = DenseMatrix::from_row_major(n, slice(a, n * n, "a")?)?;
        let pds = linear_pds_from_matrix(&a, slice(y0, n, "y0")?.to_vec())?;
        put(out, MprkProblem(pds))
    })
}

struct Callback {
    f: unsafe extern "C" fn(*mut c_void, usize, *const f64, *mut f64),
    user: *mut c_void,
}

// The caller guarantees that `user` may be used from any thread that calls
// into the resulting problem.
unsafe impl Send for Callback {}
unsafe impl Sync for Callback {}

impl Callback {
    fn rates(&self, y: &[f64]) -> DenseMatrix {
        let n = y.len();
        let mut p = vec![0.0; n * n];
        unsafe { (self.f)(self.user, n, y.as_ptr(), p.as_mut_ptr()) };
        DenseMatrix::from_row_major(n, &p).expect("n * n entries")
    }
}

/// Problem backed by a C rate callback. `user` is passed through untouched
/// and must outlive the problem.
#[no_mangle]
pub unsafe extern "C" fn mprk_problem_from_callback(
    name: *const c_char,
    n: usize,
    y0: *const f64,
    rates: MprkRateFn,
    user: *mut c_void,
    out: *mut *mut MprkProblem,
) -> MprkStatus {
    guard(|| {
        let name = string(name, "name")?;
        let f = rates.ok_or(Failure::Null("rates"))?;
        let cb = Callback { f, user };
        let pds = PdSystem::new(name, slice(y0, n, "y0")?.to_vec(), move |y: &[f64]| cb.rates(y))?;
        put(out, MprkProblem(pds))
    })
}

/// Number of species, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn mprk_problem_dim(problem: *const MprkProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.0.dim())
}

/// Copies the initial state into `out` (length `n`).
#[no_mangle]
pub unsafe extern "C" fn mprk_problem_initial_state(problem: *const MprkProblem, out: *mut f64) -> MprkStatus {
    guard(|| {
        let p = &get(problem, "problem")?.0;
        slice_mut(out, p.dim(), "out")?.copy_from_slice(p.initial_state());
        Ok(())
    })
}

/// Right-hand side `f(y)` into `out`.
#[no_mangle]
pub unsafe extern "C" fn mprk_problem_rhs(problem: *const MprkProblem, y: *const f64, out: *mut f64) -> MprkStatus {
    guard(|| {
        let p = &get(problem, "problem")?.0;
        let f = p.rhs(slice(y, p.dim(), "y")?)?;
        slice_mut(out, p.dim(), "out")?.copy_from_slice(&f);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn mprk_problem_free(problem: *mut MprkProblem) {
    free(problem)
}

/// Scheme from a selector: "mpe", "mprk22:<alpha>", "mprk43:<alpha>,<beta>", "mprk4".
#[no_mangle]
pub unsafe extern "C" fn mprk_scheme_parse(selector: *const c_char, out: *mut *mut MprkScheme) -> MprkStatus {
    guard(|| {
        let scheme: Scheme = string(selector, "selector")?.parse()?;
        put(out, MprkScheme(scheme))
    })
}

/// Classical order of the scheme, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn mprk_scheme_order(scheme: *const MprkScheme) -> u32 {
    scheme.as_ref().map_or(0, |s| s.0.order())
}

#[no_mangle]
pub unsafe extern "C" fn mprk_scheme_free(scheme: *mut MprkScheme) {
    free(scheme)
}

/// One step of size `dt` from the positive state `y_n`.
#[no_mangle]
pub unsafe extern "C" fn mprk_step(
    problem: *const MprkProblem,
    scheme: *const MprkScheme,
    y_n: *const f64,
    dt: f64,
    out: *mut *mut MprkStepRecord,
) -> MprkStatus {
    guard(|| {
        let p = &get(problem, "problem")?.0;
        let s = &get(scheme, "scheme")?.0;
        let rec = s.step(p, slice(y_n, p.dim(), "y_n")?, dt)?;
        put(out, MprkStepRecord(rec))
    })
}

/// Copies the end-of-step state into `out`.
#[no_mangle]
pub unsafe extern "C" fn mprk_step_record_y_next(record: *const MprkStepRecord, out: *mut f64) -> MprkStatus {
    guard(|| {
        let r = &get(record, "record")?.0;
        slice_mut(out, r.y_next.len(), "out")?.copy_from_slice(&r.y_next);
        Ok(())
    })
}

/// Linear solves the step performed, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn mprk_step_record_solves(record: *const MprkStepRecord) -> usize {
    record.as_ref().map_or(0, |r| r.0.linear_solves)
}

#[no_mangle]
pub unsafe extern "C" fn mprk_step_record_free(record: *mut MprkStepRecord) {
    free(record)
}

fn dense_eval(rec: &StepRecord, formula: &str, theta: f64, t_out: *mut f64, y_out: *mut f64) -> Result<(), Failure> {
    let formula: DenseFormula = formula.parse()?;
    let s = formula.evaluate(rec, theta)?;
    let y = unsafe { slice_mut(y_out, s.values.len(), "y_out")? };
    y.copy_from_slice(&s.values);
    if !t_out.is_null() {
        unsafe { *t_out = s.t };
    }
    Ok(())
}

/// Dense output at `t_n + theta * dt`. `formula` is "do1", "do2",
/// "do2-explicit" or "do3"; `t_out` may be null.
#[no_mangle]
pub unsafe extern "C" fn mprk_dense_eval(
    record: *const MprkStepRecord,
    formula: *const c_char,
    theta: f64,
    t_out: *mut f64,
    y_out: *mut f64,
) -> MprkStatus {
    guard(|| {
        let r = &get(record, "record")?.0;
        dense_eval(r, string(formula, "formula")?, theta, t_out, y_out)
    })
}

/// Integrates from the problem's initial state over `[0, t_end]`.
#[no_mangle]
pub unsafe extern "C" fn mprk_integrate(
    problem: *const MprkProblem,
    scheme: *const MprkScheme,
    t_end: f64,
    dt: f64,
    out: *mut *mut MprkTrajectory,
) -> MprkStatus {
    guard(|| {
        let p = &get(problem, "problem")?.0;
        let s = &get(scheme, "scheme")?.0;
        let records = integrate(s, p, p.initial_state(), t_end, dt)?;
        put(
            out,
            MprkTrajectory {
                y0: p.initial_state().to_vec(),
                records,
            },
        )
    })
}

/// Number of steps, or 0 for a null handle. States are indexed `0..=steps`.
#[no_mangle]
pub unsafe extern "C" fn mprk_trajectory_steps(traj: *const MprkTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.records.len())
}

/// Time and state after `index` steps; `t_out` may be null.
#[no_mangle]
pub unsafe extern "C" fn mprk_trajectory_state(
    traj: *const MprkTrajectory,
    index: usize,
    t_out: *mut f64,
    y_out: *mut f64,
) -> MprkStatus {
    guard(|| {
        let tr = get(traj, "trajectory")?;
        let (t, y) = match index {
            0 => (0.0, &tr.y0),
            i if i <= tr.records.len() => (tr.records[i - 1].t_next(), &tr.records[i - 1].y_next),
            i => return Err(Error::Usage(format!("state index {i} out of range 0..={}", tr.records.len())).into()),
        };
        slice_mut(y_out, y.len(), "y_out")?.copy_from_slice(y);
        if !t_out.is_null() {
            *t_out = t;
        }
        Ok(())
    })
}

/// Dense output inside step `step` (0-based) of a trajectory.
#[no_mangle]
pub unsafe extern "C" fn mprk_trajectory_dense(
    traj: *const MprkTrajectory,
    step: usize,
    formula: *const c_char,
    theta: f64,
    t_out: *mut f64,
    y_out: *mut f64,
) -> MprkStatus {
    guard(|| {
        let tr = get(traj, "trajectory")?;
        let rec = tr
            .records
            .get(step)
            .ok_or_else(|| Error::Usage(format!("step {step} out of range, trajectory has {}", tr.records.len())))?;
        dense_eval(rec, string(formula, "formula")?, theta, t_out, y_out)
    })
}

#[no_mangle]
pub unsafe extern "C" fn mprk_trajectory_free(traj: *mut MprkTrajectory) {
    free(traj)
}

/// Step-halving study with `dt0 / 2^k`, `k < levels`. `dense` may be null
/// for the nodal error at `t_end`; otherwise the error is maximised over
/// `thetas` in every step. `dts` and `errors` receive `levels` values,
/// `mean_eoc` (nullable) the mean of the last three observed orders.
#[no_mangle]
pub unsafe extern "C" fn mprk_convergence_study(
    problem: *const MprkProblem,
    scheme: *const MprkScheme,
    dense: *const c_char,
    thetas: *const f64,
    n_thetas: usize,
    t_end: f64,
    dt0: f64,
    levels: usize,
    dts: *mut f64,
    errors: *mut f64,
    mean_eoc: *mut f64,
) -> MprkStatus {
    guard(|| {
        let p = &get(problem, "problem")?.0;
        let s = &get(scheme, "scheme")?.0;
        let mut cfg = StudyConfig::nodal(s.clone(), t_end, dt0, levels);
        if !dense.is_null() {
            let formula: DenseFormula = string(dense, "dense")?.parse()?;
            formula.check_pairing(s)?;
            cfg = cfg.with_dense(formula, slice(thetas, n_thetas, "thetas")?);
        }
        let dts = slice_mut(dts, levels, "dts")?;
        let errors = slice_mut(errors, levels, "errors")?;
        let report = convergence_study(p, &cfg)?;
        dts.copy_from_slice(&report.dts);
        errors.copy_from_slice(&report.errors);
        if !mean_eoc.is_null() {
            *mean_eoc = report.mean_tail_eoc(3);
        }
        Ok(())
    })
}
