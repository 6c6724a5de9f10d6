//! C interface to the `pbqn` optimizer.
//!
//! Objects cross the boundary as opaque handles made by the `pbqn_problem_*`
//! constructors and [`pbqn_run`], released with the matching `*_free`. Every fallible call
//! returns a [`PbqnStatus`]; on failure the message is available from
//! [`pbqn_last_error_message`] on the same thread until the next failing call.
//! Panics are caught at the boundary and reported as [`PbqnStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use pbqn::bench::{compute_rstar, perf_model_threshold, PerfModelInput, RstarOptions, SyntheticSpec, TrainProblem};
use pbqn::data::{self, SparseDataset, SparseRow};
use pbqn::optimizer::{StopReason, Trajectory};
use pbqn::{seeded_rng, CurvatureMode, Error, FiniteSumProblem, LogisticProblem, PbqnConfig, QuadraticProblem};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PbqnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Numerical = 4,
    NotConverged = 5,
    Io = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PbqnCurvatureMode {
    /// Curvature pairs from the overlap of consecutive batches.
    MultiBatch = 0,
    /// Curvature pairs from two gradient passes over the same batch.
    FullOverlap = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PbqnStopReason {
    Budget = 0,
    GradientTolerance = 1,
    Converged = 2,
    MaxIterations = 3,
    Diverged = 4,
}

/// Optimizer settings. Start from [`pbqn_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PbqnOptions {
    pub theta: f64,
    pub initial_batch: usize,
    pub c1: f64,
    pub memory_size: usize,
    pub curvature_eps: f64,
    pub mode: PbqnCurvatureMode,
    pub overlap_fraction: f64,
    /// Budget in full-gradient equivalents.
    pub max_fge: f64,
    /// `‖∇F‖∞` stopping tolerance; zero or negative disables it.
    pub gradient_tolerance: f64,
    pub seed: u64,
}

/// One optimizer iteration; record 0 is the starting point.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PbqnRecord {
    pub k: usize,
    pub batch_size: usize,
    pub alpha: f64,
    pub halvings: u32,
    pub pair_admitted: bool,
    pub fge: f64,
    pub train_loss: f64,
    pub gradient_evals: u64,
    pub value_evals: u64,
}

/// Opaque finite-sum objective.
pub struct PbqnProblem {
    inner: TrainProblem,
}

/// Opaque optimizer trajectory.
pub struct PbqnResult {
    trajectory: Trajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    let c = CString::new(text).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PbqnStatus {
    match e {
        Error::Usage(_) => PbqnStatus::InvalidArgument,
        Error::Parse { .. } => PbqnStatus::Parse,
        Error::Numerical(_) => PbqnStatus::Numerical,
        Error::NotConverged { .. } => PbqnStatus::NotConverged,
        Error::Io(_) => PbqnStatus::Io,
        Error::Json(_) => PbqnStatus::Parse,
    }
}

struct Fail(PbqnStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(PbqnStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(PbqnStatus::InvalidArgument, msg.into())
}

/// Runs `f`, mapping errors and panics to a status and recording the message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PbqnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PbqnStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("panic: {msg}"));
            PbqnStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn problem_arg<'a>(p: *const PbqnProblem) -> Result<&'a dyn FiniteSumProblem, Fail> {
    Ok(p.as_ref().ok_or_else(|| null("problem"))?.inner.as_dyn())
}

fn publish(out: &mut *mut PbqnProblem, inner: TrainProblem) {
    *out = Box::into_raw(Box::new(PbqnProblem { inner }));
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pbqn_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pbqn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// ℓ2-regularized logistic regression (`λ = 1/N`) over a LIBSVM file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pbqn_problem_from_libsvm(path: *const c_char, out: *mut *mut PbqnProblem) -> PbqnStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = str_arg(path, "path")?;
        let d = data::parse_sparse_file(Path::new(path))?;
        publish(out, TrainProblem::Logistic(LogisticProblem::from_dataset(&d)));
        Ok(())
    })
}

/// Logistic regression over `n` dense rows of `d` features (row-major) with
/// labels in {−1, +1}. `lambda < 0` selects `1/n`.
///
/// # Safety
/// `features` must hold `n·d` values, `labels` `n` values, `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pbqn_problem_logistic_dense(
    features: *const f64,
    labels: *const f64,
    n: usize,
    d: usize,
    lambda: f64,
    out: *mut *mut PbqnProblem,
) -> PbqnStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if n == 0 || d == 0 {
            return Err(invalid("n and d must be positive"));
        }
        let total = n.checked_mul(d).ok_or_else(|| invalid("n·d overflows"))?;
        let x = slice_arg(features, total, "features")?;
        let z = slice_arg(labels, n, "labels")?;
        let mut rows = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for (i, &label) in z.iter().enumerate() {
            ys.push(if label == 1.0 {
                1
            } else if label == -1.0 {
                -1
            } else {
                return Err(invalid(format!("label {i} is {label}; expected ±1")));
            });
            let row = &x[i * d..(i + 1) * d];
            let (idx, vals): (Vec<u32>, Vec<f64>) = row
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(j, v)| (j as u32, *v))
                .unzip();
            rows.push(SparseRow::new(idx, vals));
        }
        let ds = SparseDataset::new("dense", rows, ys)?.with_dim(d);
        let lambda = if lambda < 0.0 { 1.0 / n as f64 } else { lambda };
        publish(out, TrainProblem::Logistic(LogisticProblem::with_lambda(&ds, lambda)));
        Ok(())
    })
}

/// Synthetic problem from `quad:<d>:<mu>:<L>:<N>` or `logistic:<n>:<d>`.
/// Logistic sets are used whole, without a held-out split.
///
/// # Safety
/// `spec` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pbqn_problem_synthetic(
    spec: *const c_char,
    seed: u64,
    out: *mut *mut PbqnProblem,
) -> PbqnStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let spec: SyntheticSpec = str_arg(spec, "spec")?.parse()?;
        let mut rng = seeded_rng(seed);
        let inner = match spec {
            SyntheticSpec::Quadratic { d, mu, l, n } => {
                TrainProblem::Quadratic(QuadraticProblem::synthetic(d, mu, l, n, &mut rng)?)
            }
            SyntheticSpec::Logistic { n, d } => TrainProblem::Logistic(LogisticProblem::from_dataset(
                &data::synthetic_logistic(n, d, &mut rng)?,
            )),
        };
        publish(out, inner);
        Ok(())
    })
}

/// # Safety
/// `problem` must come from a `pbqn_problem_*` constructor and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn pbqn_problem_free(problem: *mut PbqnProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Number of components `N` and dimension `d`.
///
/// # Safety
/// `problem` must be a live handle; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pbqn_problem_shape(
    problem: *const PbqnProblem,
    num_components: *mut usize,
    dim: *mut usize,
) -> PbqnStatus {
    guard(|| {
        let p = problem_arg(problem)?;
        *out_arg(num_components, "num_components")? = p.num_components();
        *out_arg(dim, "dim")? = p.dim();
        Ok(())
    })
}

/// Full objective and, if `grad` is non-NULL, its gradient at `x`.
///
/// # Safety
/// `x` and `grad` (when non-NULL) must hold `len` values, which must equal the dimension.
#[no_mangle]
pub unsafe extern "C" fn pbqn_problem_evaluate(
    problem: *const PbqnProblem,
    x: *const f64,
    len: usize,
    value: *mut f64,
    grad: *mut f64,
) -> PbqnStatus {
    guard(|| {
        let p = problem_arg(problem)?;
        if len != p.dim() {
            return Err(invalid(format!("x has length {len}, problem dimension is {}", p.dim())));
        }
        let x = slice_arg(x, len, "x")?;
        *out_arg(value, "value")? = p.full_value(x);
        if !grad.is_null() {
            slice::from_raw_parts_mut(grad, len).copy_from_slice(&p.full_gradient(x));
        }
        Ok(())
    })
}

/// Reference optimum: full-batch L-BFGS to `‖∇F‖∞ ≤ 1e-8`.
///
/// # Safety
/// `problem` must be a live handle and `value` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pbqn_problem_rstar(problem: *const PbqnProblem, value: *mut f64) -> PbqnStatus {
    guard(|| {
        let p = problem_arg(problem)?;
        let out = out_arg(value, "value")?;
        *out = compute_rstar(p, &RstarOptions::default())?.value;
        Ok(())
    })
}

/// Library defaults: θ = 0.9, |S₀| = 512, c1 = 1e-4, m = 10, ε = 1e-2,
/// multi-batch with 25% overlap, 100 full-gradient equivalents.
#[no_mangle]
pub extern "C" fn pbqn_options_default() -> PbqnOptions {
    let c = PbqnConfig::default();
    let overlap = match c.curvature_mode {
        CurvatureMode::MultiBatch { overlap_fraction } => overlap_fraction,
        CurvatureMode::FullOverlap => 0.25,
    };
    PbqnOptions {
        theta: c.controller.theta,
        initial_batch: c.controller.initial_size,
        c1: c.linesearch.c1,
        memory_size: c.memory_size,
        curvature_eps: c.curvature_eps,
        mode: PbqnCurvatureMode::MultiBatch,
        overlap_fraction: overlap,
        max_fge: c.stop.max_fge,
        gradient_tolerance: 0.0,
        seed: 0,
    }
}

fn to_config(o: &PbqnOptions) -> PbqnConfig {
    let mut c = PbqnConfig::default();
    c.controller.theta = o.theta;
    c.controller.initial_size = o.initial_batch;
    c.linesearch.c1 = o.c1;
    c.memory_size = o.memory_size;
    c.curvature_eps = o.curvature_eps;
    c.curvature_mode = match o.mode {
        PbqnCurvatureMode::MultiBatch => CurvatureMode::MultiBatch {
            overlap_fraction: o.overlap_fraction,
        },
        PbqnCurvatureMode::FullOverlap => CurvatureMode::FullOverlap,
    };
    c.stop.max_fge = o.max_fge;
    c.stop.gradient_tolerance = (o.gradient_tolerance > 0.0).then_some(o.gradient_tolerance);
    c
}

/// Runs PBQN from `x0` (zeros when NULL). `options` NULL means defaults.
///
/// # Safety
/// `problem` must be a live handle, `x0` (when non-NULL) must hold `x0_len`
/// values, and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pbqn_run(
    problem: *const PbqnProblem,
    options: *const PbqnOptions,
    x0: *const f64,
    x0_len: usize,
    out: *mut *mut PbqnResult,
) -> PbqnStatus {
    guard(|| {
        let p = problem_arg(problem)?;
        let out = out_arg(out, "out")?;
        let opts = options.as_ref().copied().unwrap_or_else(|| pbqn_options_default());
        let start = if x0.is_null() {
            vec![0.0; p.dim()]
        } else {
            slice_arg(x0, x0_len, "x0")?.to_vec()
        };
        let mut rng = seeded_rng(opts.seed);
        let trajectory = pbqn::run_pbqn(p, &to_config(&opts), &start, &mut rng)?;
        *out = Box::into_raw(Box::new(PbqnResult { trajectory }));
        Ok(())
    })
}

/// # Safety
/// `result` must come from [`pbqn_run`] and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn pbqn_result_free(result: *mut PbqnResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Number of records, including the starting point. Zero for NULL.
///
/// # Safety
/// `result` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn pbqn_result_len(result: *const PbqnResult) -> usize {
    result.as_ref().map_or(0, |r| r.trajectory.records.len())
}

/// # Safety
/// `result` must be a live handle and `record` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pbqn_result_record(
    result: *const PbqnResult,
    index: usize,
    record: *mut PbqnRecord,
) -> PbqnStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        let out = out_arg(record, "record")?;
        let rec = r
            .trajectory
            .records
            .get(index)
            .ok_or_else(|| invalid(format!("record {index} out of range")))?;
        *out = PbqnRecord {
            k: rec.k,
            batch_size: rec.batch_size,
            alpha: rec.alpha,
            halvings: rec.halvings,
            pair_admitted: rec.pair_admitted,
            fge: rec.fge,
            train_loss: rec.train_loss,
            gradient_evals: rec.component_grad_evals,
            value_evals: rec.component_value_evals,
        };
        Ok(())
    })
}

/// Copies the final iterate into `x`, which must hold exactly the dimension.
///
/// # Safety
/// `result` must be a live handle and `x` must hold `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn pbqn_result_solution(result: *const PbqnResult, x: *mut f64, len: usize) -> PbqnStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        let sol = &r.trajectory.x;
        if len != sol.len() {
            return Err(invalid(format!(
                "buffer holds {len} values, solution has {}",
                sol.len()
            )));
        }
        if x.is_null() {
            return Err(null("x"));
        }
        slice::from_raw_parts_mut(x, len).copy_from_slice(sol);
        Ok(())
    })
}

/// # Safety
/// `result` must be a live handle and `reason` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pbqn_result_stop_reason(result: *const PbqnResult, reason: *mut PbqnStopReason) -> PbqnStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        *out_arg(reason, "reason")? = match r.trajectory.stop {
            StopReason::Budget => PbqnStopReason::Budget,
            StopReason::GradientTolerance => PbqnStopReason::GradientTolerance,
            StopReason::Converged => PbqnStopReason::Converged,
            StopReason::MaxIterations => PbqnStopReason::MaxIterations,
            StopReason::Diverged => PbqnStopReason::Diverged,
        };
        Ok(())
    })
}

/// Iteration-ratio threshold `(C_S/C_L)·(B_S/B_L)/P_e` below which PBQN is
/// predicted to train faster than SG.
///
/// # Safety
/// `threshold` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pbqn_perf_model_threshold(
    cost_large: f64,
    cost_small: f64,
    batch_small: f64,
    batch_large: f64,
    parallel_efficiency: f64,
    threshold: *mut f64,
) -> PbqnStatus {
    guard(|| {
        let out = out_arg(threshold, "threshold")?;
        let input = PerfModelInput {
            cost_large,
            cost_small,
            batch_small,
            batch_large,
            parallel_efficiency,
            ..Default::default()
        };
        *out = perf_model_threshold(&input)?;
        Ok(())
    })
}
