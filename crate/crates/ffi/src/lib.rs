//! C ABI for `maxlewis`.
//!
//! Matrices and query plans are opaque handles created and destroyed through
//! this interface. Every fallible call returns an [`MlStatus`]; on failure a
//! message is available from [`ml_last_error`] on the same thread until the
//! next failing call. Output arrays are caller-allocated and their length is
//! passed alongside the pointer.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use maxlewis::sampling::{build_sampling_matrix, draw_until_distinct, default_draw_cap};
use maxlewis::{
    leverage_scores, lewis_weights, max_weight_distribution, sample_size_bound, solve_lp_regression,
    verify_fixed_point, Error, LewisConfig, QueryPlan, RealMatrix, SamplingDistribution, WeightVector,
};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NotConverged = 3,
    RankDeficient = 4,
    BudgetInfeasible = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Dense real matrix.
pub struct MlMatrix {
    inner: RealMatrix,
}

/// Query plan together with the distribution it was drawn from.
pub struct MlPlan {
    plan: QueryPlan,
    dist: SamplingDistribution,
    p: f64,
    total_mass: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> MlStatus {
    match err {
        Error::NotConverged { .. } | Error::CapExceeded { .. } => MlStatus::NotConverged,
        Error::RankDeficient { .. } => MlStatus::RankDeficient,
        Error::BudgetExceedsSupport { .. } | Error::QueryBudgetInfeasible { .. } => MlStatus::BudgetInfeasible,
        _ => MlStatus::InvalidArgument,
    }
}

enum Failure {
    Status(MlStatus, String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn null() -> Failure {
    Failure::Status(MlStatus::NullPointer, "null pointer argument".into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MlStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            MlStatus::Panic
        }
    }
}

/// Borrow `len` elements at `ptr`; `len == 0` accepts any pointer.
unsafe fn slice<'a, T>(ptr: *const T, len: usize) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null());
    }
    // SAFETY: caller guarantees `ptr` addresses `len` initialized elements.
    Ok(unsafe { std::slice::from_raw_parts(ptr, len) })
}

unsafe fn slice_mut<'a, T>(ptr: *mut T, len: usize) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(null());
    }
    // SAFETY: caller guarantees `ptr` addresses `len` writable elements.
    Ok(unsafe { std::slice::from_raw_parts_mut(ptr, len) })
}

unsafe fn handle<'a, T>(ptr: *const T) -> Result<&'a T, Failure> {
    // SAFETY: non-null handles were produced by this library and not freed.
    unsafe { ptr.as_ref() }.ok_or_else(null)
}

fn copy_out<T: Copy>(src: &[T], dst: &mut [T]) -> Result<(), Failure> {
    if dst.len() < src.len() {
        return Err(Failure::Status(
            MlStatus::BufferTooSmall,
            format!("output buffer holds {} elements, {} needed", dst.len(), src.len()),
        ));
    }
    dst[..src.len()].copy_from_slice(src);
    Ok(())
}

/// Message for the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ml_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ml_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies a row-major `rows x cols` array into a new matrix handle.
///
/// # Safety
/// `data` must point to `rows * cols` doubles and `out` to writable storage
/// for one pointer.
#[no_mangle]
pub unsafe extern "C" fn ml_matrix_new(rows: usize, cols: usize, data: *const f64, out: *mut *mut MlMatrix) -> MlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Failure::Status(MlStatus::InvalidArgument, "dimension overflow".into()))?;
        let values = unsafe { slice(data, len) }?;
        let inner = RealMatrix::from_row_major(rows, cols, values)?;
        // SAFETY: `out` checked non-null above.
        unsafe { *out = Box::into_raw(Box::new(MlMatrix { inner })) };
        Ok(())
    })
}

/// # Safety
/// `m` must be NULL or a handle from [`ml_matrix_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ml_matrix_free(m: *mut MlMatrix) {
    if !m.is_null() {
        // SAFETY: ownership returns to Rust exactly once.
        drop(unsafe { Box::from_raw(m) });
    }
}

/// # Safety
/// `m` must be NULL or a live matrix handle.
#[no_mangle]
pub unsafe extern "C" fn ml_matrix_rows(m: *const MlMatrix) -> usize {
    unsafe { m.as_ref() }.map_or(0, |m| m.inner.nrows())
}

/// # Safety
/// `m` must be NULL or a live matrix handle.
#[no_mangle]
pub unsafe extern "C" fn ml_matrix_cols(m: *const MlMatrix) -> usize {
    unsafe { m.as_ref() }.map_or(0, |m| m.inner.ncols())
}

/// Leverage scores, one per row, into `out[0..len]`.
///
/// # Safety
/// `m` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ml_leverage_scores(m: *const MlMatrix, out: *mut f64, len: usize) -> MlStatus {
    guard(|| {
        let m = unsafe { handle(m) }?;
        let out = unsafe { slice_mut(out, len) }?;
        copy_out(leverage_scores(&m.inner)?.as_slice(), out)
    })
}

/// ℓp Lewis weights with the default iteration settings. When `residual` is
/// non-NULL it receives the certified fixed-point residual.
///
/// # Safety
/// `m` must be a live handle, `out` must hold `len` doubles and `residual`
/// must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn ml_lewis_weights(
    m: *const MlMatrix,
    p: f64,
    out: *mut f64,
    len: usize,
    residual: *mut f64,
) -> MlStatus {
    guard(|| {
        let m = unsafe { handle(m) }?;
        let out = unsafe { slice_mut(out, len) }?;
        let w = lewis_weights(&m.inner, &LewisConfig::new(p))?;
        copy_out(w.as_slice(), out)?;
        if !residual.is_null() {
            let r = verify_fixed_point(&m.inner, &w, p)?;
            // SAFETY: checked non-null.
            unsafe { *residual = r };
        }
        Ok(())
    })
}

/// Relative fixed-point residual of `weights[0..len]` for `m`.
///
/// # Safety
/// `m` must be a live handle, `weights` must hold `len` doubles and
/// `residual` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ml_verify_fixed_point(
    m: *const MlMatrix,
    weights: *const f64,
    len: usize,
    p: f64,
    residual: *mut f64,
) -> MlStatus {
    guard(|| {
        let m = unsafe { handle(m) }?;
        let w = unsafe { slice(weights, len) }?;
        if residual.is_null() {
            return Err(null());
        }
        let w = WeightVector::new(w.to_vec(), p)?;
        let r = verify_fixed_point(&m.inner, &w, p)?;
        // SAFETY: checked non-null.
        unsafe { *residual = r };
        Ok(())
    })
}

/// Draws i.i.d. from the max-weight distribution of `k` weight vectors of
/// length `n` (row-major in `weights`) until `tau` distinct rows are seen.
///
/// # Safety
/// `weights` must hold `k * n` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ml_plan_draw(
    weights: *const f64,
    k: usize,
    n: usize,
    p: f64,
    tau: usize,
    seed: u64,
    out: *mut *mut MlPlan,
) -> MlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let len = k
            .checked_mul(n)
            .ok_or_else(|| Failure::Status(MlStatus::InvalidArgument, "dimension overflow".into()))?;
        let flat = unsafe { slice(weights, len) }?;
        if n == 0 {
            return Err(Failure::Status(MlStatus::InvalidArgument, "n must be positive".into()));
        }
        let vectors = flat
            .chunks_exact(n)
            .map(|c| WeightVector::new(c.to_vec(), p))
            .collect::<Result<Vec<_>, _>>()?;
        let (dist, total_mass) = max_weight_distribution(&vectors)?;
        let plan = draw_until_distinct(&dist, tau, seed, default_draw_cap(tau))?;
        // SAFETY: `out` checked non-null above.
        unsafe {
            *out = Box::into_raw(Box::new(MlPlan {
                plan,
                dist,
                p,
                total_mass,
            }))
        };
        Ok(())
    })
}

/// # Safety
/// `plan` must be NULL or a handle from [`ml_plan_draw`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ml_plan_free(plan: *mut MlPlan) {
    if !plan.is_null() {
        // SAFETY: ownership returns to Rust exactly once.
        drop(unsafe { Box::from_raw(plan) });
    }
}

/// Number of draws made, or 0 for NULL.
///
/// # Safety
/// `plan` must be NULL or a live plan handle.
#[no_mangle]
pub unsafe extern "C" fn ml_plan_draw_count(plan: *const MlPlan) -> usize {
    unsafe { plan.as_ref() }.map_or(0, |p| p.plan.draws.len())
}

/// Number of distinct rows selected, or 0 for NULL.
///
/// # Safety
/// `plan` must be NULL or a live plan handle.
#[no_mangle]
pub unsafe extern "C" fn ml_plan_distinct_count(plan: *const MlPlan) -> usize {
    unsafe { plan.as_ref() }.map_or(0, |p| p.plan.distinct.len())
}

/// Sum of the elementwise-max weights the plan was drawn from, or NaN for NULL.
///
/// # Safety
/// `plan` must be NULL or a live plan handle.
#[no_mangle]
pub unsafe extern "C" fn ml_plan_total_mass(plan: *const MlPlan) -> f64 {
    unsafe { plan.as_ref() }.map_or(f64::NAN, |p| p.total_mass)
}

/// Draw sequence, in draw order.
///
/// # Safety
/// `plan` must be a live handle and `out` must hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn ml_plan_draws(plan: *const MlPlan, out: *mut usize, len: usize) -> MlStatus {
    guard(|| {
        let plan = unsafe { handle(plan) }?;
        copy_out(&plan.plan.draws, unsafe { slice_mut(out, len) }?)
    })
}

/// Distinct selected rows, in order of first appearance.
///
/// # Safety
/// `plan` must be a live handle and `out` must hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn ml_plan_distinct(plan: *const MlPlan, out: *mut usize, len: usize) -> MlStatus {
    guard(|| {
        let plan = unsafe { handle(plan) }?;
        copy_out(&plan.plan.distinct, unsafe { slice_mut(out, len) }?)
    })
}

/// Rows of the sampling matrix for a pool preceded by `n_labeled` labeled
/// rows: source row indices and scales, `n_labeled + draw_count` each.
/// Repeated draws of a row appear as separate rows.
///
/// # Safety
/// `plan` must be a live handle; `sources` and `scales` must each hold
/// `len` elements.
#[no_mangle]
pub unsafe extern "C" fn ml_plan_sampling_rows(
    plan: *const MlPlan,
    n_labeled: usize,
    sources: *mut usize,
    scales: *mut f64,
    len: usize,
) -> MlStatus {
    guard(|| {
        let plan = unsafe { handle(plan) }?;
        let s = build_sampling_matrix(&plan.plan, &plan.dist, n_labeled, plan.p)?;
        let src: Vec<usize> = s.rows.iter().map(|r| r.source).collect();
        let sc: Vec<f64> = s.rows.iter().map(|r| r.scale).collect();
        copy_out(&src, unsafe { slice_mut(sources, len) }?)?;
        copy_out(&sc, unsafe { slice_mut(scales, len) }?)
    })
}

/// `argmin_θ ‖Aθ − y‖_p` into `theta[0..d]`.
///
/// # Safety
/// `m` must be a live handle, `y` must hold `n` doubles and `theta` `d`.
#[no_mangle]
pub unsafe extern "C" fn ml_lp_regression(
    m: *const MlMatrix,
    y: *const f64,
    n: usize,
    p: f64,
    tol: f64,
    theta: *mut f64,
    d: usize,
) -> MlStatus {
    guard(|| {
        let m = unsafe { handle(m) }?;
        let y = unsafe { slice(y, n) }?;
        let out = unsafe { slice_mut(theta, d) }?;
        copy_out(&solve_lp_regression(&m.inner, y, p, tol)?, out)
    })
}

/// Query budget from the sample-size bound.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ml_sample_size_bound(d: usize, p: f64, epsilon: f64, total_mass: f64, c: f64, out: *mut u64) -> MlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let v = sample_size_bound(d, p, epsilon, total_mass, c)?;
        // SAFETY: checked non-null.
        unsafe { *out = v };
        Ok(())
    })
}
