//! C ABI for the shufflehist library.
//!
//! Handles (`ShDataset`, `ShEstimate`) are opaque pointers owned by Rust;
//! every constructor has a matching `_free`. All functions return an
//! [`ShStatus`] code and write results through out-pointers. Passing NULL
//! where a value is required yields `SH_STATUS_NULL_ARGUMENT`, never a crash.

use shufflehist::error::Error;
use shufflehist::params::{self, Mode};
use shufflehist::protocol::{run_protocol_sparse, Dataset, Estimate, ProtocolParams};
use shufflehist::{audit, harness, topk};

/// Result codes for every API call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShStatus {
    Ok = 0,
    NullArgument = 1,
    /// An argument violated a structural precondition.
    Domain = 2,
    /// No valid protocol configuration exists for the requested parameters.
    Infeasible = 3,
    /// Parameters fall outside the analyzed regime.
    OutOfRegime = 4,
    /// A resource cap (enumeration size, memory budget) was exceeded.
    Resource = 5,
    Io = 6,
    Parse = 7,
}

fn status_of(err: &Error) -> ShStatus {
    match err {
        Error::Domain(_) => ShStatus::Domain,
        Error::Infeasible(_) => ShStatus::Infeasible,
        Error::OutOfRegime(_) => ShStatus::OutOfRegime,
        Error::Resource(_) => ShStatus::Resource,
        Error::Io(_) => ShStatus::Io,
        Error::Parse(_) => ShStatus::Parse,
    }
}

/// An input dataset: `n` items, each a bin id in `[1, d]`.
pub struct ShDataset(Dataset);

/// De-biased frequency estimates from one protocol execution.
pub struct ShEstimate(Estimate);

/// A solved protocol configuration.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct ShSolvedParams {
    /// Fabricated messages per user.
    pub k: u32,
    /// Flip probability (max of the privacy root and the concentration floor).
    pub q: f64,
    /// Root of the privacy quadratic.
    pub q_hat: f64,
    /// Concentration floor.
    pub q_tilde: f64,
    /// De-bias factor 1/(1-2q).
    pub scale: f64,
    /// 90%-confidence error bound for the requested mode.
    pub bound: f64,
}

unsafe fn write_out<T>(out: *mut T, value: T) -> ShStatus {
    if out.is_null() {
        return ShStatus::NullArgument;
    }
    unsafe { out.write(value) };
    ShStatus::Ok
}

/// Create a dataset of `n` i.i.d. draws from Zipf(`s`) truncated to `[1, d]`,
/// deterministic in `seed`. On success writes a handle the caller must
/// release with `sh_dataset_free`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn sh_dataset_zipf(
    n: usize,
    d: usize,
    s: f64,
    seed: u64,
    out: *mut *mut ShDataset,
) -> ShStatus {
    match harness::synth_zipf(n, d, s, seed) {
        Ok(data) => unsafe { write_out(out, Box::into_raw(Box::new(ShDataset(data)))) },
        Err(err) => status_of(&err),
    }
}

/// Create a dataset from `len` bin ids in `[1, d]`.
///
/// # Safety
/// `items` must point to `len` readable `uint32_t`s; `out` as above.
#[no_mangle]
pub unsafe extern "C" fn sh_dataset_from_items(
    items: *const u32,
    len: usize,
    d: usize,
    out: *mut *mut ShDataset,
) -> ShStatus {
    if items.is_null() {
        return ShStatus::NullArgument;
    }
    let slice = unsafe { std::slice::from_raw_parts(items, len) };
    match Dataset::new(slice.to_vec(), d) {
        Ok(data) => unsafe { write_out(out, Box::into_raw(Box::new(ShDataset(data)))) },
        Err(err) => status_of(&err),
    }
}

/// Number of users in the dataset; 0 for NULL.
///
/// # Safety
/// `ds` must be NULL or a live handle from a dataset constructor.
#[no_mangle]
pub unsafe extern "C" fn sh_dataset_len(ds: *const ShDataset) -> usize {
    if ds.is_null() {
        return 0;
    }
    unsafe { &*ds }.0.n()
}

/// Release a dataset handle. NULL is a no-op.
///
/// # Safety
/// `ds` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sh_dataset_free(ds: *mut ShDataset) {
    if !ds.is_null() {
        drop(unsafe { Box::from_raw(ds) });
    }
}

fn mode_for(max_mode: bool, d: usize) -> Mode {
    if max_mode {
        Mode::Maximum { d }
    } else {
        Mode::PerBin
    }
}

/// Smallest feasible number of fabricated messages per user for the budget.
/// `max_mode` selects the maximum-error schedule over `d` bins; otherwise the
/// per-bin schedule is used and `d` is ignored.
///
/// # Safety
/// `out_k` must point to writable storage for one `uint32_t`.
#[no_mangle]
pub unsafe extern "C" fn sh_min_k(
    eps: f64,
    delta: f64,
    n: usize,
    max_mode: bool,
    d: usize,
    out_k: *mut u32,
) -> ShStatus {
    match params::min_k(eps, delta, n, mode_for(max_mode, d)) {
        Ok(k) => unsafe { write_out(out_k, k) },
        Err(err) => status_of(&err),
    }
}

/// Solve the flip probability and error bound; `k = 0` requests the smallest
/// feasible value.
///
/// # Safety
/// `out` must point to writable storage for one `ShSolvedParams`.
#[no_mangle]
pub unsafe extern "C" fn sh_solve_params(
    eps: f64,
    delta: f64,
    n: usize,
    k: u32,
    max_mode: bool,
    d: usize,
    out: *mut ShSolvedParams,
) -> ShStatus {
    let mode = mode_for(max_mode, d);
    let k = if k == 0 {
        match params::min_k(eps, delta, n, mode) {
            Ok(k) => k,
            Err(err) => return status_of(&err),
        }
    } else {
        k
    };
    match params::solve_q(eps, delta, n, k, mode) {
        Ok(sol) => unsafe {
            write_out(
                out,
                ShSolvedParams {
                    k: sol.k,
                    q: sol.q,
                    q_hat: sol.q_hat,
                    q_tilde: sol.q_tilde,
                    scale: sol.scale,
                    bound: sol.bound,
                },
            )
        },
        Err(err) => status_of(&err),
    }
}

/// Run the bit-flip protocol (index-list pipeline, maximum-error schedule)
/// on the dataset; `k = 0` requests the smallest feasible value. On success
/// writes an estimate handle the caller must release with
/// `sh_estimate_free`.
///
/// # Safety
/// `ds` must be a live dataset handle; `out` as in the constructors.
#[no_mangle]
pub unsafe extern "C" fn sh_run_flip(
    ds: *const ShDataset,
    eps: f64,
    delta: f64,
    k: u32,
    seed: u64,
    out: *mut *mut ShEstimate,
) -> ShStatus {
    if ds.is_null() {
        return ShStatus::NullArgument;
    }
    let data = &unsafe { &*ds }.0;
    let mode = Mode::Maximum { d: data.d() };
    let k = if k == 0 {
        match params::min_k(eps, delta, data.n(), mode) {
            Ok(k) => k,
            Err(err) => return status_of(&err),
        }
    } else {
        k
    };
    let run = params::solve_q(eps, delta, data.n(), k, mode)
        .and_then(|sol| ProtocolParams::new(data.n(), data.d(), eps, delta, k, sol.q))
        .and_then(|p| run_protocol_sparse(data, &p, seed));
    match run {
        Ok(est) => unsafe { write_out(out, Box::into_raw(Box::new(ShEstimate(est)))) },
        Err(err) => status_of(&err),
    }
}

/// Number of bins in the estimate; 0 for NULL.
///
/// # Safety
/// `est` must be NULL or a live estimate handle.
#[no_mangle]
pub unsafe extern "C" fn sh_estimate_len(est: *const ShEstimate) -> usize {
    if est.is_null() {
        return 0;
    }
    unsafe { &*est }.0.z.len()
}

/// Copy the `d` per-bin estimates into `out` (which must hold `len >= d`
/// doubles).
///
/// # Safety
/// `est` must be a live estimate handle; `out` must point to `len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn sh_estimate_values(
    est: *const ShEstimate,
    out: *mut f64,
    len: usize,
) -> ShStatus {
    if est.is_null() || out.is_null() {
        return ShStatus::NullArgument;
    }
    let z = &unsafe { &*est }.0.z;
    if len < z.len() {
        return ShStatus::Domain;
    }
    unsafe { std::ptr::copy_nonoverlapping(z.as_ptr(), out, z.len()) };
    ShStatus::Ok
}

/// Largest absolute deviation of the estimate from the dataset's exact
/// histogram.
///
/// # Safety
/// `est` and `ds` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sh_estimate_max_error(
    est: *const ShEstimate,
    ds: *const ShDataset,
    out: *mut f64,
) -> ShStatus {
    if est.is_null() || ds.is_null() {
        return ShStatus::NullArgument;
    }
    let estimate = &unsafe { &*est }.0;
    let data = &unsafe { &*ds }.0;
    if estimate.z.len() != data.d() {
        return ShStatus::Domain;
    }
    unsafe { write_out(out, estimate.max_error(&data.histogram())) }
}

/// Release an estimate handle. NULL is a no-op.
///
/// # Safety
/// `est` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sh_estimate_free(est: *mut ShEstimate) {
    if !est.is_null() {
        drop(unsafe { Box::from_raw(est) });
    }
}

/// Tight additive privacy slack of the reduced two-bit mechanism at level
/// `eps`, by exact enumeration (`m` capped at `cap`; pass 0 for the default
/// cap of 200).
///
/// # Safety
/// `out_delta` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sh_audit_reduced_mechanism(
    m: u64,
    q: f64,
    eps: f64,
    cap: usize,
    out_delta: *mut f64,
) -> ShStatus {
    let cap = if cap == 0 {
        audit::DEFAULT_ENUM_CAP
    } else {
        cap
    };
    match audit::audit_b_with_cap(m, q, eps, cap) {
        Ok(delta) => unsafe { write_out(out_delta, delta) },
        Err(err) => status_of(&err),
    }
}

/// The 90%-confidence top-t approximation gap at the given parameters.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sh_top_t_alpha_bound(
    n: usize,
    k: u32,
    q: f64,
    d: usize,
    out: *mut f64,
) -> ShStatus {
    if n == 0 || d == 0 || !(0.0..0.5).contains(&q) {
        return ShStatus::Domain;
    }
    unsafe { write_out(out, topk::alpha_bound(n, k, q, d)) }
}
