//! C ABI for the stratshrink library: opaque handles for parameter trees
//! and observation sets, status codes for every fallible call, and a
//! thread-local message for the last error. Estimator rules and losses are
//! passed as the same JSON used by the CLI configs, which keeps the surface
//! small and forward-compatible.
//!
//! Ownership: every `*_new`/`*_sample` call that succeeds transfers
//! ownership of the returned handle to the caller, who must release it with
//! the matching `*_free`. Output buffers are caller-allocated.

#![allow(non_camel_case_types)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};

use stratshrink::error::Error;
use stratshrink::estimators::{evaluate_rule, EstimatorRule};
use stratshrink::hierarchy::{
    build_param_tree, sample_observations_stream, HierarchySpec, ObservationSet, ParamTree,
};
use stratshrink::risk::{exact_risk_basic, mc_risk, mc_risk_diff, LossKind};

/// Status code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ss_status {
    SS_OK = 0,
    SS_NULL_POINTER = 1,
    SS_INVALID_ARGUMENT = 2,
    SS_DOMAIN_ERROR = 3,
    SS_CAPABILITY_ERROR = 4,
    SS_TRUNCATION_ERROR = 5,
    SS_NUMERIC_ERROR = 6,
    SS_PARSE_ERROR = 7,
    SS_BUFFER_TOO_SMALL = 8,
}

/// Opaque parameter tree (leaf rates plus aggregates).
pub struct ss_tree {
    inner: ParamTree,
}

/// Opaque observation set (one design `X(D')`).
pub struct ss_observations {
    inner: ObservationSet,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let cstring =
        CString::new(message).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(cstring));
}

fn status_of(err: &Error) -> ss_status {
    match err {
        Error::Shape(_) | Error::Config(_) => ss_status::SS_INVALID_ARGUMENT,
        Error::Domain(_) => ss_status::SS_DOMAIN_ERROR,
        Error::Capability(_) => ss_status::SS_CAPABILITY_ERROR,
        Error::Truncation { .. } => ss_status::SS_TRUNCATION_ERROR,
        Error::Numeric(_) | Error::Replication { .. } => ss_status::SS_NUMERIC_ERROR,
        Error::Json(_) => ss_status::SS_PARSE_ERROR,
        Error::Io(_) => ss_status::SS_NUMERIC_ERROR,
    }
}

fn fail(err: Error) -> ss_status {
    let code = status_of(&err);
    set_error(err.to_string());
    code
}

fn fail_null(what: &str) -> ss_status {
    set_error(format!("null pointer: {what}"));
    ss_status::SS_NULL_POINTER
}

/// Message for the most recent error on this thread, or NULL when the last
/// call succeeded. The pointer stays valid until the next failing call on
/// the same thread.
#[no_mangle]
pub extern "C" fn ss_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| match &*slot.borrow() {
        Some(msg) => msg.as_ptr(),
        None => std::ptr::null(),
    })
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ss_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

unsafe fn parse_json<T: serde::de::DeserializeOwned>(
    text: *const c_char,
    what: &str,
) -> Result<T, ss_status> {
    if text.is_null() {
        return Err(fail_null(what));
    }
    let text = CStr::from_ptr(text).to_str().map_err(|_| {
        set_error(format!("{what}: not valid UTF-8"));
        ss_status::SS_PARSE_ERROR
    })?;
    serde_json::from_str(text).map_err(|e| {
        set_error(format!("{what}: {e}"));
        ss_status::SS_PARSE_ERROR
    })
}

/// Builds a parameter tree from `branching[0..depth]` and
/// `leaf_rates[0..leaf_count]`; on success writes a new handle to `out`.
///
/// # Safety
/// `branching` must point to `depth` readable `uint64_t`s, `leaf_rates` to
/// `leaf_count` readable doubles, and `out` must be a valid writable slot.
#[no_mangle]
pub unsafe extern "C" fn ss_tree_new(
    branching: *const u64,
    depth: u64,
    leaf_rates: *const f64,
    leaf_count: u64,
    out: *mut *mut ss_tree,
) -> ss_status {
    if out.is_null() {
        return fail_null("out");
    }
    if branching.is_null() || leaf_rates.is_null() {
        return fail_null("branching/leaf_rates");
    }
    let branching = std::slice::from_raw_parts(branching, depth as usize);
    let leaves = std::slice::from_raw_parts(leaf_rates, leaf_count as usize);
    let spec = match HierarchySpec::new(branching.iter().map(|&n| n as usize).collect()) {
        Ok(spec) => spec,
        Err(e) => return fail(e),
    };
    match build_param_tree(&spec, leaves) {
        Ok(tree) => {
            *out = Box::into_raw(Box::new(ss_tree { inner: tree }));
            ss_status::SS_OK
        }
        Err(e) => fail(e),
    }
}

/// Releases a tree handle. NULL is accepted and ignored.
///
/// # Safety
/// `tree` must be NULL or a handle from `ss_tree_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ss_tree_free(tree: *mut ss_tree) {
    if !tree.is_null() {
        drop(Box::from_raw(tree));
    }
}

/// Number of leaves of the tree.
///
/// # Safety
/// `tree` must be a live handle, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ss_tree_leaf_count(tree: *const ss_tree, out: *mut u64) -> ss_status {
    if tree.is_null() || out.is_null() {
        return fail_null("tree/out");
    }
    *out = (*tree).inner.spec().leaf_count() as u64;
    ss_status::SS_OK
}

/// Grand total rate of the tree.
///
/// # Safety
/// `tree` must be a live handle, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ss_tree_total(tree: *const ss_tree, out: *mut f64) -> ss_status {
    if tree.is_null() || out.is_null() {
        return fail_null("tree/out");
    }
    *out = (*tree).inner.lambda_total();
    ss_status::SS_OK
}

/// Draws the observation design `X(d_prime)` from the tree using the
/// generator for `(seed, stream)`; bit-reproducible per inputs.
///
/// # Safety
/// `tree` must be a live handle, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ss_sample_observations(
    tree: *const ss_tree,
    d_prime: u64,
    seed: u64,
    stream: u64,
    out: *mut *mut ss_observations,
) -> ss_status {
    if tree.is_null() || out.is_null() {
        return fail_null("tree/out");
    }
    match sample_observations_stream(&(*tree).inner, d_prime as usize, seed, stream) {
        Ok(obs) => {
            *out = Box::into_raw(Box::new(ss_observations { inner: obs }));
            ss_status::SS_OK
        }
        Err(e) => fail(e),
    }
}

/// Releases an observation handle. NULL is accepted and ignored.
///
/// # Safety
/// `obs` must be NULL or a handle from `ss_sample_observations` not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn ss_observations_free(obs: *mut ss_observations) {
    if !obs.is_null() {
        drop(Box::from_raw(obs));
    }
}

/// Count at node `(depth, index)` of the design.
///
/// # Safety
/// `obs` must be a live handle, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ss_observations_count(
    obs: *const ss_observations,
    depth: u64,
    index: u64,
    out: *mut u64,
) -> ss_status {
    if obs.is_null() || out.is_null() {
        return fail_null("obs/out");
    }
    let inner = &(*obs).inner;
    let spec = inner.spec();
    if depth as usize > spec.depth() || index as usize >= spec.level_width(depth as usize) {
        set_error(format!("node ({depth}, {index}) out of range"));
        return ss_status::SS_INVALID_ARGUMENT;
    }
    *out = inner.count(depth as usize, index as usize);
    ss_status::SS_OK
}

/// Applies an estimator rule (JSON, same schema as the CLI configs, e.g.
/// `{"rule":"basic_shrink_gb"}`) to the observations and writes the leaf
/// estimates into `out_values[0..capacity]`; `out_len` receives the number
/// of leaves.
///
/// # Safety
/// `obs` must be a live handle; `rule_json` a NUL-terminated string;
/// `out_values` writable for `capacity` doubles; `out_len` writable.
#[no_mangle]
pub unsafe extern "C" fn ss_estimate_json(
    obs: *const ss_observations,
    rule_json: *const c_char,
    out_values: *mut f64,
    capacity: u64,
    out_len: *mut u64,
) -> ss_status {
    if obs.is_null() || out_values.is_null() || out_len.is_null() {
        return fail_null("obs/out_values/out_len");
    }
    let rule: EstimatorRule = match parse_json(rule_json, "rule_json") {
        Ok(rule) => rule,
        Err(code) => return code,
    };
    match evaluate_rule(&rule, &(*obs).inner) {
        Ok(estimate) => {
            let n = estimate.values.len() as u64;
            *out_len = n;
            if n > capacity {
                set_error(format!("need capacity {n}, got {capacity}"));
                return ss_status::SS_BUFFER_TOO_SMALL;
            }
            std::ptr::copy_nonoverlapping(estimate.values.as_ptr(), out_values, n as usize);
            ss_status::SS_OK
        }
        Err(e) => fail(e),
    }
}

fn loss_of(name: &str) -> Option<LossKind> {
    match name {
        "sse" => Some(LossKind::Sse),
        "entropy" => Some(LossKind::Entropy),
        "balanced_entropy" => Some(LossKind::BalancedEntropy),
        _ => None,
    }
}

unsafe fn parse_loss(loss: *const c_char) -> Result<LossKind, ss_status> {
    if loss.is_null() {
        return Err(fail_null("loss"));
    }
    let text = CStr::from_ptr(loss).to_str().map_err(|_| {
        set_error("loss: not valid UTF-8".into());
        ss_status::SS_PARSE_ERROR
    })?;
    loss_of(text).ok_or_else(|| {
        set_error(format!(
            "unknown loss {text:?} (expected sse, entropy, balanced_entropy)"
        ));
        ss_status::SS_INVALID_ARGUMENT
    })
}

/// Monte Carlo risk of a rule on the tree: `reps` paired replications with
/// per-replication RNG streams derived from `seed`.
///
/// # Safety
/// `tree` must be a live handle; `rule_json` and `loss` NUL-terminated
/// strings; `out_mean`/`out_stderr` writable.
#[no_mangle]
pub unsafe extern "C" fn ss_mc_risk_json(
    tree: *const ss_tree,
    rule_json: *const c_char,
    loss: *const c_char,
    reps: u64,
    seed: u64,
    out_mean: *mut f64,
    out_stderr: *mut f64,
) -> ss_status {
    if tree.is_null() || out_mean.is_null() || out_stderr.is_null() {
        return fail_null("tree/out");
    }
    let rule: EstimatorRule = match parse_json(rule_json, "rule_json") {
        Ok(rule) => rule,
        Err(code) => return code,
    };
    let loss = match parse_loss(loss) {
        Ok(loss) => loss,
        Err(code) => return code,
    };
    match mc_risk(&(*tree).inner, &rule, loss, reps, seed) {
        Ok(est) => {
            *out_mean = est.mean;
            *out_stderr = est.stderr;
            ss_status::SS_OK
        }
        Err(e) => fail(e),
    }
}

/// Paired Monte Carlo risk difference `risk(rule_a) - risk(rule_b)` with
/// common random numbers.
///
/// # Safety
/// As for `ss_mc_risk_json`.
#[no_mangle]
pub unsafe extern "C" fn ss_mc_risk_diff_json(
    tree: *const ss_tree,
    rule_a_json: *const c_char,
    rule_b_json: *const c_char,
    loss: *const c_char,
    reps: u64,
    seed: u64,
    out_mean: *mut f64,
    out_stderr: *mut f64,
) -> ss_status {
    if tree.is_null() || out_mean.is_null() || out_stderr.is_null() {
        return fail_null("tree/out");
    }
    let rule_a: EstimatorRule = match parse_json(rule_a_json, "rule_a_json") {
        Ok(rule) => rule,
        Err(code) => return code,
    };
    let rule_b: EstimatorRule = match parse_json(rule_b_json, "rule_b_json") {
        Ok(rule) => rule,
        Err(code) => return code,
    };
    let loss = match parse_loss(loss) {
        Ok(loss) => loss,
        Err(code) => return code,
    };
    match mc_risk_diff(&(*tree).inner, &rule_a, &rule_b, loss, reps, seed) {
        Ok(est) => {
            *out_mean = est.mean;
            *out_stderr = est.stderr;
            ss_status::SS_OK
        }
        Err(e) => fail(e),
    }
}

/// Exact truncated-series risk of a basic-model rule at total rate
/// `lambda`, with a rigorous bound on the discarded tail.
///
/// # Safety
/// `rule_json` must be a NUL-terminated string; `out_value`/`out_bound`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ss_exact_risk_basic_json(
    rule_json: *const c_char,
    m: u64,
    lambda: f64,
    tol: f64,
    out_value: *mut f64,
    out_bound: *mut f64,
) -> ss_status {
    if out_value.is_null() || out_bound.is_null() {
        return fail_null("out");
    }
    let rule: EstimatorRule = match parse_json(rule_json, "rule_json") {
        Ok(rule) => rule,
        Err(code) => return code,
    };
    match exact_risk_basic(&rule, m as usize, lambda, tol) {
        Ok(exact) => {
            *out_value = exact.value;
            *out_bound = exact.truncation_bound;
            ss_status::SS_OK
        }
        Err(e) => fail(e),
    }
}
