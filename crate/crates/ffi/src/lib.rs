//! C interface to `extremal_order`.
//!
//! Objects cross the boundary as opaque handles that the caller releases
//! with the matching `*_free` function. Every fallible call returns an
//! [`EoStatus`]; on failure a description is available from
//! [`eo_last_error_message`] on the same thread. Node labels are 1-based.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use extremal_order::data::{load_csv, LoadConfig};
use extremal_order::metrics::sid_of_order;
use extremal_order::{
    causal_order, pit_frechet2, sid, simulate, AlgoParams, Dag, Error, LsemModel, Margins,
    OrderingResult, SampleMatrix,
};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidNode = 3,
    InvalidGraph = 4,
    ThresholdOutOfRange = 5,
    Parse = 6,
    Io = 7,
    Numerical = 8,
    Panic = 9,
}

/// Samples, `n` rows by `d` nodes.
pub struct EoSample {
    inner: SampleMatrix,
}

pub struct EoDag {
    inner: Dag,
}

pub struct EoModel {
    inner: LsemModel,
}

pub struct EoOrdering {
    inner: OrderingResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> EoStatus {
    match err {
        Error::InvalidNode { .. } | Error::NotPermutation(_) => EoStatus::InvalidNode,
        Error::EmptyGraph
        | Error::SelfLoop(_)
        | Error::DuplicateEdge(..)
        | Error::Cycle
        | Error::PathCapExceeded { .. }
        | Error::NotAncestrallyClosed(_) => EoStatus::InvalidGraph,
        Error::ThresholdOutOfRange { .. } => EoStatus::ThresholdOutOfRange,
        Error::Parse(_) | Error::MissingValue { .. } | Error::Csv(_) | Error::Json(_) => EoStatus::Parse,
        Error::Io(_) => EoStatus::Io,
        Error::ZeroRow(_) | Error::ZeroColumn(_) => EoStatus::Numerical,
        _ => EoStatus::InvalidArgument,
    }
}

enum Failure {
    Null(&'static str),
    Arg(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `f`, translating errors and panics into a status.
fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> EoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EoStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            EoStatus::NullPointer
        }
        Ok(Err(Failure::Arg(msg))) => {
            set_error(msg);
            EoStatus::InvalidArgument
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            EoStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn c_str<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Arg(format!("{what} is not valid UTF-8")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure::Arg("string contains a NUL byte".into()))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message of the last failed call on this thread, or NULL. Owned by the
/// library and valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn eo_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn eo_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Sample from `n * d` row-major values. `standardized` marks Fréchet(2) margins.
///
/// # Safety
/// `values` must point to `n * d` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eo_sample_new(
    n: usize,
    d: usize,
    values: *const f64,
    standardized: bool,
    out: *mut *mut EoSample,
) -> EoStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let len = n.checked_mul(d).ok_or_else(|| Failure::Arg("n * d overflows".into()))?;
        let vals = slice(values, len, "values")?.to_vec();
        let margins = if standardized { Margins::Frechet2 } else { Margins::Raw };
        *out = boxed(EoSample {
            inner: SampleMatrix::new(n, d, vals, margins)?,
        });
        Ok(())
    })
}

/// Reads a numeric CSV file, one column per node.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eo_sample_load_csv(
    path: *const c_char,
    has_header: bool,
    out: *mut *mut EoSample,
) -> EoStatus {
    guard(|| {
        let path = c_str(path, "path")?;
        let out = out_ptr(out, "out")?;
        let cfg = LoadConfig {
            has_header,
            ..Default::default()
        };
        *out = boxed(EoSample {
            inner: load_csv(path, &cfg)?.to_sample()?,
        });
        Ok(())
    })
}

/// # Safety
/// `sample` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn eo_sample_free(sample: *mut EoSample) {
    if !sample.is_null() {
        drop(Box::from_raw(sample));
    }
}

/// # Safety
/// `sample` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn eo_sample_shape(sample: *const EoSample, n: *mut usize, d: *mut usize) -> EoStatus {
    guard(|| {
        let s = &deref(sample, "sample")?.inner;
        *out_ptr(n, "n")? = s.n();
        *out_ptr(d, "d")? = s.d();
        Ok(())
    })
}

/// Copies the row-major values into `buf` of length `len >= n * d`.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn eo_sample_values(sample: *const EoSample, buf: *mut f64, len: usize) -> EoStatus {
    guard(|| {
        let s = &deref(sample, "sample")?.inner;
        let vals = s.values();
        if len < vals.len() {
            return Err(Failure::Arg(format!("buffer of {len} for {} values", vals.len())));
        }
        if buf.is_null() {
            return Err(Failure::Null("buf"));
        }
        std::slice::from_raw_parts_mut(buf, vals.len()).copy_from_slice(vals);
        Ok(())
    })
}

/// Rank transform to Fréchet(2) margins.
///
/// # Safety
/// `sample` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eo_sample_standardize(sample: *const EoSample, out: *mut *mut EoSample) -> EoStatus {
    guard(|| {
        let s = &deref(sample, "sample")?.inner;
        let out = out_ptr(out, "out")?;
        *out = boxed(EoSample { inner: pit_frechet2(s) });
        Ok(())
    })
}

/// DAG on nodes `1..=d` from `n_edges` pairs `(from, to)` in `edges`.
///
/// # Safety
/// `edges` must point to `2 * n_edges` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eo_dag_new(d: usize, edges: *const usize, n_edges: usize, out: *mut *mut EoDag) -> EoStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let len = n_edges
            .checked_mul(2)
            .ok_or_else(|| Failure::Arg("edge count overflows".into()))?;
        let flat = slice(edges, len, "edges")?;
        let pairs: Vec<(usize, usize)> = flat.chunks(2).map(|e| (e[0], e[1])).collect();
        *out = boxed(EoDag {
            inner: Dag::new(d, &pairs)?,
        });
        Ok(())
    })
}

/// Parses the edge-list text format (first line `d`, then `from to` lines).
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eo_dag_from_text(text: *const c_char, out: *mut *mut EoDag) -> EoStatus {
    guard(|| {
        let text = c_str(text, "text")?;
        let out = out_ptr(out, "out")?;
        *out = boxed(EoDag {
            inner: Dag::from_text(text)?,
        });
        Ok(())
    })
}

/// Edge-list text; release with `eo_string_free`.
///
/// # Safety
/// `dag` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eo_dag_to_text(dag: *const EoDag, out: *mut *mut c_char) -> EoStatus {
    guard(|| {
        let g = &deref(dag, "dag")?.inner;
        *out_ptr(out, "out")? = into_c_string(g.to_text())?;
        Ok(())
    })
}

/// # Safety
/// `dag` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn eo_dag_node_count(dag: *const EoDag, d: *mut usize) -> EoStatus {
    guard(|| {
        *out_ptr(d, "d")? = deref(dag, "dag")?.inner.d();
        Ok(())
    })
}

/// # Safety
/// `dag` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn eo_dag_free(dag: *mut EoDag) {
    if !dag.is_null() {
        drop(Box::from_raw(dag));
    }
}

/// Random model: Bernoulli(`p`) edges, uniform weights, seeded.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eo_model_random(d: usize, p: f64, alpha: f64, seed: u64, out: *mut *mut EoModel) -> EoStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        *out = boxed(EoModel {
            inner: LsemModel::random(d, p, alpha, &mut rng)?,
        });
        Ok(())
    })
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eo_model_from_json(json: *const c_char, out: *mut *mut EoModel) -> EoStatus {
    guard(|| {
        let json = c_str(json, "json")?;
        let out = out_ptr(out, "out")?;
        *out = boxed(EoModel {
            inner: LsemModel::from_json(json)?,
        });
        Ok(())
    })
}

/// Model JSON; release with `eo_string_free`.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eo_model_to_json(model: *const EoModel, out: *mut *mut c_char) -> EoStatus {
    guard(|| {
        let m = &deref(model, "model")?.inner;
        *out_ptr(out, "out")? = into_c_string(m.to_json()?)?;
        Ok(())
    })
}

/// Copy of the model's DAG.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eo_model_dag(model: *const EoModel, out: *mut *mut EoDag) -> EoStatus {
    guard(|| {
        let m = &deref(model, "model")?.inner;
        *out_ptr(out, "out")? = boxed(EoDag { inner: m.dag().clone() });
        Ok(())
    })
}

/// `n` draws of the row-standardised model with raw margins, seeded.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eo_model_simulate(model: *const EoModel, n: usize, seed: u64, out: *mut *mut EoSample) -> EoStatus {
    guard(|| {
        let m = &deref(model, "model")?.inner;
        let out = out_ptr(out, "out")?;
        let abar = m.coefficient_matrix().standardize(m.alpha())?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        *out = boxed(EoSample {
            inner: simulate(&abar, n, m.alpha(), &mut rng)?,
        });
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn eo_model_free(model: *mut EoModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Estimates a causal order. `k = 0` selects `floor(n^0.4)`.
///
/// # Safety
/// `sample` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eo_causal_order(
    sample: *const EoSample,
    a: f64,
    epsilon: f64,
    k: usize,
    out: *mut *mut EoOrdering,
) -> EoStatus {
    guard(|| {
        let s = &deref(sample, "sample")?.inner;
        let out = out_ptr(out, "out")?;
        let params = AlgoParams::new(a, epsilon, (k > 0).then_some(k))?;
        *out = boxed(EoOrdering {
            inner: causal_order(s, &params)?,
        });
        Ok(())
    })
}

/// Writes the roots-first order into `buf` (length `len >= d`).
///
/// # Safety
/// `ordering` must be a live handle; `buf` must point to `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn eo_ordering_ancestral(ordering: *const EoOrdering, buf: *mut usize, len: usize) -> EoStatus {
    guard(|| {
        let o = deref(ordering, "ordering")?.inner.ancestral_order();
        if len < o.len() {
            return Err(Failure::Arg(format!("buffer of {len} for {} nodes", o.len())));
        }
        if buf.is_null() {
            return Err(Failure::Null("buf"));
        }
        std::slice::from_raw_parts_mut(buf, o.len()).copy_from_slice(&o);
        Ok(())
    })
}

/// # Safety
/// `ordering` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn eo_ordering_len(ordering: *const EoOrdering, len: *mut usize) -> EoStatus {
    guard(|| {
        *out_ptr(len, "len")? = deref(ordering, "ordering")?.inner.ordering.len();
        Ok(())
    })
}

/// Full result with audit trail as JSON; release with `eo_string_free`.
///
/// # Safety
/// `ordering` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eo_ordering_to_json(ordering: *const EoOrdering, out: *mut *mut c_char) -> EoStatus {
    guard(|| {
        let o = &deref(ordering, "ordering")?.inner;
        *out_ptr(out, "out")? = into_c_string(o.to_json()?)?;
        Ok(())
    })
}

/// # Safety
/// `ordering` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn eo_ordering_free(ordering: *mut EoOrdering) {
    if !ordering.is_null() {
        drop(Box::from_raw(ordering));
    }
}

/// Structural intervention distance between two DAGs.
///
/// # Safety
/// Handles must be live; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn eo_sid(truth: *const EoDag, estimate: *const EoDag, raw: *mut usize, normalized: *mut f64) -> EoStatus {
    guard(|| {
        let score = sid(&deref(truth, "truth")?.inner, &deref(estimate, "estimate")?.inner)?;
        *out_ptr(raw, "raw")? = score.raw;
        *out_ptr(normalized, "normalized")? = score.normalized;
        Ok(())
    })
}

/// SID of the complete DAG induced by a roots-first order of length `len`.
///
/// # Safety
/// `truth` must be live; `order` must point to `len` values; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn eo_sid_of_order(
    truth: *const EoDag,
    order: *const usize,
    len: usize,
    raw: *mut usize,
    normalized: *mut f64,
) -> EoStatus {
    guard(|| {
        let g = &deref(truth, "truth")?.inner;
        let score = sid_of_order(g, slice(order, len, "order")?)?;
        *out_ptr(raw, "raw")? = score.raw;
        *out_ptr(normalized, "normalized")? = score.normalized;
        Ok(())
    })
}
