//! C ABI for the ternaccel kernels, latency model and swap simulator.
//!
//! Every fallible call returns a [`TaStatus`]. On failure the message is kept
//! per thread and can be read with [`ta_last_error_message`]. Objects cross
//! the boundary as opaque handles and must be released with their `_free`
//! function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::slice;

use ternaccel::attention::{
    decode_attention, flash_attention_prefill, make_forward_schedule, make_reverse_schedule, AttentionInputs,
    KvCache, Matrix,
};
use ternaccel::commands::load_model;
use ternaccel::config::from_toml_str;
use ternaccel::dse::DesignPoint;
use ternaccel::perf::{effective_kv_bandwidth, PhaseLatencyModel, PortMap, PortRole};
use ternaccel::sim::{overhead_report, simulate_end_to_end, ModelShape, ReconfigParams, Trigger};
use ternaccel::tlmm::{pack_weights, tlmm_gemv, ActivationVector, PackedWeights, TernaryMatrix};
use ternaccel::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Parse = 4,
    Io = 5,
    Infeasible = 6,
    Calibration = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaPortRole {
    Q = 0,
    K = 1,
    V = 2,
    Out = 3,
    Shared = 4,
}

/// Where the swap starts relative to prefill.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaTrigger {
    /// No swap: the static design.
    None = 0,
    AfterLastAttention = 1,
    AfterPrefillComplete = 2,
}

/// Ternary weights packed for table-lookup matmul.
pub struct TaPacked(PackedWeights);

/// A calibrated latency model together with its baseline design.
pub struct TaModel(PhaseLatencyModel);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TaSimSummary {
    pub prefill_end_s: f64,
    pub exposed_s: f64,
    pub ttft_s: f64,
    pub decode_tps: f64,
    /// 1 when there is no swap.
    pub hidden_fraction: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> TaStatus {
    match e {
        Error::InvalidParameter { .. } | Error::Config { .. } | Error::UnknownKeys(_) | Error::IllegalSchedule(_) => {
            TaStatus::InvalidArgument
        }
        Error::DimensionMismatch { .. } | Error::EmptyCache => TaStatus::DimensionMismatch,
        Error::Format { .. } => TaStatus::Parse,
        Error::Io { .. } => TaStatus::Io,
        Error::Infeasible(_) | Error::NoFeasibleDesign { .. } | Error::NoRoutableDesign(_) => TaStatus::Infeasible,
        Error::RankDeficient(_) | Error::BadCalibration(_) => TaStatus::Calibration,
        Error::NoReconfigEvents => TaStatus::InvalidArgument,
    }
}

struct Fail(TaStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(TaStatus::NullPointer, format!("`{what}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> TaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TaStatus::Ok,
        Ok(Err(Fail(s, msg))) => {
            set_error(&msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            TaStatus::Panic
        }
    }
}

/// # Safety
/// `p` must be null or valid for `len` reads.
unsafe fn input<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be null or valid for `len` writes.
unsafe fn output<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

/// # Safety
/// `s` must be null or a NUL-terminated string.
unsafe fn text<'a>(s: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Fail(TaStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
}

fn area(rows: usize, cols: usize) -> Result<usize, Fail> {
    rows.checked_mul(cols)
        .ok_or_else(|| Fail(TaStatus::InvalidArgument, "size overflows".into()))
}

/// Message for the last failed call on this thread. Empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ta_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn ta_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Packs a row-major `rows × cols` matrix of -1/0/+1 into groups of
/// `group_size` (1 to 6).
///
/// # Safety
/// `weights` must hold `rows * cols` values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ta_packed_new(
    weights: *const i8,
    rows: usize,
    cols: usize,
    group_size: usize,
    out: *mut *mut TaPacked,
) -> TaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let w = input(weights, area(rows, cols)?, "weights")?;
        let m = TernaryMatrix::new(rows, cols, w.to_vec())?;
        let p = pack_weights(&m, group_size)?;
        *out = Box::into_raw(Box::new(TaPacked(p)));
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a handle from [`ta_packed_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ta_packed_free(p: *mut TaPacked) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// # Safety
/// `p` must be null or a live handle; `rows` and `cols` may be null.
#[no_mangle]
pub unsafe extern "C" fn ta_packed_shape(p: *const TaPacked, rows: *mut usize, cols: *mut usize) -> TaStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("packed"))?;
        if !rows.is_null() {
            *rows = p.0.rows();
        }
        if !cols.is_null() {
            *cols = p.0.cols();
        }
        Ok(())
    })
}

/// `y = W·x` over INT8 activations with exact INT32 accumulation.
///
/// # Safety
/// `x` must hold `x_len` values and `y` must have room for `y_len`.
#[no_mangle]
pub unsafe extern "C" fn ta_packed_gemv(
    p: *const TaPacked,
    x: *const i8,
    x_len: usize,
    y: *mut i32,
    y_len: usize,
) -> TaStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("packed"))?;
        let x = input(x, x_len, "x")?;
        if y_len != p.0.rows() {
            return Err(Error::DimensionMismatch {
                context: "output length",
                expected: p.0.rows(),
                actual: y_len,
            }
            .into());
        }
        let r = tlmm_gemv(&p.0, &ActivationVector::new(x.to_vec(), 1.0))?;
        output(y, y_len, "y")?.copy_from_slice(&r);
        Ok(())
    })
}

fn model_from(m: PhaseLatencyModel, out: *mut *mut TaModel) -> Result<(), Fail> {
    m.validate()?;
    // SAFETY: checked non-null by the callers.
    unsafe { *out = Box::into_raw(Box::new(TaModel(m))) };
    Ok(())
}

/// Parses a latency model from the TOML text written by `calibrate`.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ta_model_from_toml(toml: *const c_char, out: *mut *mut TaModel) -> TaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        model_from(from_toml_str(text(toml, "toml")?, "latency model")?, out)
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ta_model_load(path: *const c_char, out: *mut *mut TaModel) -> TaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        model_from(load_model(Path::new(text(path, "path")?))?, out)
    })
}

/// # Safety
/// `m` must be null or a handle from `ta_model_*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ta_model_free(m: *mut TaModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Prefill latency in seconds of the model's baseline design.
///
/// # Safety
/// `m` must be a live handle and `seconds` writable.
#[no_mangle]
pub unsafe extern "C" fn ta_model_prefill_latency(m: *const TaModel, seq_len: u64, seconds: *mut f64) -> TaStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("model"))?;
        let s = seconds.as_mut().ok_or_else(|| null("seconds"))?;
        *s = m.0.prefill_latency(&m.0.baseline, seq_len)?;
        Ok(())
    })
}

/// Latency in seconds of one decode step over `seq_len` cached tokens.
///
/// # Safety
/// `m` must be a live handle and `seconds` writable.
#[no_mangle]
pub unsafe extern "C" fn ta_model_decode_latency(m: *const TaModel, seq_len: u64, seconds: *mut f64) -> TaStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("model"))?;
        let s = seconds.as_mut().ok_or_else(|| null("seconds"))?;
        *s = m.0.decode_step_latency(&m.0.baseline, seq_len)?;
        Ok(())
    })
}

/// Simulates one request on the model's baseline design.
///
/// # Safety
/// `m` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ta_simulate(
    m: *const TaModel,
    prompt_len: u64,
    n_gen: u64,
    n_layers: usize,
    ffn_fraction: f64,
    t_reconfig: f64,
    trigger: TaTrigger,
    out: *mut TaSimSummary,
) -> TaStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("model"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let shape = ModelShape { n_layers, ffn_fraction };
        let rp = match trigger {
            TaTrigger::None => None,
            TaTrigger::AfterLastAttention => Some(ReconfigParams::new(t_reconfig, Trigger::AfterLastAttention)?),
            TaTrigger::AfterPrefillComplete => Some(ReconfigParams::new(t_reconfig, Trigger::AfterPrefillComplete)?),
        };
        let d = DesignPoint::new(m.0.baseline.clone());
        let r = simulate_end_to_end(&m.0, &shape, &d, prompt_len, n_gen, rp.as_ref())?;
        let hidden = match &rp {
            Some(rp) => overhead_report(&r.timeline, rp)?.hidden_fraction,
            None => 1.0,
        };
        *out = TaSimSummary {
            prefill_end_s: r.prefill_end,
            exposed_s: r.exposed_overhead,
            ttft_s: r.ttft,
            decode_tps: r.decode_throughput,
            hidden_fraction: hidden,
        };
        Ok(())
    })
}

/// Causal blocked attention over row-major `n × d` Q, K and V. `reverse`
/// selects the reverse wave schedule, otherwise K blocks run in order.
///
/// # Safety
/// `q`, `k`, `v` and `out` must each hold `n * d` floats.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn ta_flash_attention(
    q: *const f32,
    k: *const f32,
    v: *const f32,
    n: usize,
    d: usize,
    block_size: usize,
    n_pe: usize,
    reverse: bool,
    out: *mut f32,
) -> TaStatus {
    guard(|| {
        let len = area(n, d)?;
        let mat = |p, what| -> Result<Matrix, Fail> { Ok(Matrix::from_vec(n, d, input(p, len, what)?.to_vec())?) };
        let inp = AttentionInputs::new(mat(q, "q")?, mat(k, "k")?, mat(v, "v")?, true)?;
        if block_size == 0 {
            return Err(Fail(TaStatus::InvalidArgument, "block_size must be positive".into()));
        }
        let blocks = n.div_ceil(block_size);
        let s = if reverse {
            make_reverse_schedule(blocks, n_pe)?
        } else {
            make_forward_schedule(blocks, n_pe)?
        };
        let o = flash_attention_prefill(&inp, &s.with_block_size(block_size))?;
        output(out, len, "out")?.copy_from_slice(o.data());
        Ok(())
    })
}

/// Single-query attention of `q` (length `d`) over `t` cached rows.
///
/// # Safety
/// `q` and `out` must hold `d` floats; `k` and `v` must hold `t * d`.
#[no_mangle]
pub unsafe extern "C" fn ta_decode_attention(
    q: *const f32,
    k: *const f32,
    v: *const f32,
    t: usize,
    d: usize,
    out: *mut f32,
) -> TaStatus {
    guard(|| {
        let len = area(t, d)?;
        let (q, k, v) = (input(q, d, "q")?, input(k, len, "k")?, input(v, len, "v")?);
        let mut cache = KvCache::new(d);
        for i in 0..t {
            cache.push(&k[i * d..(i + 1) * d], &v[i * d..(i + 1) * d])?;
        }
        let o = decode_attention(q, &cache, d)?;
        output(out, d, "out")?.copy_from_slice(&o);
        Ok(())
    })
}

/// Bandwidth available to KV-cache reads for the given port roles.
///
/// # Safety
/// `roles` must hold `n_ports` values and `bytes_per_s` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ta_kv_bandwidth(
    roles: *const TaPortRole,
    n_ports: usize,
    per_port_bw: f64,
    bytes_per_s: *mut f64,
) -> TaStatus {
    guard(|| {
        let out = bytes_per_s.as_mut().ok_or_else(|| null("bytes_per_s"))?;
        let roles = input(roles, n_ports, "roles")?
            .iter()
            .map(|r| match r {
                TaPortRole::Q => PortRole::Q,
                TaPortRole::K => PortRole::K,
                TaPortRole::V => PortRole::V,
                TaPortRole::Out => PortRole::Out,
                TaPortRole::Shared => PortRole::Shared,
            })
            .collect();
        *out = effective_kv_bandwidth(&PortMap::new(roles, per_port_bw)?);
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use std::ptr;

    use super::*;

    #[test]
    fn errors_are_kept_per_thread() {
        let s = unsafe { ta_packed_new(ptr::null(), 2, 2, 3, ptr::null_mut()) };
        assert_eq!(s, TaStatus::NullPointer);
        let here = unsafe { CStr::from_ptr(ta_last_error_message()) }.to_owned();
        assert!(here.to_str().unwrap().contains("out"));
        let there = std::thread::spawn(|| unsafe { CStr::from_ptr(ta_last_error_message()) }.to_owned())
            .join()
            .unwrap();
        assert!(there.is_empty());
    }
}
