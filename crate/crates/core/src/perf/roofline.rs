use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    Compute,
    Memory,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RooflinePoint {
    pub flops: f64,
    pub bytes: f64,
    /// Flops per byte.
    pub intensity: f64,
    pub bound: Bound,
    /// `min(peak_flops, intensity · peak_bw)`.
    pub attainable: f64,
}

/// Classifies a kernel against a roofline. Intensity equal to the machine
/// balance counts as compute-bound.
pub fn classify_roofline(flops: f64, bytes: f64, peak_flops: f64, peak_bw: f64) -> Result<RooflinePoint> {
    if !(bytes > 0.0) {
        return Err(Error::param("bytes", "must be positive"));
    }
    if !(peak_flops > 0.0 && peak_bw > 0.0) {
        return Err(Error::param("peak", "peak compute and bandwidth must be positive"));
    }
    if !(flops >= 0.0) {
        return Err(Error::param("flops", "must be nonnegative"));
    }
    let intensity = flops / bytes;
    let balance = peak_flops / peak_bw;
    let bound = if intensity >= balance { Bound::Compute } else { Bound::Memory };
    Ok(RooflinePoint {
        flops,
        bytes,
        intensity,
        bound,
        attainable: peak_flops.min(intensity * peak_bw),
    })
}

/// Operation and byte counts of one kernel invocation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Workload {
    pub flops: f64,
    pub bytes: f64,
}

/// Single-query attention over `ctx` cached tokens: QK and PV are each
/// `2·ctx·d` flops, and the whole K and V history is read once.
pub fn decode_attention_workload(ctx: u64, d: u64, bytes_per_elem: f64) -> Workload {
    let (l, d) = (ctx as f64, d as f64);
    Workload {
        flops: 4.0 * l * d,
        bytes: bytes_per_elem * (2.0 * l * d + 2.0 * d),
    }
}

/// Causal blocked prefill attention over `n` tokens with resident Q blocks of
/// `block` rows: each Q block streams the K/V blocks at or before it.
pub fn prefill_attention_workload(n: u64, d: u64, block: u64, bytes_per_elem: f64) -> Workload {
    let blocks = n.div_ceil(block.max(1)) as f64;
    let (nf, df, bf) = (n as f64, d as f64, block as f64);
    let pairs = blocks * (blocks + 1.0) / 2.0;
    Workload {
        // QK^T and PV over the causal block pairs.
        flops: 4.0 * pairs * bf * bf * df,
        // Q in and O out once, K and V once per causal block pair.
        bytes: bytes_per_elem * (2.0 * nf * df + 2.0 * pairs * bf * df),
    }
}

/// Token-wise GEMV over `tokens` activations with on-chip ternary weights:
/// only INT8 activations in and outputs out touch DDR.
pub fn linear_workload(tokens: u64, d_in: u64, d_out: u64, out_bytes: f64) -> Workload {
    let (t, i, o) = (tokens as f64, d_in as f64, d_out as f64);
    Workload {
        flops: 2.0 * t * i * o,
        bytes: t * (i + out_bytes * o),
    }
}
