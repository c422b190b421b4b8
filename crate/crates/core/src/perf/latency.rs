//! Phase latency equations.
//!
//! ```text
//! T_pre(L) = P_proj·L / f_pre(r_proj) + P_atten·L² / g_pre(r_att_pre) + T_weights
//! T_dec(L) = D_proj   / f_dec(r_proj) + D_atten·L  / g_dec(r_att_dec) + T_weights
//! ```
//!
//! Coefficients are measured at a baseline allocation where every speedup
//! factor is 1. Each speedup is a two-ceiling roofline relative to that
//! baseline:
//!
//! ```text
//! speedup = min(compute_ratio, headroom · bandwidth_ratio) / min(1, headroom)
//! ```
//!
//! where `headroom` is the baseline's bandwidth-limited rate over its
//! compute-limited rate. With `headroom = 1` this is plain
//! `min(compute_ratio, bandwidth_ratio)`.

use serde::{Deserialize, Serialize};

use super::ports::{effective_kv_bandwidth, PortMap};
use super::resources::ResourceVector;
use crate::error::{Error, Result};

/// Resources and port maps of the three modules: the static projection
/// engine and the two attention variants sharing the reconfigurable region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub r_proj: ResourceVector,
    pub r_att_pre: ResourceVector,
    pub r_att_dec: ResourceVector,
    pub ports_pre: PortMap,
    pub ports_dec: PortMap,
}

impl Allocation {
    /// Elementwise max of the two attention variants.
    pub fn dynamic_partition(&self) -> ResourceVector {
        self.r_att_pre.max(self.r_att_dec)
    }

    pub fn total(&self) -> ResourceVector {
        self.r_proj + self.dynamic_partition()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    /// Seconds per prompt token.
    pub p_proj: f64,
    /// Seconds per prompt token squared.
    pub p_atten: f64,
    /// Seconds per decode step.
    pub d_proj: f64,
    /// Seconds per context token per decode step.
    pub d_atten: f64,
    pub t_weights: f64,
}

impl Coefficients {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("p_proj", self.p_proj),
            ("p_atten", self.p_atten),
            ("d_proj", self.d_proj),
            ("d_atten", self.d_atten),
            ("t_weights", self.t_weights),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(
                    name,
                    format!("must be finite and nonnegative, got {v}"),
                ));
            }
        }
        Ok(())
    }
}

/// Bandwidth headroom of each kernel at the baseline (bandwidth-limited rate
/// divided by compute-limited rate). Values above 1 mean compute-bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Headroom {
    pub proj: f64,
    pub att_pre: f64,
    pub att_dec: f64,
}

impl Default for Headroom {
    fn default() -> Self {
        Headroom {
            proj: 4.0,
            att_pre: 8.0,
            att_dec: 0.5,
        }
    }
}

impl Headroom {
    /// The plain `min(compute, bandwidth)` form.
    pub const BALANCED: Headroom = Headroom {
        proj: 1.0,
        att_pre: 1.0,
        att_dec: 1.0,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseLatencyModel {
    pub coefficients: Coefficients,
    pub baseline: Allocation,
    #[serde(default)]
    pub headroom: Headroom,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyTerms {
    pub projection: f64,
    pub attention: f64,
    pub weights: f64,
}

impl LatencyTerms {
    pub fn total(&self) -> f64 {
        self.projection + self.attention + self.weights
    }
}

fn ratio(alloc: f64, base: f64) -> f64 {
    alloc / base
}

fn roofline_speedup(compute: f64, bandwidth: f64, headroom: f64) -> f64 {
    compute.min(headroom * bandwidth) / headroom.min(1.0)
}

fn check_len(seq_len: u64) -> Result<f64> {
    if seq_len == 0 {
        return Err(Error::param("L", "sequence length must be at least 1"));
    }
    Ok(seq_len as f64)
}

/// `a / s`, with a zero speedup meaning the module cannot run at all.
fn scaled(a: f64, s: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else if s <= 0.0 {
        f64::INFINITY
    } else {
        a / s
    }
}

impl PhaseLatencyModel {
    pub fn new(coefficients: Coefficients, baseline: Allocation, headroom: Headroom) -> Result<Self> {
        let m = PhaseLatencyModel {
            coefficients,
            baseline,
            headroom,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.coefficients.validate()?;
        let b = &self.baseline;
        for (name, r) in [("baseline.r_proj", b.r_proj), ("baseline.r_att_pre", b.r_att_pre), ("baseline.r_att_dec", b.r_att_dec)] {
            if !r.is_nonnegative() || r.lut <= 0.0 {
                return Err(Error::config(name, "LUT must be positive and all counts nonnegative"));
            }
        }
        b.ports_pre.validate()?;
        b.ports_dec.validate()?;
        if effective_kv_bandwidth(&b.ports_dec) <= 0.0 {
            return Err(Error::config("baseline.ports_dec", "needs at least one K or V port"));
        }
        let h = self.headroom;
        for (name, v) in [("headroom.proj", h.proj), ("headroom.att_pre", h.att_pre), ("headroom.att_dec", h.att_dec)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(name, "must be positive"));
            }
        }
        Ok(())
    }

    /// Compute ratio of the projection engine: it needs both LUTs and DSPs.
    fn proj_compute(&self, r: &ResourceVector) -> f64 {
        let base = &self.baseline.r_proj;
        let mut c = ratio(r.lut, base.lut);
        if base.dsp > 0.0 {
            c = c.min(ratio(r.dsp, base.dsp));
        }
        c
    }

    pub fn f_pre(&self, r_proj: &ResourceVector, ports: &PortMap) -> f64 {
        let bw = ports.total_bandwidth() / self.baseline.ports_pre.total_bandwidth();
        roofline_speedup(self.proj_compute(r_proj), bw, self.headroom.proj)
    }

    pub fn f_dec(&self, r_proj: &ResourceVector, ports: &PortMap) -> f64 {
        let bw = ports.total_bandwidth() / self.baseline.ports_dec.total_bandwidth();
        roofline_speedup(self.proj_compute(r_proj), bw, self.headroom.proj)
    }

    pub fn g_pre(&self, r_att: &ResourceVector, ports: &PortMap) -> f64 {
        let compute = ratio(r_att.lut, self.baseline.r_att_pre.lut);
        let bw = ports.total_bandwidth() / self.baseline.ports_pre.total_bandwidth();
        roofline_speedup(compute, bw, self.headroom.att_pre)
    }

    pub fn g_dec(&self, r_att: &ResourceVector, ports: &PortMap) -> f64 {
        let compute = ratio(r_att.lut, self.baseline.r_att_dec.lut);
        let bw = effective_kv_bandwidth(ports) / effective_kv_bandwidth(&self.baseline.ports_dec);
        roofline_speedup(compute, bw, self.headroom.att_dec)
    }

    pub fn prefill_terms(&self, a: &Allocation, seq_len: u64) -> Result<LatencyTerms> {
        let l = check_len(seq_len)?;
        let c = &self.coefficients;
        Ok(LatencyTerms {
            projection: scaled(c.p_proj * l, self.f_pre(&a.r_proj, &a.ports_pre)),
            attention: scaled(c.p_atten * l * l, self.g_pre(&a.r_att_pre, &a.ports_pre)),
            weights: c.t_weights,
        })
    }

    pub fn decode_terms(&self, a: &Allocation, seq_len: u64) -> Result<LatencyTerms> {
        let l = check_len(seq_len)?;
        let c = &self.coefficients;
        Ok(LatencyTerms {
            projection: scaled(c.d_proj, self.f_dec(&a.r_proj, &a.ports_dec)),
            attention: scaled(c.d_atten * l, self.g_dec(&a.r_att_dec, &a.ports_dec)),
            weights: c.t_weights,
        })
    }

    pub fn prefill_latency(&self, a: &Allocation, seq_len: u64) -> Result<f64> {
        Ok(self.prefill_terms(a, seq_len)?.total())
    }

    pub fn decode_step_latency(&self, a: &Allocation, seq_len: u64) -> Result<f64> {
        Ok(self.decode_terms(a, seq_len)?.total())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("model serializes")
    }
}

pub fn prefill_latency(m: &PhaseLatencyModel, a: &Allocation, seq_len: u64) -> Result<f64> {
    m.prefill_latency(a, seq_len)
}

pub fn decode_step_latency(m: &PhaseLatencyModel, a: &Allocation, seq_len: u64) -> Result<f64> {
    m.decode_step_latency(a, seq_len)
}
