//! Design-space exploration over PE counts, parallelism and decode port maps.
//!
//! A design is scored by
//! `T_pre(L_prefill) + α·T_dec(L_long) + (1−α)·T_dec(L_short)` and must fit
//! the device with the projection engine plus the elementwise max of the two
//! attention variants, stay under the routable LUT fraction, and keep
//! prefill under `T_pre_max`.

mod grid;
pub mod presets;
mod report;
mod search;
mod shrink;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perf::{Allocation, PhaseLatencyModel, ResourceVector};

pub use grid::{Grid, Knobs, ModuleEstimate, PortLayout, ResourceEstimator, AXES};
pub use report::{evaluated_csv, EVALUATED_HEADER};
pub use search::{evaluate_grid, pareto_front, search, search_with_shrink, DseResult, EvaluatedPoint, ParetoEntry};
pub use shrink::{shrink_until_routable, ShrinkStep};

/// Which constraint a design breaks.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Projection plus dynamic partition (plus reserved static logic)
    /// exceeds the device in the listed resource classes.
    ResourceBudget { classes: Vec<&'static str> },
    /// Fits the device but exceeds the routable LUT fraction.
    Routability { lut: f64, limit: f64 },
    /// Prefill at the reference length is slower than the bound.
    PrefillBound { t_pre: f64, t_pre_max: f64 },
}

impl Violation {
    pub fn kind(&self) -> &'static str {
        match self {
            Violation::ResourceBudget { .. } => "resource_budget",
            Violation::Routability { .. } => "routability",
            Violation::PrefillBound { .. } => "prefill_bound",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ResourceBudget { classes } => {
                write!(f, "exceeds device resources in {}", classes.join(", "))
            }
            Violation::Routability { lut, limit } => {
                write!(f, "uses {lut:.0} LUT, above routable limit {limit:.0}")
            }
            Violation::PrefillBound { t_pre, t_pre_max } => {
                write!(f, "prefill takes {t_pre:.4} s, bound is {t_pre_max:.4} s")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub allocation: Allocation,
    /// Present when the point came from a grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knobs: Option<Knobs>,
}

impl DesignPoint {
    pub fn new(allocation: Allocation) -> Self {
        DesignPoint {
            allocation,
            knobs: None,
        }
    }

    pub fn dynamic_partition(&self) -> ResourceVector {
        self.allocation.dynamic_partition()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("design serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub t_pre: f64,
    pub t_dec_long: f64,
    pub t_dec_short: f64,
    pub objective: f64,
}

impl Evaluation {
    /// True if `self` is no worse on all three latencies and better on one.
    pub fn dominates(&self, other: &Evaluation) -> bool {
        let a = [self.t_pre, self.t_dec_long, self.t_dec_short];
        let b = [other.t_pre, other.t_dec_long, other.t_dec_short];
        a.iter().zip(&b).all(|(x, y)| x <= y) && a.iter().zip(&b).any(|(x, y)| x < y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DseConfig {
    pub r_total: ResourceVector,
    /// Static logic outside the three modules (norms, control, DMA).
    pub reserved: ResourceVector,
    pub alpha: f64,
    pub l_long: u64,
    pub l_short: u64,
    pub l_prefill: u64,
    /// `None` means 1.25× the model's baseline prefill at `l_prefill`.
    #[serde(default)]
    pub t_pre_max: Option<f64>,
    /// Fraction of device LUTs that still routes.
    pub routability_margin: f64,
    /// Largest grid searched exhaustively.
    pub exhaustive_cap: usize,
    pub n_ports: usize,
    pub per_port_bw: f64,
    pub ports_pre: PortLayout,
    pub grid: Grid,
    pub estimator: ResourceEstimator,
}

pub const DEFAULT_ALPHA: f64 = 0.7;
pub const DEFAULT_ROUTABILITY_MARGIN: f64 = 0.87;
pub const DEFAULT_EXHAUSTIVE_CAP: usize = 10_000;
pub const T_PRE_MAX_FACTOR: f64 = 1.25;

impl DseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config("dse.alpha", "must be in [0, 1]"));
        }
        if self.l_short < 1 {
            return Err(Error::config("dse.l_short", "must be at least 1"));
        }
        if self.l_long <= self.l_short {
            return Err(Error::config("dse.l_long", "must exceed l_short"));
        }
        if self.l_prefill < 1 {
            return Err(Error::config("dse.l_prefill", "must be at least 1"));
        }
        if let Some(t) = self.t_pre_max {
            if !(t > 0.0) {
                return Err(Error::config("dse.t_pre_max", "must be positive"));
            }
        }
        if !(self.routability_margin > 0.0 && self.routability_margin <= 1.0) {
            return Err(Error::config("dse.routability_margin", "must be in (0, 1]"));
        }
        if self.exhaustive_cap == 0 {
            return Err(Error::config("dse.exhaustive_cap", "must be positive"));
        }
        if !self.r_total.is_nonnegative() {
            return Err(Error::config("device.r_total", "must be nonnegative"));
        }
        if !self.reserved.is_nonnegative() {
            return Err(Error::config("dse.reserved", "must be nonnegative"));
        }
        if self.n_ports == 0 {
            return Err(Error::config("device.n_ports", "must be positive"));
        }
        if !(self.per_port_bw > 0.0) {
            return Err(Error::config("device.per_port_bw", "must be positive"));
        }
        self.grid.validate()?;
        self.ports_pre
            .build(self.n_ports, self.per_port_bw)
            .map_err(|e| Error::config("dse.ports_pre", e.to_string()))?;
        Ok(())
    }

    pub fn resolved_t_pre_max(&self, m: &PhaseLatencyModel) -> Result<f64> {
        match self.t_pre_max {
            Some(t) => Ok(t),
            None => Ok(T_PRE_MAX_FACTOR * m.prefill_latency(&m.baseline, self.l_prefill)?),
        }
    }

    /// Builds the allocation of a grid design from the resource estimator.
    pub fn design_at(&self, k: &Knobs) -> Result<DesignPoint> {
        let e = &self.estimator;
        Ok(DesignPoint {
            allocation: Allocation {
                r_proj: e.proj.at(k.proj_units()),
                r_att_pre: e.att_pre.at(k.pre_units()),
                r_att_dec: e.att_dec.at(k.dec_units()),
                ports_pre: self.ports_pre.build(self.n_ports, self.per_port_bw)?,
                ports_dec: k.dec_ports.build(self.n_ports, self.per_port_bw)?,
            },
            knobs: Some(*k),
        })
    }

    /// Device resources the design occupies, including reserved logic.
    pub fn used(&self, d: &DesignPoint) -> ResourceVector {
        self.reserved + d.allocation.total()
    }
}

/// Scores a design without checking feasibility. Infinite latencies stay
/// infinite.
pub fn evaluate(m: &PhaseLatencyModel, d: &DesignPoint, c: &DseConfig) -> Result<Evaluation> {
    let a = &d.allocation;
    let t_pre = m.prefill_latency(a, c.l_prefill)?;
    let t_dec_long = m.decode_step_latency(a, c.l_long)?;
    let t_dec_short = m.decode_step_latency(a, c.l_short)?;
    Ok(Evaluation {
        t_pre,
        t_dec_long,
        t_dec_short,
        objective: t_pre + c.alpha * t_dec_long + (1.0 - c.alpha) * t_dec_short,
    })
}

pub(crate) fn classify(
    d: &DesignPoint,
    c: &DseConfig,
    t_pre: f64,
    t_pre_max: f64,
) -> std::result::Result<(), Violation> {
    let used = c.used(d);
    let classes = used.exceeded(c.r_total);
    if !classes.is_empty() {
        return Err(Violation::ResourceBudget { classes });
    }
    let limit = c.routability_margin * c.r_total.lut;
    if used.lut > limit {
        return Err(Violation::Routability { lut: used.lut, limit });
    }
    if !(t_pre <= t_pre_max) {
        return Err(Violation::PrefillBound { t_pre, t_pre_max });
    }
    Ok(())
}

/// Checks the resource budget, then routability, then the prefill bound.
pub fn feasible(d: &DesignPoint, c: &DseConfig, m: &PhaseLatencyModel) -> std::result::Result<(), Violation> {
    let t_pre = m.prefill_latency(&d.allocation, c.l_prefill).unwrap_or(f64::INFINITY);
    let t_pre_max = c.resolved_t_pre_max(m).unwrap_or(f64::INFINITY);
    classify(d, c, t_pre, t_pre_max)
}

/// Objective of a feasible design.
pub fn objective(m: &PhaseLatencyModel, d: &DesignPoint, c: &DseConfig) -> Result<f64> {
    feasible(d, c, m).map_err(Error::Infeasible)?;
    Ok(evaluate(m, d, c)?.objective)
}
