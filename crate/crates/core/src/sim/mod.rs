//! Timeline of one inference request with the attention swap.
//!
//! Prefill runs layer by layer on the compute lane, each layer being
//! attention followed by output projection and FFN. The bitstream load for
//! the decode attention runs on its own lane, starting either right after the
//! last layer's attention or after prefill finishes. Decode steps wait for
//! the load to complete.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::dse::DesignPoint;
use crate::error::{Error, Result};
use crate::perf::PhaseLatencyModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelShape {
    pub n_layers: usize,
    /// Share of the linear prefill term spent in the FFN; the rest is the
    /// attention output projection.
    #[serde(default = "default_ffn_fraction")]
    pub ffn_fraction: f64,
}

fn default_ffn_fraction() -> f64 {
    2.0 / 3.0
}

impl Default for ModelShape {
    fn default() -> Self {
        ModelShape {
            n_layers: 24,
            ffn_fraction: default_ffn_fraction(),
        }
    }
}

impl ModelShape {
    pub fn validate(&self) -> Result<()> {
        if self.n_layers < 1 {
            return Err(Error::config("model.n_layers", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.ffn_fraction) {
            return Err(Error::config("model.ffn_fraction", "must be in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    AfterLastAttention,
    AfterPrefillComplete,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconfigParams {
    pub t_reconfig: f64,
    pub trigger: Trigger,
    /// When false, the first decode step's projection work may run during
    /// the load and only its attention waits. For what-if studies.
    #[serde(default = "yes")]
    pub confirm_before_decode: bool,
}

fn yes() -> bool {
    true
}

impl ReconfigParams {
    pub fn new(t_reconfig: f64, trigger: Trigger) -> Result<Self> {
        let rp = ReconfigParams {
            t_reconfig,
            trigger,
            confirm_before_decode: true,
        };
        rp.validate()?;
        Ok(rp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_reconfig > 0.0 && self.t_reconfig.is_finite()) {
            return Err(Error::config("reconfig.t_reconfig", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    PrefillAttn,
    PrefillProj,
    PrefillFfn,
    ReconfigStart,
    ReconfigEnd,
    DecodeStep,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::PrefillAttn => "prefill_attn",
            EventKind::PrefillProj => "prefill_proj",
            EventKind::PrefillFfn => "prefill_ffn",
            EventKind::ReconfigStart => "reconfig_start",
            EventKind::ReconfigEnd => "reconfig_end",
            EventKind::DecodeStep => "decode_step",
        }
    }

    pub fn is_prefill(self) -> bool {
        matches!(self, EventKind::PrefillAttn | EventKind::PrefillProj | EventKind::PrefillFfn)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Event {
    pub kind: EventKind,
    /// Layer for prefill events, step for decode, 0 for reconfiguration.
    pub index: usize,
    pub start: f64,
    pub end: f64,
}

impl Event {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Events ordered by start time. Reconfiguration start and end are zero-length
/// markers on their own lane.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwapTimeline {
    pub events: Vec<Event>,
}

impl SwapTimeline {
    fn last(&self, kind: EventKind) -> Option<&Event> {
        self.events.iter().rev().find(|e| e.kind == kind)
    }

    pub fn prefill_end(&self) -> f64 {
        self.events
            .iter()
            .filter(|e| e.kind.is_prefill())
            .map(|e| e.end)
            .fold(0.0, f64::max)
    }

    pub fn reconfig_window(&self) -> Option<(f64, f64)> {
        Some((self.last(EventKind::ReconfigStart)?.start, self.last(EventKind::ReconfigEnd)?.end))
    }

    /// Reconfiguration time not covered by prefill compute.
    pub fn exposed_overhead(&self) -> f64 {
        match self.reconfig_window() {
            Some((start, end)) => (end - self.prefill_end()).clamp(0.0, end - start),
            None => 0.0,
        }
    }

    /// Prefill compute after the last attention event.
    pub fn tail(&self) -> f64 {
        let attn_end = self.last(EventKind::PrefillAttn).map_or(0.0, |e| e.end);
        self.prefill_end() - attn_end
    }

    pub fn decode_steps(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(|e| e.kind == EventKind::DecodeStep)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("event,index,start_s,end_s\n");
        for e in &self.events {
            let _ = writeln!(s, "{},{},{},{}", e.kind.as_str(), e.index, e.start, e.end);
        }
        s
    }

    fn sort(&mut self) {
        self.events.sort_by(|a, b| a.start.total_cmp(&b.start));
    }
}

/// Lays out prefill for `seq_len` tokens. The aggregate latency terms are
/// split evenly across layers and the compute lane starts after the weight
/// term. `rp = None` models a static design with nothing to swap.
pub fn simulate_prefill(
    m: &PhaseLatencyModel,
    shape: &ModelShape,
    d: &DesignPoint,
    seq_len: u64,
    rp: Option<&ReconfigParams>,
) -> Result<SwapTimeline> {
    shape.validate()?;
    if let Some(rp) = rp {
        rp.validate()?;
    }
    let terms = m.prefill_terms(&d.allocation, seq_len)?;
    let n = shape.n_layers as f64;
    let attn = terms.attention / n;
    let ffn = terms.projection * shape.ffn_fraction / n;
    let proj = terms.projection / n - ffn;
    let mut events = Vec::with_capacity(3 * shape.n_layers + 2);
    let mut t = terms.weights;
    for layer in 0..shape.n_layers {
        for (kind, dur) in [
            (EventKind::PrefillAttn, attn),
            (EventKind::PrefillProj, proj),
            (EventKind::PrefillFfn, ffn),
        ] {
            events.push(Event {
                kind,
                index: layer,
                start: t,
                end: t + dur,
            });
            t += dur;
        }
    }
    let mut tl = SwapTimeline { events };
    if let Some(rp) = rp {
        let start = match rp.trigger {
            Trigger::AfterLastAttention => tl.last(EventKind::PrefillAttn).expect("n_layers >= 1").end,
            Trigger::AfterPrefillComplete => t,
        };
        let end = start + rp.t_reconfig;
        tl.events.push(Event {
            kind: EventKind::ReconfigStart,
            index: 0,
            start,
            end: start,
        });
        tl.events.push(Event {
            kind: EventKind::ReconfigEnd,
            index: 0,
            start: end,
            end,
        });
        tl.sort();
    }
    Ok(tl)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndToEnd {
    pub timeline: SwapTimeline,
    pub prefill_end: f64,
    pub exposed_overhead: f64,
    /// End of the first decode step.
    pub ttft: f64,
    /// Generated tokens over total decode-step time.
    pub decode_throughput: f64,
}

/// Prefill, swap and `n_gen` decode steps; step `i` (from 1) attends over
/// `seq_len + i` tokens.
pub fn simulate_end_to_end(
    m: &PhaseLatencyModel,
    shape: &ModelShape,
    d: &DesignPoint,
    seq_len: u64,
    n_gen: u64,
    rp: Option<&ReconfigParams>,
) -> Result<EndToEnd> {
    if n_gen < 1 {
        return Err(Error::param("n_gen", "must be at least 1"));
    }
    let mut tl = simulate_prefill(m, shape, d, seq_len, rp)?;
    let prefill_end = tl.prefill_end();
    let reconfig_end = tl.reconfig_window().map_or(prefill_end, |(_, e)| e);
    let confirm = rp.is_none_or(|r| r.confirm_before_decode);
    let mut t = if confirm { prefill_end.max(reconfig_end) } else { prefill_end };
    let mut busy = 0.0;
    let mut ttft = 0.0;
    for i in 1..=n_gen {
        let terms = m.decode_terms(&d.allocation, seq_len + i)?;
        let start = t;
        let end = if i == 1 && !confirm {
            // Attention of the first step still waits for the new logic.
            (start + terms.weights + terms.projection).max(reconfig_end) + terms.attention
        } else {
            start + terms.total()
        };
        busy += terms.total();
        tl.events.push(Event {
            kind: EventKind::DecodeStep,
            index: i as usize,
            start,
            end,
        });
        if i == 1 {
            ttft = end;
        }
        t = end;
    }
    tl.sort();
    Ok(EndToEnd {
        exposed_overhead: tl.exposed_overhead(),
        prefill_end,
        ttft,
        decode_throughput: n_gen as f64 / busy,
        timeline: tl,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverheadReport {
    pub t_reconfig: f64,
    pub tail: f64,
    pub exposed_ms: f64,
    pub hidden_fraction: f64,
}

pub fn overhead_report(t: &SwapTimeline, rp: &ReconfigParams) -> Result<OverheadReport> {
    if t.reconfig_window().is_none() {
        return Err(Error::NoReconfigEvents);
    }
    let exposed = t.exposed_overhead();
    Ok(OverheadReport {
        t_reconfig: rp.t_reconfig,
        tail: t.tail(),
        exposed_ms: exposed * 1e3,
        hidden_fraction: if rp.t_reconfig > 0.0 {
            (1.0 - exposed / rp.t_reconfig).clamp(0.0, 1.0)
        } else {
            1.0
        },
    })
}

/// A calibrated model, the design it describes and how it swaps.
#[derive(Debug, Clone, Copy)]
pub struct Scenario<'a> {
    pub model: &'a PhaseLatencyModel,
    pub design: &'a DesignPoint,
    pub reconfig: Option<&'a ReconfigParams>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub seq_len: u64,
    pub prefill_s: f64,
    pub ttft_s: f64,
    pub exposed_s: f64,
    pub prefill_tps: f64,
    pub decode_tps: f64,
}

pub fn sweep(s: &Scenario, shape: &ModelShape, lengths: &[u64]) -> Result<Vec<SweepRow>> {
    lengths
        .iter()
        .map(|&l| {
            let r = simulate_end_to_end(s.model, shape, s.design, l, 1, s.reconfig)?;
            Ok(SweepRow {
                seq_len: l,
                prefill_s: r.prefill_end,
                ttft_s: r.ttft,
                exposed_s: r.exposed_overhead,
                prefill_tps: l as f64 / r.prefill_end,
                decode_tps: r.decode_throughput,
            })
        })
        .collect()
}

pub const SWEEP_HEADER: &str = "seq_len,prefill_s,ttft_s,exposed_s,prefill_tps,decode_tps";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = format!("{SWEEP_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.seq_len, r.prefill_s, r.ttft_s, r.exposed_s, r.prefill_tps, r.decode_tps
        );
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompareRow {
    pub seq_len: u64,
    pub base_decode_tps: f64,
    pub cand_decode_tps: f64,
    /// Candidate over baseline decode throughput.
    pub decode_ratio: f64,
    pub base_ttft_s: f64,
    pub cand_ttft_s: f64,
    /// Baseline over candidate TTFT, so above 1 means the candidate is faster.
    pub ttft_ratio: f64,
}

pub fn compare_designs(
    baseline: &Scenario,
    candidate: &Scenario,
    shape: &ModelShape,
    lengths: &[u64],
) -> Result<Vec<CompareRow>> {
    let b = sweep(baseline, shape, lengths)?;
    let c = sweep(candidate, shape, lengths)?;
    Ok(b.iter()
        .zip(&c)
        .map(|(b, c)| CompareRow {
            seq_len: b.seq_len,
            base_decode_tps: b.decode_tps,
            cand_decode_tps: c.decode_tps,
            decode_ratio: c.decode_tps / b.decode_tps,
            base_ttft_s: b.ttft_s,
            cand_ttft_s: c.ttft_s,
            ttft_ratio: b.ttft_s / c.ttft_s,
        })
        .collect())
}

pub const COMPARE_HEADER: &str =
    "seq_len,base_decode_tps,cand_decode_tps,decode_ratio,base_ttft_s,cand_ttft_s,ttft_ratio";

pub fn compare_csv(rows: &[CompareRow]) -> String {
    let mut s = format!("{COMPARE_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.seq_len,
            r.base_decode_tps,
            r.cand_decode_tps,
            r.decode_ratio,
            r.base_ttft_s,
            r.cand_ttft_s,
            r.ttft_ratio
        );
    }
    s
}

/// `64, 128, ..., max` (powers of two).
pub fn default_sweep(max: u64) -> Vec<u64> {
    std::iter::successors(Some(64u64), |l| l.checked_mul(2))
        .take_while(|&l| l <= max)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dse::presets::reference_allocation;
    use crate::dse::PortLayout;
    use crate::perf::{Coefficients, Headroom};

    /// One layer whose post-attention tail is `tail` seconds at L = 1.
    fn one_layer(tail: f64) -> (PhaseLatencyModel, DesignPoint, ModelShape) {
        let a = reference_allocation(PortLayout::KvSplit);
        let c = Coefficients {
            p_proj: tail,
            p_atten: 0.5,
            d_proj: 0.01,
            d_atten: 1e-3,
            t_weights: 0.0,
        };
        let m = PhaseLatencyModel::new(c, a.clone(), Headroom::default()).unwrap();
        let shape = ModelShape {
            n_layers: 1,
            ffn_fraction: 0.5,
        };
        (m, DesignPoint::new(a), shape)
    }

    #[test]
    fn overlap_45_31() {
        let (m, d, shape) = one_layer(0.031);
        let rp = ReconfigParams::new(0.045, Trigger::AfterLastAttention).unwrap();
        let t = simulate_prefill(&m, &shape, &d, 1, Some(&rp)).unwrap();
        let r = overhead_report(&t, &rp).unwrap();
        assert!((r.exposed_ms - 14.0).abs() < 1e-9);
        assert!((r.hidden_fraction - 31.0 / 45.0).abs() < 1e-9);
    }

    #[test]
    fn late_trigger_exposes_everything() {
        let (m, d, shape) = one_layer(0.031);
        let rp = ReconfigParams::new(0.045, Trigger::AfterPrefillComplete).unwrap();
        let t = simulate_prefill(&m, &shape, &d, 1, Some(&rp)).unwrap();
        assert!((t.exposed_overhead() - 0.045).abs() < 1e-12);
        assert!(overhead_report(&t, &rp).unwrap().hidden_fraction.abs() < 1e-12);
    }

    #[test]
    fn long_tail_hides_everything() {
        let (m, d, shape) = one_layer(0.090);
        let rp = ReconfigParams::new(0.045, Trigger::AfterLastAttention).unwrap();
        let t = simulate_prefill(&m, &shape, &d, 1, Some(&rp)).unwrap();
        assert_eq!(t.exposed_overhead(), 0.0);
        assert_eq!(overhead_report(&t, &rp).unwrap().hidden_fraction, 1.0);
    }

    #[test]
    fn static_design_has_no_reconfig() {
        let (m, d, shape) = one_layer(0.031);
        let t = simulate_prefill(&m, &shape, &d, 4, None).unwrap();
        let rp = ReconfigParams::new(0.045, Trigger::AfterLastAttention).unwrap();
        assert!(matches!(overhead_report(&t, &rp), Err(Error::NoReconfigEvents)));
    }

    #[test]
    fn single_token_throughput() {
        let (m, d, shape) = one_layer(0.031);
        let rp = ReconfigParams::new(0.045, Trigger::AfterLastAttention).unwrap();
        let r = simulate_end_to_end(&m, &shape, &d, 100, 1, Some(&rp)).unwrap();
        let step = m.decode_step_latency(&d.allocation, 101).unwrap();
        assert!((r.decode_throughput - 1.0 / step).abs() < 1e-12);
        let first = r.timeline.decode_steps().next().unwrap();
        assert!(first.start >= r.timeline.reconfig_window().unwrap().1);
        assert!((r.ttft - (r.prefill_end + r.exposed_overhead + step)).abs() < 1e-12);
    }

    #[test]
    fn what_if_overlap_is_never_slower() {
        let (m, d, shape) = one_layer(0.001);
        let rp = ReconfigParams::new(0.045, Trigger::AfterLastAttention).unwrap();
        let relaxed = ReconfigParams {
            confirm_before_decode: false,
            ..rp
        };
        let a = simulate_end_to_end(&m, &shape, &d, 1, 3, Some(&rp)).unwrap();
        let b = simulate_end_to_end(&m, &shape, &d, 1, 3, Some(&relaxed)).unwrap();
        assert!(b.ttft < a.ttft);
        assert_eq!(a.decode_throughput, b.decode_throughput);
    }

    #[test]
    fn identical_designs_compare_equal() {
        let (m, d, shape) = one_layer(0.031);
        let s = Scenario {
            model: &m,
            design: &d,
            reconfig: None,
        };
        let rows = compare_designs(&s, &s, &shape, &[64, 128]).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.decode_ratio == 1.0 && r.ttft_ratio == 1.0));
        assert!(compare_csv(&rows).starts_with(COMPARE_HEADER));
    }

    #[test]
    fn sweep_lengths() {
        assert_eq!(default_sweep(2048), vec![64, 128, 256, 512, 1024, 2048]);
        assert_eq!(default_sweep(100), vec![64]);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(ReconfigParams::new(0.0, Trigger::AfterLastAttention).is_err());
        let (m, d, _) = one_layer(0.031);
        let bad = ModelShape {
            n_layers: 0,
            ffn_fraction: 0.5,
        };
        assert!(simulate_prefill(&m, &bad, &d, 1, None).is_err());
        assert!(simulate_end_to_end(&m, &ModelShape::default(), &d, 1, 0, None).is_err());
    }
}
