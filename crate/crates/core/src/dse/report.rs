use std::fmt::Write;

use serde::Serialize;

use super::search::{DseResult, EvaluatedPoint};
use super::{DesignPoint, DseConfig, Evaluation, Knobs};

pub const EVALUATED_HEADER: &str = "index,proj_par,pre_pe,pre_par,dec_pe,dec_par,dec_ports,\
lut,ff,dsp,bram,uram,t_pre,t_dec_long,t_dec_short,objective,feasibility";

/// One row per evaluated point. Resources are projection plus dynamic
/// partition, without reserved static logic.
pub fn evaluated_csv(points: &[EvaluatedPoint]) -> String {
    let mut s = String::from(EVALUATED_HEADER);
    s.push('\n');
    for p in points {
        let k = p.point.knobs;
        let knob = |f: fn(&Knobs) -> String| k.as_ref().map(f).unwrap_or_default();
        let r = p.point.allocation.total();
        let status = match &p.status {
            Ok(()) => "ok",
            Err(v) => v.kind(),
        };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            p.index,
            knob(|k| k.proj_par.to_string()),
            knob(|k| k.pre_pe.to_string()),
            knob(|k| k.pre_par.to_string()),
            knob(|k| k.dec_pe.to_string()),
            knob(|k| k.dec_par.to_string()),
            knob(|k| k.dec_ports.as_str().to_string()),
            r.lut,
            r.ff,
            r.dsp,
            r.bram,
            r.uram,
            p.eval.t_pre,
            p.eval.t_dec_long,
            p.eval.t_dec_short,
            p.eval.objective,
            status
        );
    }
    s
}

#[derive(Serialize)]
struct Summary<'a> {
    alpha: f64,
    l_prefill: u64,
    l_long: u64,
    l_short: u64,
    routability_margin: f64,
    exhaustive: bool,
    evaluated: usize,
    infeasible: usize,
    best: Best<'a>,
    pareto: Vec<Front<'a>>,
    shrink: Vec<Step<'a>>,
}

#[derive(Serialize)]
struct Best<'a> {
    objective: f64,
    latency: &'a Evaluation,
    design: &'a DesignPoint,
}

#[derive(Serialize)]
struct Front<'a> {
    index: usize,
    t_pre: f64,
    t_dec_long: f64,
    t_dec_short: f64,
    knobs: Option<&'a Knobs>,
}

#[derive(Serialize)]
struct Step<'a> {
    reason: &'a str,
    knobs: Option<&'a Knobs>,
}

impl DseResult {
    /// TOML summary of the search.
    pub fn report(&self, c: &DseConfig) -> String {
        let s = Summary {
            alpha: c.alpha,
            l_prefill: c.l_prefill,
            l_long: c.l_long,
            l_short: c.l_short,
            routability_margin: c.routability_margin,
            exhaustive: self.exhaustive,
            evaluated: self.evaluated.len(),
            infeasible: self.infeasible_count,
            best: Best {
                objective: self.objective,
                latency: &self.best_eval,
                design: &self.best,
            },
            pareto: self
                .pareto
                .iter()
                .map(|e| Front {
                    index: e.index,
                    t_pre: e.eval.t_pre,
                    t_dec_long: e.eval.t_dec_long,
                    t_dec_short: e.eval.t_dec_short,
                    knobs: e.point.knobs.as_ref(),
                })
                .collect(),
            shrink: self
                .shrink_trace
                .iter()
                .map(|s| Step {
                    reason: &s.reason,
                    knobs: s.point.knobs.as_ref(),
                })
                .collect(),
        };
        toml::to_string_pretty(&s).expect("summary serializes")
    }
}
