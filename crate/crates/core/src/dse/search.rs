use std::cmp::Ordering;
use std::collections::BTreeMap;

use super::grid::AXES;
use super::shrink::{shrink_until_routable, ShrinkStep};
use super::{classify, evaluate, DesignPoint, DseConfig, Evaluation, Violation};
use crate::error::{Error, Result};
use crate::perf::PhaseLatencyModel;

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatedPoint {
    /// Flat grid index.
    pub index: usize,
    pub point: DesignPoint,
    pub eval: Evaluation,
    pub status: std::result::Result<(), Violation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoEntry {
    pub index: usize,
    pub point: DesignPoint,
    pub eval: Evaluation,
}

#[derive(Debug, Clone)]
pub struct DseResult {
    pub best: DesignPoint,
    pub best_eval: Evaluation,
    pub objective: f64,
    pub pareto: Vec<ParetoEntry>,
    pub infeasible_count: usize,
    /// Every scored point, ordered by grid index.
    pub evaluated: Vec<EvaluatedPoint>,
    pub shrink_trace: Vec<ShrinkStep>,
    /// False when the grid was sampled and refined instead of enumerated.
    pub exhaustive: bool,
}

/// Total order used to pick a winner: objective, then dynamic-partition
/// LUTs, then total resources lexicographically, then grid index.
fn rank(a: &EvaluatedPoint, b: &EvaluatedPoint) -> Ordering {
    a.eval
        .objective
        .total_cmp(&b.eval.objective)
        .then_with(|| {
            a.point
                .dynamic_partition()
                .lut
                .total_cmp(&b.point.dynamic_partition().lut)
        })
        .then_with(|| {
            let (x, y) = (a.point.allocation.total().to_array(), b.point.allocation.total().to_array());
            x.iter()
                .zip(&y)
                .map(|(p, q)| p.total_cmp(q))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
        .then_with(|| a.index.cmp(&b.index))
}

struct Evaluator<'a> {
    c: &'a DseConfig,
    m: &'a PhaseLatencyModel,
    t_pre_max: f64,
    seen: BTreeMap<usize, EvaluatedPoint>,
}

impl<'a> Evaluator<'a> {
    fn new(c: &'a DseConfig, m: &'a PhaseLatencyModel) -> Result<Self> {
        c.validate()?;
        m.validate()?;
        Ok(Evaluator {
            c,
            m,
            t_pre_max: c.resolved_t_pre_max(m)?,
            seen: BTreeMap::new(),
        })
    }

    fn at(&mut self, index: usize) -> Result<&EvaluatedPoint> {
        if !self.seen.contains_key(&index) {
            let knobs = self.c.grid.knobs_at(self.c.grid.unflatten(index));
            let point = self.c.design_at(&knobs)?;
            let eval = evaluate(self.m, &point, self.c)?;
            let status = classify(&point, self.c, eval.t_pre, self.t_pre_max);
            self.seen.insert(
                index,
                EvaluatedPoint {
                    index,
                    point,
                    eval,
                    status,
                },
            );
        }
        Ok(&self.seen[&index])
    }

    fn better(&mut self, cand: usize, incumbent: Option<usize>) -> Result<bool> {
        let p = self.at(cand)?.clone();
        if p.status.is_err() {
            return Ok(false);
        }
        Ok(match incumbent {
            None => true,
            Some(i) => rank(&p, &self.seen[&i]) == Ordering::Less,
        })
    }
}

/// Moves along single grid axes while that improves the rank.
fn coordinate_descent(ev: &mut Evaluator, start: usize) -> Result<usize> {
    let dims = ev.c.grid.dims();
    let mut cur = start;
    loop {
        let mut moved = false;
        for axis in 0..AXES {
            for step in [-1i64, 1] {
                let mut idx = ev.c.grid.unflatten(cur);
                let next = idx[axis] as i64 + step;
                if next < 0 || next >= dims[axis] as i64 {
                    continue;
                }
                idx[axis] = next as usize;
                let cand = ev.c.grid.flatten(idx);
                if ev.better(cand, Some(cur))? {
                    cur = cand;
                    moved = true;
                }
            }
        }
        if !moved {
            return Ok(cur);
        }
    }
}

/// Nondominated feasible points in (T_pre, T_dec_long, T_dec_short). Among
/// points with identical latencies only the lowest grid index is kept.
pub fn pareto_front(points: &[EvaluatedPoint]) -> Vec<ParetoEntry> {
    let mut feasible: Vec<&EvaluatedPoint> = points.iter().filter(|p| p.status.is_ok()).collect();
    let key = |p: &EvaluatedPoint| [p.eval.t_pre, p.eval.t_dec_long, p.eval.t_dec_short];
    feasible.sort_by(|a, b| {
        let (x, y) = (key(a), key(b));
        x.iter()
            .zip(&y)
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.index.cmp(&b.index))
    });
    // In lexicographic order a later point never dominates an earlier one,
    // so checking against the front built so far is enough.
    let mut front: Vec<ParetoEntry> = Vec::new();
    for p in feasible {
        let covered = front
            .iter()
            .any(|f| f.eval.dominates(&p.eval) || key_eq(&f.eval, &p.eval));
        if !covered {
            front.push(ParetoEntry {
                index: p.index,
                point: p.point.clone(),
                eval: p.eval,
            });
        }
    }
    front.sort_by_key(|e| e.index);
    front
}

fn key_eq(a: &Evaluation, b: &Evaluation) -> bool {
    a.t_pre == b.t_pre && a.t_dec_long == b.t_dec_long && a.t_dec_short == b.t_dec_short
}

/// Scores the grid points a search would visit in its first pass, feasible
/// or not.
pub fn evaluate_grid(c: &DseConfig, m: &PhaseLatencyModel) -> Result<Vec<EvaluatedPoint>> {
    let mut ev = Evaluator::new(c, m)?;
    let size = c.grid.size();
    for i in (0..size).step_by(size.div_ceil(c.exhaustive_cap)) {
        ev.at(i)?;
    }
    Ok(ev.seen.into_values().collect())
}

/// Searches the configured grid. Grids up to `exhaustive_cap` points are
/// enumerated; larger ones are sampled at a fixed stride and the best sample
/// is refined by coordinate descent.
pub fn search(c: &DseConfig, m: &PhaseLatencyModel) -> Result<DseResult> {
    let mut ev = Evaluator::new(c, m)?;
    let size = c.grid.size();
    let exhaustive = size <= c.exhaustive_cap;
    let stride = if exhaustive { 1 } else { size.div_ceil(c.exhaustive_cap) };
    let mut best = None;
    for i in (0..size).step_by(stride) {
        if ev.better(i, best)? {
            best = Some(i);
        }
    }
    if !exhaustive {
        if let Some(b) = best {
            best = Some(coordinate_descent(&mut ev, b)?);
        }
    }
    let evaluated: Vec<EvaluatedPoint> = ev.seen.into_values().collect();
    let Some(b) = best else {
        return Err(Error::NoFeasibleDesign {
            evaluated: evaluated.len(),
        });
    };
    let winner = evaluated.iter().find(|p| p.index == b).expect("winner was evaluated").clone();
    log::debug!("dse: {} points, winner {} obj {}", evaluated.len(), b, winner.eval.objective);
    Ok(DseResult {
        best: winner.point,
        best_eval: winner.eval,
        objective: winner.eval.objective,
        pareto: pareto_front(&evaluated),
        infeasible_count: evaluated.iter().filter(|p| p.status.is_err()).count(),
        evaluated,
        shrink_trace: Vec::new(),
        exhaustive,
    })
}

/// Searches with only the hard device limit, then shrinks the winner until
/// it fits the routable LUT fraction.
pub fn search_with_shrink(c: &DseConfig, m: &PhaseLatencyModel) -> Result<DseResult> {
    let relaxed = DseConfig {
        routability_margin: 1.0,
        ..c.clone()
    };
    let mut r = search(&relaxed, m)?;
    let t_pre_max = c.resolved_t_pre_max(m)?;
    for p in &mut r.evaluated {
        p.status = classify(&p.point, c, p.eval.t_pre, t_pre_max);
    }
    r.infeasible_count = r.evaluated.iter().filter(|p| p.status.is_err()).count();
    r.pareto = pareto_front(&r.evaluated);
    let (best, trace) = shrink_until_routable(&r.best, c, m)?;
    r.best_eval = evaluate(m, &best, c)?;
    r.objective = r.best_eval.objective;
    r.best = best;
    r.shrink_trace = trace;
    Ok(r)
}
