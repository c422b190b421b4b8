use serde::Serialize;

use super::grid::AXES;
use super::{feasible, DesignPoint, DseConfig, Violation};
use crate::error::{Error, Result};
use crate::perf::PhaseLatencyModel;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShrinkStep {
    pub point: DesignPoint,
    pub reason: String,
}

// Axis positions of the attention knobs in a grid index.
const PRE_PE: usize = 1;
const PRE_PAR: usize = 2;
const DEC_PE: usize = 3;
const DEC_PAR: usize = 4;

fn axis_name(axis: usize) -> &'static str {
    match axis {
        PRE_PE => "pre_pe",
        PRE_PAR => "pre_par",
        DEC_PE => "dec_pe",
        DEC_PAR => "dec_par",
        _ => unreachable!(),
    }
}

/// Candidate moves for one module: PE count first, then parallelism.
fn module_steps(idx: &[usize; AXES], pe: usize, par: usize) -> Vec<usize> {
    [pe, par].into_iter().filter(|&a| idx[a] > 0).collect()
}

fn strictly_smaller_somewhere(new: &DesignPoint, old: &DesignPoint) -> bool {
    let (n, o) = (new.dynamic_partition().to_array(), old.dynamic_partition().to_array());
    n.iter().zip(&o).any(|(a, b)| a < b)
}

/// Steps PE count or parallelism of the attention variants down one grid
/// level at a time, largest-LUT variant first, until the design routes.
/// Every step shrinks at least one resource class of the dynamic partition.
pub fn shrink_until_routable(
    d: &DesignPoint,
    c: &DseConfig,
    m: &PhaseLatencyModel,
) -> Result<(DesignPoint, Vec<ShrinkStep>)> {
    match feasible(d, c, m) {
        Ok(()) => return Ok((d.clone(), Vec::new())),
        Err(Violation::Routability { .. }) => {}
        Err(v) => return Err(Error::Infeasible(v)),
    }
    let knobs = d
        .knobs
        .ok_or_else(|| Error::param("design", "shrinking needs a grid design with knobs"))?;
    let mut idx = c
        .grid
        .locate(&knobs)
        .ok_or_else(|| Error::param("design", "knobs are not levels of the configured grid"))?;
    let mut cur = d.clone();
    let mut trace = Vec::new();
    loop {
        let a = &cur.allocation;
        let pre_first = a.r_att_pre.lut >= a.r_att_dec.lut;
        let (first, second) = if pre_first {
            ((PRE_PE, PRE_PAR), (DEC_PE, DEC_PAR))
        } else {
            ((DEC_PE, DEC_PAR), (PRE_PE, PRE_PAR))
        };
        let mut moves: Vec<Vec<usize>> = module_steps(&idx, first.0, first.1)
            .into_iter()
            .chain(module_steps(&idx, second.0, second.1))
            .map(|a| vec![a])
            .collect();
        // When both variants tie, only shrinking both lowers the max.
        if let (Some(&x), Some(&y)) = (
            module_steps(&idx, first.0, first.1).first(),
            module_steps(&idx, second.0, second.1).first(),
        ) {
            moves.push(vec![x, y]);
        }
        let mut stepped = None;
        for mv in moves {
            let mut next = idx;
            for &axis in &mv {
                next[axis] -= 1;
            }
            let p = c.design_at(&c.grid.knobs_at(next))?;
            if strictly_smaller_somewhere(&p, &cur) {
                stepped = Some((next, p, mv));
                break;
            }
        }
        let Some((next, p, mv)) = stepped else {
            return Err(Error::NoRoutableDesign(format!(
                "grid exhausted after {} steps; dynamic partition still {}",
                trace.len(),
                cur.dynamic_partition()
            )));
        };
        let names: Vec<String> = mv
            .iter()
            .map(|&axis| {
                let old = c.grid.knobs_at(idx);
                let new = c.grid.knobs_at(next);
                let (o, n) = match axis {
                    PRE_PE => (old.pre_pe, new.pre_pe),
                    PRE_PAR => (old.pre_par, new.pre_par),
                    DEC_PE => (old.dec_pe, new.dec_pe),
                    _ => (old.dec_par, new.dec_par),
                };
                format!("{} {o} -> {n}", axis_name(axis))
            })
            .collect();
        let status = feasible(&p, c, m);
        let why = match &feasible(&cur, c, m) {
            Err(v) => v.to_string(),
            Ok(()) => unreachable!("loop only runs while infeasible"),
        };
        trace.push(ShrinkStep {
            point: p.clone(),
            reason: format!("{why}; {}", names.join(", ")),
        });
        idx = next;
        cur = p;
        match status {
            Ok(()) => return Ok((cur, trace)),
            Err(Violation::Routability { .. }) => continue,
            Err(v) => {
                return Err(Error::NoRoutableDesign(format!(
                    "shrinking to route broke another constraint: {v}"
                )))
            }
        }
    }
}
