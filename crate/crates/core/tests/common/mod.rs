//! Helpers shared by the integration tests: random synthetic DSE problems and
//! a brute-force reference solver that does not touch the search code.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;

use ternaccel::dse::presets::{self, reference_allocation};
use ternaccel::dse::{DseConfig, Grid, Knobs, ModuleEstimate, PortLayout, ResourceEstimator};
use ternaccel::perf::{Allocation, Coefficients, Headroom, PhaseLatencyModel, ResourceVector};

pub fn random_model(rng: &mut impl Rng) -> PhaseLatencyModel {
    let c = Coefficients {
        p_proj: rng.gen_range(1e-4..2e-2),
        p_atten: rng.gen_range(1e-7..5e-5),
        d_proj: rng.gen_range(5e-3..8e-2),
        d_atten: rng.gen_range(1e-6..1e-4),
        t_weights: if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.0..0.02) },
    };
    let h = Headroom {
        proj: rng.gen_range(0.5..6.0),
        att_pre: rng.gen_range(0.5..10.0),
        att_dec: rng.gen_range(0.25..2.0),
    };
    let layout = *[PortLayout::Qkvo, PortLayout::KvSplit].choose(rng).unwrap();
    PhaseLatencyModel::new(c, reference_allocation(layout), h).unwrap()
}

fn levels(rng: &mut impl Rng, pool: &[u32], min: usize, max: usize) -> Vec<u32> {
    let n = rng.gen_range(min.min(pool.len())..=max.min(pool.len()));
    let mut v: Vec<u32> = pool.choose_multiple(rng, n).copied().collect();
    v.sort_unstable();
    v
}

/// A random problem around the KV260 defaults with `min..=max` levels per
/// knob. Budgets vary enough that some instances have no feasible point.
pub fn random_config(rng: &mut impl Rng, m: &PhaseLatencyModel, min: usize, max: usize) -> DseConfig {
    let pow2 = [1, 2, 4, 8, 16, 32, 64];
    let ports = match rng.gen_range(0..3) {
        0 => vec![PortLayout::Qkvo],
        1 => vec![PortLayout::KvSplit],
        _ => vec![PortLayout::Qkvo, PortLayout::KvSplit],
    };
    let base = DseConfig::default();
    let s = rng.gen_range(0.8..1.6);
    let wobble = |e: ModuleEstimate, rng: &mut dyn rand::RngCore| ModuleEstimate {
        fixed: e.fixed.scale(rng.gen_range(0.5..1.5)),
        per_unit: e.per_unit.scale(rng.gen_range(0.5..1.5)),
    };
    let est = presets::estimator();
    let l_short = rng.gen_range(16..512);
    let l_prefill = rng.gen_range(32..2048);
    DseConfig {
        r_total: presets::KV260_TOTAL.scale(s),
        alpha: rng.gen_range(0.0..=1.0),
        l_short,
        l_long: l_short + rng.gen_range(1..4096),
        l_prefill,
        t_pre_max: if rng.gen_bool(0.5) {
            None
        } else {
            Some(m.prefill_latency(&m.baseline, l_prefill).unwrap() * rng.gen_range(0.5..3.0))
        },
        routability_margin: rng.gen_range(0.75..=1.0),
        grid: Grid {
            proj_par: levels(rng, &pow2[2..], min, max),
            pre_pe: levels(rng, &pow2[..5], min, max),
            pre_par: levels(rng, &pow2[2..], min, max),
            dec_pe: levels(rng, &pow2[..4], min, max),
            dec_par: levels(rng, &pow2[2..], min, max),
            dec_ports: ports,
        },
        estimator: ResourceEstimator {
            proj: wobble(est.proj, rng),
            att_pre: wobble(est.att_pre, rng),
            att_dec: wobble(est.att_dec, rng),
        },
        ..base
    }
}

fn add(a: ResourceVector, b: ResourceVector) -> ResourceVector {
    let (x, y) = (a.to_array(), b.to_array());
    ResourceVector::from_array(std::array::from_fn(|i| x[i] + y[i]))
}

fn module(e: &ModuleEstimate, units: f64) -> ResourceVector {
    let (f, p) = (e.fixed.to_array(), e.per_unit.to_array());
    ResourceVector::from_array(std::array::from_fn(|i| f[i] + p[i] * units))
}

/// Footprint of the whole design: static engine plus the larger of the two
/// attention variants in every resource class.
pub fn used(c: &DseConfig, a: &Allocation) -> ResourceVector {
    let (p, d) = (a.r_att_pre.to_array(), a.r_att_dec.to_array());
    let dynamic = ResourceVector::from_array(std::array::from_fn(|i| p[i].max(d[i])));
    add(add(c.reserved, a.r_proj), dynamic)
}

pub fn oracle_feasible(c: &DseConfig, m: &PhaseLatencyModel, a: &Allocation) -> bool {
    let u = used(c, a).to_array();
    let cap = c.r_total.to_array();
    if u.iter().zip(&cap).any(|(x, y)| x > y) || u[0] > c.routability_margin * cap[0] {
        return false;
    }
    let t_max = c
        .t_pre_max
        .unwrap_or_else(|| 1.25 * m.prefill_latency(&m.baseline, c.l_prefill).unwrap());
    m.prefill_latency(a, c.l_prefill).unwrap() <= t_max
}

pub fn oracle_objective(c: &DseConfig, m: &PhaseLatencyModel, a: &Allocation) -> f64 {
    m.prefill_latency(a, c.l_prefill).unwrap()
        + c.alpha * m.decode_step_latency(a, c.l_long).unwrap()
        + (1.0 - c.alpha) * m.decode_step_latency(a, c.l_short).unwrap()
}

pub fn all_knobs(g: &Grid) -> Vec<Knobs> {
    let mut out = Vec::new();
    for &proj_par in &g.proj_par {
        for &pre_pe in &g.pre_pe {
            for &pre_par in &g.pre_par {
                for &dec_pe in &g.dec_pe {
                    for &dec_par in &g.dec_par {
                        for &dec_ports in &g.dec_ports {
                            out.push(Knobs {
                                proj_par,
                                pre_pe,
                                pre_par,
                                dec_pe,
                                dec_par,
                                dec_ports,
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn oracle_allocation(c: &DseConfig, k: &Knobs) -> Allocation {
    let e = &c.estimator;
    Allocation {
        r_proj: module(&e.proj, k.proj_par as f64),
        r_att_pre: module(&e.att_pre, (k.pre_pe * k.pre_par) as f64),
        r_att_dec: module(&e.att_dec, (k.dec_pe * k.dec_par) as f64),
        ports_pre: c.ports_pre.build(c.n_ports, c.per_port_bw).unwrap(),
        ports_dec: k.dec_ports.build(c.n_ports, c.per_port_bw).unwrap(),
    }
}

/// Minimum objective over every feasible grid point and the knobs that reach
/// it, or `None` when nothing is feasible.
pub fn brute_force(c: &DseConfig, m: &PhaseLatencyModel) -> Option<(f64, Vec<Knobs>)> {
    let scored: Vec<(f64, Knobs)> = all_knobs(&c.grid)
        .into_iter()
        .filter_map(|k| {
            let a = oracle_allocation(c, &k);
            oracle_feasible(c, m, &a).then(|| (oracle_objective(c, m, &a), k))
        })
        .collect();
    let best = scored.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return None;
    }
    let argmin = scored
        .into_iter()
        .filter(|(o, _)| (o - best).abs() <= 1e-12 * best)
        .map(|(_, k)| k)
        .collect();
    Some((best, argmin))
}
