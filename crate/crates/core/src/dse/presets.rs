//! KV260-class defaults. Module footprints are the measured utilization of
//! the reference build; everything else scales linearly from them.

use super::grid::{Grid, Knobs, ModuleEstimate, PortLayout, ResourceEstimator};
use super::{DseConfig, DEFAULT_ALPHA, DEFAULT_EXHAUSTIVE_CAP, DEFAULT_ROUTABILITY_MARGIN};
use crate::perf::{Allocation, ResourceVector};

pub const KV260_TOTAL: ResourceVector = ResourceVector::new(117_120.0, 234_240.0, 1_248.0, 144.0, 64.0);

/// Norm/max unit plus control and DMA glue.
pub const RESERVED_STATIC: ResourceVector = ResourceVector::new(27_642.0, 33_608.0, 52.0, 38.0, 52.0);

pub const PROJ_REFERENCE: ResourceVector = ResourceVector::new(42_854.0, 50_752.0, 320.0, 5.5, 0.0);
pub const ATT_PRE_REFERENCE: ResourceVector = ResourceVector::new(28_400.0, 42_053.0, 303.0, 14.0, 8.0);
pub const ATT_DEC_REFERENCE: ResourceVector = ResourceVector::new(26_418.0, 27_236.0, 278.0, 16.0, 8.0);

pub const HP_PORTS: usize = 4;
/// 128-bit AXI at 300 MHz.
pub const HP_PORT_BW: f64 = 4.8e9;

pub const REFERENCE_KNOBS: Knobs = Knobs {
    proj_par: 16,
    pre_pe: 4,
    pre_par: 8,
    dec_pe: 2,
    dec_par: 16,
    dec_ports: PortLayout::KvSplit,
};

/// Share of a module's footprint that does not scale with parallelism.
pub const FIXED_FRACTION: f64 = 0.25;

pub fn estimator() -> ResourceEstimator {
    let k = REFERENCE_KNOBS;
    ResourceEstimator {
        proj: ModuleEstimate::seeded(PROJ_REFERENCE, k.proj_units(), FIXED_FRACTION),
        att_pre: ModuleEstimate::seeded(ATT_PRE_REFERENCE, k.pre_units(), FIXED_FRACTION),
        att_dec: ModuleEstimate::seeded(ATT_DEC_REFERENCE, k.dec_units(), FIXED_FRACTION),
    }
}

pub fn grid() -> Grid {
    Grid {
        proj_par: vec![4, 8, 16, 32],
        pre_pe: vec![1, 2, 4, 8],
        pre_par: vec![4, 8, 16],
        dec_pe: vec![1, 2, 4],
        dec_par: vec![4, 8, 16, 32],
        dec_ports: vec![PortLayout::Qkvo, PortLayout::KvSplit],
    }
}

/// The measured design with the given decode port layout.
pub fn reference_allocation(dec_ports: PortLayout) -> Allocation {
    Allocation {
        r_proj: PROJ_REFERENCE,
        r_att_pre: ATT_PRE_REFERENCE,
        r_att_dec: ATT_DEC_REFERENCE,
        ports_pre: PortLayout::Shared.build(HP_PORTS, HP_PORT_BW).expect("4 ports"),
        ports_dec: dec_ports.build(HP_PORTS, HP_PORT_BW).expect("4 ports"),
    }
}

impl Default for DseConfig {
    fn default() -> Self {
        DseConfig {
            r_total: KV260_TOTAL,
            reserved: RESERVED_STATIC,
            alpha: DEFAULT_ALPHA,
            l_long: 2048,
            l_short: 64,
            l_prefill: 768,
            t_pre_max: None,
            routability_margin: DEFAULT_ROUTABILITY_MARGIN,
            exhaustive_cap: DEFAULT_EXHAUSTIVE_CAP,
            n_ports: HP_PORTS,
            per_port_bw: HP_PORT_BW,
            ports_pre: PortLayout::Shared,
            grid: grid(),
            estimator: estimator(),
        }
    }
}
