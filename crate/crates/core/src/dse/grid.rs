use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perf::{PortMap, PortRole, ResourceVector};

/// How the DDR ports are split between tensor roles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PortLayout {
    /// Every port streams whatever is pending.
    Shared,
    /// One port each for Q, K, V and output; extra ports shared.
    Qkvo,
    /// First half of the ports on K, the rest on V.
    KvSplit,
}

impl PortLayout {
    pub fn build(self, n_ports: usize, per_port_bw: f64) -> Result<PortMap> {
        use PortRole::*;
        let roles = match self {
            PortLayout::Shared => vec![Shared; n_ports],
            PortLayout::Qkvo => {
                if n_ports < 4 {
                    return Err(Error::param("port_layout", "qkvo needs at least 4 ports"));
                }
                let mut r = vec![Q, K, V, Out];
                r.resize(n_ports, Shared);
                r
            }
            PortLayout::KvSplit => {
                if n_ports < 2 {
                    return Err(Error::param("port_layout", "kv_split needs at least 2 ports"));
                }
                let k = n_ports / 2;
                (0..n_ports).map(|i| if i < k { K } else { V }).collect()
            }
        };
        PortMap::new(roles, per_port_bw)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PortLayout::Shared => "shared",
            PortLayout::Qkvo => "qkvo",
            PortLayout::KvSplit => "kv_split",
        }
    }
}

/// Resources of one module as an affine function of its parallel units
/// (`PE count × parallelism`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModuleEstimate {
    pub fixed: ResourceVector,
    pub per_unit: ResourceVector,
}

impl ModuleEstimate {
    /// Splits a measured `reference` footprint at `reference_units` into a
    /// fixed share and a linearly scaling share.
    pub fn seeded(reference: ResourceVector, reference_units: f64, fixed_fraction: f64) -> Self {
        ModuleEstimate {
            fixed: reference.scale(fixed_fraction),
            per_unit: reference.scale((1.0 - fixed_fraction) / reference_units),
        }
    }

    pub fn at(&self, units: f64) -> ResourceVector {
        self.fixed + self.per_unit.scale(units)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceEstimator {
    pub proj: ModuleEstimate,
    pub att_pre: ModuleEstimate,
    pub att_dec: ModuleEstimate,
}

/// Tunable parameters of one design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Knobs {
    pub proj_par: u32,
    pub pre_pe: u32,
    pub pre_par: u32,
    pub dec_pe: u32,
    pub dec_par: u32,
    pub dec_ports: PortLayout,
}

impl Knobs {
    pub fn proj_units(&self) -> f64 {
        self.proj_par as f64
    }

    pub fn pre_units(&self) -> f64 {
        self.pre_pe as f64 * self.pre_par as f64
    }

    pub fn dec_units(&self) -> f64 {
        self.dec_pe as f64 * self.dec_par as f64
    }
}

pub const AXES: usize = 6;

/// Candidate levels per knob, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub proj_par: Vec<u32>,
    pub pre_pe: Vec<u32>,
    pub pre_par: Vec<u32>,
    pub dec_pe: Vec<u32>,
    pub dec_par: Vec<u32>,
    pub dec_ports: Vec<PortLayout>,
}

impl Grid {
    pub fn singleton(k: Knobs) -> Self {
        Grid {
            proj_par: vec![k.proj_par],
            pre_pe: vec![k.pre_pe],
            pre_par: vec![k.pre_par],
            dec_pe: vec![k.dec_pe],
            dec_par: vec![k.dec_par],
            dec_ports: vec![k.dec_ports],
        }
    }

    pub fn dims(&self) -> [usize; AXES] {
        [
            self.proj_par.len(),
            self.pre_pe.len(),
            self.pre_par.len(),
            self.dec_pe.len(),
            self.dec_par.len(),
            self.dec_ports.len(),
        ]
    }

    pub fn size(&self) -> usize {
        self.dims().iter().product()
    }

    pub fn validate(&self) -> Result<()> {
        let names = ["proj_par", "pre_pe", "pre_par", "dec_pe", "dec_par", "dec_ports"];
        for (name, n) in names.iter().zip(self.dims()) {
            if n == 0 {
                return Err(Error::config(format!("dse.grid.{name}"), "must not be empty"));
            }
        }
        let numeric = [
            &self.proj_par,
            &self.pre_pe,
            &self.pre_par,
            &self.dec_pe,
            &self.dec_par,
        ];
        for (name, levels) in names.iter().zip(numeric) {
            if levels.contains(&0) {
                return Err(Error::config(format!("dse.grid.{name}"), "levels must be positive"));
            }
            if levels.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::config(
                    format!("dse.grid.{name}"),
                    "levels must be strictly increasing",
                ));
            }
        }
        Ok(())
    }

    pub fn knobs_at(&self, idx: [usize; AXES]) -> Knobs {
        Knobs {
            proj_par: self.proj_par[idx[0]],
            pre_pe: self.pre_pe[idx[1]],
            pre_par: self.pre_par[idx[2]],
            dec_pe: self.dec_pe[idx[3]],
            dec_par: self.dec_par[idx[4]],
            dec_ports: self.dec_ports[idx[5]],
        }
    }

    /// Grid position of `k`, if every knob value is a grid level.
    pub fn locate(&self, k: &Knobs) -> Option<[usize; AXES]> {
        Some([
            self.proj_par.iter().position(|&v| v == k.proj_par)?,
            self.pre_pe.iter().position(|&v| v == k.pre_pe)?,
            self.pre_par.iter().position(|&v| v == k.pre_par)?,
            self.dec_pe.iter().position(|&v| v == k.dec_pe)?,
            self.dec_par.iter().position(|&v| v == k.dec_par)?,
            self.dec_ports.iter().position(|&v| v == k.dec_ports)?,
        ])
    }

    /// Mixed-radix decode of a flat index; the last axis varies fastest.
    pub fn unflatten(&self, mut flat: usize) -> [usize; AXES] {
        let dims = self.dims();
        let mut idx = [0; AXES];
        for axis in (0..AXES).rev() {
            idx[axis] = flat % dims[axis];
            flat /= dims[axis];
        }
        idx
    }

    pub fn flatten(&self, idx: [usize; AXES]) -> usize {
        let dims = self.dims();
        idx.iter().zip(dims).fold(0, |acc, (&i, d)| acc * d + i)
    }
}
