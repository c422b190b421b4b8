use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PortRole {
    Q,
    K,
    V,
    Out,
    Shared,
}

/// Assignment of DDR ports to tensor roles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortMap {
    pub roles: Vec<PortRole>,
    /// Bytes per second per port.
    pub per_port_bw: f64,
}

impl PortMap {
    pub fn new(roles: Vec<PortRole>, per_port_bw: f64) -> Result<Self> {
        let p = PortMap { roles, per_port_bw };
        p.validate()?;
        Ok(p)
    }

    /// One port each for Q, K, V and the output.
    pub fn qkvo(per_port_bw: f64) -> Self {
        use PortRole::*;
        PortMap {
            roles: vec![Q, K, V, Out],
            per_port_bw,
        }
    }

    /// Two ports on K and two on V; Q is bypassed into on-chip buffers and
    /// the output token is held locally until the KV stream completes.
    pub fn kv_split(per_port_bw: f64) -> Self {
        use PortRole::*;
        PortMap {
            roles: vec![K, K, V, V],
            per_port_bw,
        }
    }

    /// Every port streaming shared traffic.
    pub fn shared(n_ports: usize, per_port_bw: f64) -> Self {
        PortMap {
            roles: vec![PortRole::Shared; n_ports],
            per_port_bw,
        }
    }

    pub fn n_ports(&self) -> usize {
        self.roles.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.roles.is_empty() {
            return Err(Error::param("port_map", "at least one port is required"));
        }
        if !(self.per_port_bw.is_finite() && self.per_port_bw > 0.0) {
            return Err(Error::param("per_port_bw", "must be positive"));
        }
        Ok(())
    }

    pub fn total_bandwidth(&self) -> f64 {
        self.per_port_bw * self.roles.len() as f64
    }
}

/// Bandwidth available to KV-cache reads: the sum over ports assigned K or V.
pub fn effective_kv_bandwidth(p: &PortMap) -> f64 {
    let kv = p
        .roles
        .iter()
        .filter(|r| matches!(r, PortRole::K | PortRole::V))
        .count();
    kv as f64 * p.per_port_bw
}
