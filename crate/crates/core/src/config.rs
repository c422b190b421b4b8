//! Tool configuration and strict TOML loading.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dse::presets::{self, HP_PORTS, HP_PORT_BW, KV260_TOTAL, REFERENCE_KNOBS};
use crate::dse::{
    DseConfig, Grid, Knobs, PortLayout, ResourceEstimator, DEFAULT_ALPHA, DEFAULT_EXHAUSTIVE_CAP,
    DEFAULT_ROUTABILITY_MARGIN,
};
use crate::error::{Error, Result};
use crate::perf::{Headroom, ResourceVector};
use crate::sim::{ModelShape, ReconfigParams, Trigger};

/// Parses TOML, failing on syntax/type errors and on any key the target type
/// does not know. All unknown keys are listed, not just the first.
pub fn from_toml_str<T: DeserializeOwned>(text: &str, what: &'static str) -> Result<T> {
    let de = toml::Deserializer::parse(text).map_err(|e| Error::format(what, e.to_string()))?;
    let mut unknown = Vec::new();
    let value: T = serde_ignored::deserialize(de, |path| unknown.push(path.to_string()))
        .map_err(|e| Error::format(what, e.to_string().trim_end().to_string()))?;
    if !unknown.is_empty() {
        log::warn!("{what}: unknown keys {}", unknown.join(", "));
        return Err(Error::UnknownKeys(unknown));
    }
    Ok(value)
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn load_toml<T: DeserializeOwned>(path: &Path, what: &'static str) -> Result<T> {
    from_toml_str(&read_text(path)?, what)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSection {
    pub r_total: ResourceVector,
    pub n_ports: usize,
    /// Bytes per second per DDR port.
    pub per_port_bw: f64,
    /// Peak operations per second, for roofline classification.
    pub peak_ops: f64,
    /// Peak DDR bytes per second.
    pub peak_bw: f64,
}

impl Default for DeviceSection {
    fn default() -> Self {
        DeviceSection {
            r_total: KV260_TOTAL,
            n_ports: HP_PORTS,
            per_port_bw: HP_PORT_BW,
            peak_ops: 1.2e12,
            peak_bw: HP_PORTS as f64 * HP_PORT_BW,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSection {
    pub n_layers: usize,
    pub hidden: usize,
    pub heads: usize,
    #[serde(default = "two_thirds")]
    pub ffn_fraction: f64,
    pub prompt_len: u64,
    pub n_gen: u64,
    /// Sequence lengths for throughput and TTFT curves.
    pub sweep: Vec<u64>,
}

fn two_thirds() -> f64 {
    2.0 / 3.0
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            n_layers: 24,
            hidden: 1536,
            heads: 16,
            ffn_fraction: two_thirds(),
            prompt_len: 768,
            n_gen: 128,
            sweep: crate::sim::default_sweep(2048),
        }
    }
}

impl ModelSection {
    pub fn shape(&self) -> ModelShape {
        ModelShape {
            n_layers: self.n_layers,
            ffn_fraction: self.ffn_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSection {
    /// Measurement file, relative to the config file.
    pub measurements: Option<PathBuf>,
    /// Knobs of the design the measurements were taken on.
    #[serde(default = "reference_knobs")]
    pub knobs: Knobs,
    /// Pins the weight-streaming term instead of fitting it.
    pub t_weights: Option<f64>,
    #[serde(default)]
    pub headroom: Headroom,
}

fn reference_knobs() -> Knobs {
    REFERENCE_KNOBS
}

impl Default for CalibrationSection {
    fn default() -> Self {
        CalibrationSection {
            measurements: None,
            knobs: REFERENCE_KNOBS,
            t_weights: None,
            headroom: Headroom::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DseSection {
    pub alpha: f64,
    pub l_long: u64,
    pub l_short: u64,
    pub l_prefill: u64,
    pub t_pre_max: Option<f64>,
    pub routability_margin: f64,
    pub exhaustive_cap: usize,
    pub reserved: ResourceVector,
    pub ports_pre: PortLayout,
    pub grid: Grid,
    pub estimator: ResourceEstimator,
}

impl Default for DseSection {
    fn default() -> Self {
        DseSection {
            alpha: DEFAULT_ALPHA,
            l_long: 2048,
            l_short: 64,
            l_prefill: 768,
            t_pre_max: None,
            routability_margin: DEFAULT_ROUTABILITY_MARGIN,
            exhaustive_cap: DEFAULT_EXHAUSTIVE_CAP,
            reserved: presets::RESERVED_STATIC,
            ports_pre: PortLayout::Shared,
            grid: presets::grid(),
            estimator: presets::estimator(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconfigSection {
    pub t_reconfig: f64,
    pub trigger: Trigger,
    #[serde(default = "yes")]
    pub confirm_before_decode: bool,
}

fn yes() -> bool {
    true
}

impl Default for ReconfigSection {
    fn default() -> Self {
        ReconfigSection {
            t_reconfig: 0.045,
            trigger: Trigger::AfterLastAttention,
            confirm_before_decode: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ToolConfig {
    pub device: DeviceSection,
    pub model: ModelSection,
    #[serde(default)]
    pub calibration: CalibrationSection,
    pub dse: DseSection,
    pub reconfig: ReconfigSection,
    /// Directory relative paths resolve against; not part of the file.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be positive, got {v}")))
    }
}

fn at_least_one(field: &str, v: u64) -> Result<()> {
    if v >= 1 {
        Ok(())
    } else {
        Err(Error::config(field, "must be at least 1"))
    }
}

impl ToolConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: ToolConfig = from_toml_str(text, "config")?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut c = Self::from_toml(&read_text(path)?)?;
        c.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.device;
        for (i, v) in d.r_total.to_array().iter().enumerate() {
            if !(v.is_finite() && *v >= 0.0) {
                return Err(Error::config(
                    format!("device.r_total.{}", ResourceVector::NAMES[i]),
                    "must be nonnegative",
                ));
            }
        }
        at_least_one("device.n_ports", d.n_ports as u64)?;
        positive("device.per_port_bw", d.per_port_bw)?;
        positive("device.peak_ops", d.peak_ops)?;
        positive("device.peak_bw", d.peak_bw)?;

        let m = &self.model;
        at_least_one("model.n_layers", m.n_layers as u64)?;
        at_least_one("model.hidden", m.hidden as u64)?;
        at_least_one("model.heads", m.heads as u64)?;
        if !m.hidden.is_multiple_of(m.heads) {
            return Err(Error::config("model.heads", "must divide model.hidden"));
        }
        at_least_one("model.prompt_len", m.prompt_len)?;
        at_least_one("model.n_gen", m.n_gen)?;
        if m.sweep.is_empty() {
            return Err(Error::config("model.sweep", "must not be empty"));
        }
        if m.sweep.contains(&0) {
            return Err(Error::config("model.sweep", "lengths must be at least 1"));
        }
        self.shape().validate()?;

        let cal = &self.calibration;
        if let Some(t) = cal.t_weights {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::config("calibration.t_weights", "must be nonnegative"));
            }
        }
        for (name, v) in [
            ("calibration.headroom.proj", cal.headroom.proj),
            ("calibration.headroom.att_pre", cal.headroom.att_pre),
            ("calibration.headroom.att_dec", cal.headroom.att_dec),
        ] {
            positive(name, v)?;
        }

        self.dse_config().validate()?;
        self.reconfig_params().validate()?;
        Ok(())
    }

    pub fn shape(&self) -> ModelShape {
        self.model.shape()
    }

    pub fn head_dim(&self) -> usize {
        self.model.hidden / self.model.heads
    }

    pub fn dse_config(&self) -> DseConfig {
        let s = &self.dse;
        DseConfig {
            r_total: self.device.r_total,
            reserved: s.reserved,
            alpha: s.alpha,
            l_long: s.l_long,
            l_short: s.l_short,
            l_prefill: s.l_prefill,
            t_pre_max: s.t_pre_max,
            routability_margin: s.routability_margin,
            exhaustive_cap: s.exhaustive_cap,
            n_ports: self.device.n_ports,
            per_port_bw: self.device.per_port_bw,
            ports_pre: s.ports_pre,
            grid: s.grid.clone(),
            estimator: s.estimator,
        }
    }

    pub fn reconfig_params(&self) -> ReconfigParams {
        ReconfigParams {
            t_reconfig: self.reconfig.t_reconfig,
            trigger: self.reconfig.trigger,
            confirm_before_decode: self.reconfig.confirm_before_decode,
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}
