//! Subcommand implementations behind the `ternaccel` binary. Each writes its
//! artifacts into an output directory and returns a short summary.

mod calibrate;
mod dse;
mod simulate;
mod verify;

use std::path::Path;

pub use calibrate::{cmd_calibrate, CalibrateArgs};
pub use dse::{cmd_dse, DseArgs};
pub use simulate::{cmd_compare, cmd_simulate, CompareArgs, SimulateArgs};
pub use verify::{cmd_verify_kernels, Fault, SuiteResult, VerifyArgs, VerifyReport};

use crate::config::{load_toml, ToolConfig};
use crate::dse::DesignPoint;
use crate::error::{Error, Result};
use crate::perf::PhaseLatencyModel;

/// Process exit statuses.
pub mod exit {
    pub const OK: u8 = 0;
    pub const OTHER: u8 = 1;
    pub const VALIDATION: u8 = 2;
    pub const MISMATCH: u8 = 3;
    pub const INFEASIBLE: u8 = 4;
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => exit::OTHER,
        Error::NoFeasibleDesign { .. } | Error::NoRoutableDesign(_) | Error::Infeasible(_) => exit::INFEASIBLE,
        _ => exit::VALIDATION,
    }
}

pub(crate) fn write_out(dir: &Path, name: &str, content: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(|e| Error::io(&path, e))
}

pub(crate) fn load_config(path: Option<&Path>) -> Result<ToolConfig> {
    match path {
        Some(p) => ToolConfig::load(p),
        None => Ok(ToolConfig::default()),
    }
}

pub fn load_model(path: &Path) -> Result<PhaseLatencyModel> {
    let m: PhaseLatencyModel = load_toml(path, "latency model")?;
    m.validate()?;
    Ok(m)
}

/// A design file, or the model's own baseline when none is given.
pub fn load_design(path: Option<&Path>, m: &PhaseLatencyModel) -> Result<DesignPoint> {
    match path {
        Some(p) => load_toml(p, "design point"),
        None => Ok(DesignPoint::new(m.baseline.clone())),
    }
}
