use std::path::PathBuf;

use super::{load_config, write_out};
use crate::config::read_text;
use crate::error::{Error, Result};
use crate::perf::{calibrate, parse_measurements, CalibrationOptions, CalibrationReport, PhaseLatencyModel};

#[derive(Debug, Clone, Default)]
pub struct CalibrateArgs {
    pub config: Option<PathBuf>,
    /// Overrides the measurement file named in the config.
    pub measurements: Option<PathBuf>,
    pub out_dir: PathBuf,
}

/// Fits a latency model to measured timings and writes `model.toml` and
/// `residuals.csv`.
pub fn cmd_calibrate(args: &CalibrateArgs) -> Result<(PhaseLatencyModel, CalibrationReport)> {
    let cfg = load_config(args.config.as_deref())?;
    let path = match (&args.measurements, &cfg.calibration.measurements) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => cfg.resolve(p),
        (None, None) => {
            return Err(Error::config(
                "calibration.measurements",
                "no measurement file given in config or on the command line",
            ))
        }
    };
    let records = parse_measurements(&read_text(&path)?)?;
    let baseline = cfg.dse_config().design_at(&cfg.calibration.knobs)?.allocation;
    let opts = CalibrationOptions {
        t_weights: cfg.calibration.t_weights,
    };
    let (model, report) = calibrate(&records, baseline, cfg.calibration.headroom, opts)?;
    write_out(&args.out_dir, "model.toml", &model.to_toml())?;
    write_out(&args.out_dir, "residuals.csv", &report.to_csv())?;
    Ok((model, report))
}
