use std::path::PathBuf;

use super::{load_config, load_model, write_out};
use crate::dse::{evaluate_grid, evaluated_csv, search, search_with_shrink, DseResult};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct DseArgs {
    pub config: Option<PathBuf>,
    pub model: PathBuf,
    pub alpha: Option<f64>,
    /// Search against the device limit, then shrink the winner until it routes.
    pub shrink: bool,
    pub out_dir: PathBuf,
}

/// Runs the search and writes `dse_report.toml`, `dse_points.csv` and the
/// winning `design.toml`. With no feasible point only the CSV is written.
pub fn cmd_dse(args: &DseArgs) -> Result<DseResult> {
    let cfg = load_config(args.config.as_deref())?;
    let model = load_model(&args.model)?;
    let mut c = cfg.dse_config();
    if let Some(a) = args.alpha {
        c.alpha = a;
    }
    c.validate()?;
    let result = if args.shrink { search_with_shrink(&c, &model) } else { search(&c, &model) };
    let r = match result {
        Ok(r) => r,
        Err(e @ Error::NoFeasibleDesign { .. }) => {
            // Still record what was tried.
            write_out(&args.out_dir, "dse_points.csv", &evaluated_csv(&evaluate_grid(&c, &model)?))?;
            return Err(e);
        }
        Err(e) => return Err(e),
    };
    write_out(&args.out_dir, "dse_report.toml", &r.report(&c))?;
    write_out(&args.out_dir, "dse_points.csv", &evaluated_csv(&r.evaluated))?;
    write_out(&args.out_dir, "design.toml", &r.best.to_toml())?;
    Ok(r)
}
