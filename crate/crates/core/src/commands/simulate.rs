use std::path::PathBuf;

use serde::Serialize;

use super::{load_config, load_design, load_model, write_out};
use crate::error::Result;
use crate::sim::{
    compare_csv, compare_designs, overhead_report, simulate_end_to_end, sweep, sweep_csv, CompareRow, EndToEnd,
    OverheadReport, Scenario,
};

#[derive(Debug, Clone, Default)]
pub struct SimulateArgs {
    pub config: Option<PathBuf>,
    pub model: PathBuf,
    pub design: Option<PathBuf>,
    /// Overrides `model.sweep`.
    pub sweep: Option<Vec<u64>>,
    /// Overrides `model.prompt_len`.
    pub prompt_len: Option<u64>,
    /// Simulate a static design with no swap.
    pub no_swap: bool,
    pub out_dir: PathBuf,
}

#[derive(Serialize)]
struct Summary {
    prompt_len: u64,
    n_gen: u64,
    prefill_end_s: f64,
    ttft_s: f64,
    decode_tps: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    overhead: Option<OverheadReport>,
}

/// Writes `timeline.csv` for one request, `curves.csv` over the sweep and a
/// `simulate.toml` summary.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<EndToEnd> {
    let cfg = load_config(args.config.as_deref())?;
    let model = load_model(&args.model)?;
    let design = load_design(args.design.as_deref(), &model)?;
    let shape = cfg.shape();
    let rp = cfg.reconfig_params();
    let rp = (!args.no_swap).then_some(&rp);
    let prompt = args.prompt_len.unwrap_or(cfg.model.prompt_len);
    let run = simulate_end_to_end(&model, &shape, &design, prompt, cfg.model.n_gen, rp)?;
    let overhead = rp.map(|rp| overhead_report(&run.timeline, rp)).transpose()?;
    let lengths = args.sweep.clone().unwrap_or_else(|| cfg.model.sweep.clone());
    let rows = sweep(
        &Scenario {
            model: &model,
            design: &design,
            reconfig: rp,
        },
        &shape,
        &lengths,
    )?;
    let summary = Summary {
        prompt_len: prompt,
        n_gen: cfg.model.n_gen,
        prefill_end_s: run.prefill_end,
        ttft_s: run.ttft,
        decode_tps: run.decode_throughput,
        overhead,
    };
    write_out(&args.out_dir, "timeline.csv", &run.timeline.to_csv())?;
    write_out(&args.out_dir, "curves.csv", &sweep_csv(&rows))?;
    write_out(
        &args.out_dir,
        "simulate.toml",
        &toml::to_string_pretty(&summary).expect("summary serializes"),
    )?;
    Ok(run)
}

#[derive(Debug, Clone, Default)]
pub struct CompareArgs {
    pub config: Option<PathBuf>,
    /// Candidate (swapping) design's model and design.
    pub model: PathBuf,
    pub design: Option<PathBuf>,
    /// Static baseline's model and design; the baseline never swaps.
    pub baseline_model: PathBuf,
    pub baseline_design: Option<PathBuf>,
    pub sweep: Option<Vec<u64>>,
    pub out_dir: PathBuf,
}

/// Writes `compare.csv`: per-length throughput and TTFT of both designs.
pub fn cmd_compare(args: &CompareArgs) -> Result<Vec<CompareRow>> {
    let cfg = load_config(args.config.as_deref())?;
    let cand_model = load_model(&args.model)?;
    let cand_design = load_design(args.design.as_deref(), &cand_model)?;
    let base_model = load_model(&args.baseline_model)?;
    let base_design = load_design(args.baseline_design.as_deref(), &base_model)?;
    let rp = cfg.reconfig_params();
    let lengths = args.sweep.clone().unwrap_or_else(|| cfg.model.sweep.clone());
    let rows = compare_designs(
        &Scenario {
            model: &base_model,
            design: &base_design,
            reconfig: None,
        },
        &Scenario {
            model: &cand_model,
            design: &cand_design,
            reconfig: Some(&rp),
        },
        &cfg.shape(),
        &lengths,
    )?;
    write_out(&args.out_dir, "compare.csv", &compare_csv(&rows))?;
    Ok(rows)
}
