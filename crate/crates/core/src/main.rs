use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ternaccel::commands::{
    cmd_calibrate, cmd_compare, cmd_dse, cmd_simulate, cmd_verify_kernels, exit, exit_code, CalibrateArgs,
    CompareArgs, DseArgs, Fault, SimulateArgs, VerifyArgs,
};
use ternaccel::Error;

#[derive(Parser)]
#[command(name = "ternaccel", version, about = "Kernel oracles, latency model, DSE and swap simulation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the table-lookup matmul and attention kernels against references.
    VerifyKernels {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated `RxC` sizes, e.g. `16x64,128x96`.
        #[arg(long, value_delimiter = ',', value_parser = parse_size)]
        sizes: Option<Vec<(usize, usize)>>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Fit latency coefficients to measured timings.
    Calibrate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        measurements: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Search PE counts, parallelism and port maps for the lowest latency.
    Dse {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        shrink: bool,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Simulate one request and sweep throughput/TTFT over lengths.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        design: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        sweep: Option<Vec<u64>>,
        #[arg(long)]
        prompt_len: Option<u64>,
        #[arg(long)]
        no_swap: bool,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Compare a swapping design against a static baseline.
    Compare {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        design: Option<PathBuf>,
        #[arg(long)]
        baseline_model: PathBuf,
        #[arg(long)]
        baseline_design: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        sweep: Option<Vec<u64>>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s.split_once('x').ok_or_else(|| format!("expected RxC, got {s:?}"))?;
    let r = r.parse().map_err(|e| format!("{s:?}: {e}"))?;
    let c = c.parse().map_err(|e| format!("{s:?}: {e}"))?;
    if r == 0 || c == 0 {
        return Err(format!("{s:?}: sizes must be positive"));
    }
    Ok((r, c))
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.cmd {
        Cmd::VerifyKernels {
            seed,
            sizes,
            out_dir,
            inject_fault,
        } => {
            let mut args = VerifyArgs {
                seed,
                out_dir,
                fault: if inject_fault { Fault::PackedWeights } else { Fault::None },
                ..VerifyArgs::default()
            };
            if let Some(s) = sizes {
                args.sizes = s;
            }
            let report = cmd_verify_kernels(&args)?;
            print!("{}", report.to_csv());
            Ok(if report.passed() { exit::OK } else { exit::MISMATCH })
        }
        Cmd::Calibrate {
            config,
            measurements,
            out_dir,
        } => {
            let (model, report) = cmd_calibrate(&CalibrateArgs {
                config,
                measurements,
                out_dir,
            })?;
            print!("{}", model.to_toml());
            println!("max relative residual: {:.4}", report.max_relative());
            Ok(exit::OK)
        }
        Cmd::Dse {
            config,
            model,
            alpha,
            shrink,
            out_dir,
        } => {
            let args = DseArgs {
                config,
                model,
                alpha,
                shrink,
                out_dir,
            };
            let r = cmd_dse(&args)?;
            println!(
                "objective {:.6} s over {} points ({} infeasible), pareto {} points, {} shrink steps",
                r.objective,
                r.evaluated.len(),
                r.infeasible_count,
                r.pareto.len(),
                r.shrink_trace.len()
            );
            Ok(exit::OK)
        }
        Cmd::Simulate {
            config,
            model,
            design,
            sweep,
            prompt_len,
            no_swap,
            out_dir,
        } => {
            let r = cmd_simulate(&SimulateArgs {
                config,
                model,
                design,
                sweep,
                prompt_len,
                no_swap,
                out_dir,
            })?;
            println!(
                "ttft {:.4} s, exposed swap {:.2} ms, decode {:.2} tok/s",
                r.ttft,
                r.exposed_overhead * 1e3,
                r.decode_throughput
            );
            Ok(exit::OK)
        }
        Cmd::Compare {
            config,
            model,
            design,
            baseline_model,
            baseline_design,
            sweep,
            out_dir,
        } => {
            let rows = cmd_compare(&CompareArgs {
                config,
                model,
                design,
                baseline_model,
                baseline_design,
                sweep,
                out_dir,
            })?;
            print!("{}", ternaccel::sim::compare_csv(&rows));
            Ok(exit::OK)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
