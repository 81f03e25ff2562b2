//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 for invalid arguments or values, 2 for file
//! I/O and format errors. Failures print one `error: ...` line on stderr.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::degrade::{make_lr, DegradeSpec};
use crate::error::{Error, Result};
use crate::gradcheck::random_trials;
use crate::io::{read_color, read_depth, write_depth, write_error_heatmap, RunConfig};
use crate::loss::metrics;
use crate::refine::RefineTrace;
use crate::types::DepthMap;

#[derive(Debug, Parser)]
#[command(name = "depthbins", version, about = "Degradation-driven binning for depth super-resolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a low-resolution observation of a ground-truth depth map.
    Degrade {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4.0)]
        scale: f64,
        #[arg(long, default_value_t = 0.0)]
        blur_sigma: f64,
        #[arg(long, default_value_t = 0.0)]
        noise_mean: f64,
        #[arg(long, default_value_t = 0.0)]
        noise_sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Super-resolve a low-resolution depth map guided by a colour image.
    Refine {
        #[arg(long)]
        lr: PathBuf,
        #[arg(long)]
        color: PathBuf,
        /// TOML run configuration; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Directory for per-stage depth and entropy dumps.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Compare a prediction with ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Print a single JSON line instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Check analytic gradients against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 1e-4)]
        step: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fail when the worst relative error exceeds this.
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
    },
    /// Write a colour-coded absolute error map as PPM.
    Errmap {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.to_string();
            eprintln!("{}", msg.lines().next().unwrap_or("invalid arguments"));
            return 1;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_io() {
                2
            } else {
                1
            }
        }
    }
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Degrade { input, out, scale, blur_sigma, noise_mean, noise_sigma, seed } => {
            let gt = read_depth(&input)?;
            let spec = DegradeSpec { scale, blur_sigma, noise_mean, noise_sigma, seed };
            write_depth(&make_lr(&gt, &spec)?, &out)
        }
        Command::Refine { lr, color, config, out, trace } => {
            let cfg = match config {
                Some(path) => RunConfig::load(path)?,
                None => RunConfig::default(),
            };
            let lr = read_depth(&lr)?;
            let color = read_color(&color)?;
            let (depth, stages) = cfg.run(&color, &lr)?;
            write_depth(&depth, &out)?;
            if let Some(dir) = trace {
                write_trace(&stages, &dir)?;
            }
            Ok(())
        }
        Command::Eval { pred, gt, json } => {
            let report = metrics(&read_depth(&pred)?, &read_depth(&gt)?)?;
            if json {
                println!("{}", report.to_json_line());
            } else {
                println!("rmse    {:.6}", report.rmse);
                println!("mae     {:.6}", report.mae);
                for i in 1..=3 {
                    println!("delta{i}  {:.4}", report.delta(i));
                }
                println!("pixels  {}", report.valid_pixels);
            }
            Ok(())
        }
        Command::Gradcheck { trials, step, seed, tol } => {
            let report = random_trials(trials, step, seed)?;
            println!("{}", report.to_json_line());
            if report.max_rel_error > tol {
                return Err(Error::InvalidParam(format!(
                    "max relative error {:e} exceeds {tol:e}",
                    report.max_rel_error
                )));
            }
            Ok(())
        }
        Command::Errmap { pred, gt, out } => write_error_heatmap(&read_depth(&pred)?, &read_depth(&gt)?, &out),
    }
}

/// `stage{i}_depth.raw` and `stage{i}_entropy.pfm` for each stage.
fn write_trace(trace: &RefineTrace, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", dir.display()))))?;
    for (i, (depth, probs)) in trace.per_stage_depths.iter().zip(&trace.per_stage_probs).enumerate() {
        write_depth(depth, dir.join(format!("stage{}_depth.raw", i + 1)))?;
        let entropy = DepthMap::from_values(probs.height(), probs.width(), probs.entropy())?;
        write_depth(&entropy, dir.join(format!("stage{}_entropy.pfm", i + 1)))?;
    }
    Ok(())
}
