use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use vorofit::cli::{self, CliError, ConfigOverrides, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Args)]
struct Common {
    /// Grid resolution per axis.
    #[arg(long, global = true)]
    resolution: Option<usize>,
    /// Fitting residual threshold.
    #[arg(long, global = true)]
    eps1: Option<f64>,
    /// Curve proximity threshold between surfaces.
    #[arg(long, global = true)]
    eps2: Option<f64>,
    /// Vertex proximity threshold between curves.
    #[arg(long, global = true)]
    eps3: Option<f64>,
    /// Boundary detector threshold.
    #[arg(long, global = true)]
    tau: Option<f64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Random seed for RANSAC.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

impl Common {
    fn overrides(&self) -> ConfigOverrides {
        ConfigOverrides {
            resolution: self.resolution,
            eps1: self.eps1,
            eps2: self.eps2,
            eps3: self.eps3,
            tau: self.tau,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "vorofit",
    version,
    about = "B-Rep recovery from unsigned distance fields"
)]
struct Invocation {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Voxelize a point file into an NVDU distance field.
    Udf {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Ground-truth labels, boundary and UDF from per-primitive samples.
    Gt {
        manifest: PathBuf,
        #[arg(short, long)]
        out_dir: PathBuf,
    },
    /// Analytic boundary detection on an NVDU field.
    Detect {
        udf: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Process the whole grid at once instead of overlapping patches.
        #[arg(long)]
        whole: bool,
    },
    /// Hole filling and region growing from a boundary grid.
    Cells {
        udf: PathBuf,
        boundary: PathBuf,
        #[arg(short, long)]
        out_dir: PathBuf,
    },
    /// Fit one primitive per cell.
    Fit {
        udf: PathBuf,
        cells: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Samples to fit instead of voxel foot points.
        #[arg(long)]
        points: Option<PathBuf>,
    },
    /// Run a pipeline manifest end to end.
    Pipeline { manifest: PathBuf },
    /// Score a predicted brep.json against a ground-truth one.
    Eval {
        pred: PathBuf,
        gt: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write a synthetic scene with its ground truth and manifests.
    Scene {
        name: String,
        #[arg(short, long)]
        out_dir: PathBuf,
        /// Gaussian noise added to the samples.
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
    },
    /// Point-sampled OBJ of a brep.json.
    Obj {
        brep: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Print the effective configuration.
    Config,
}

fn print<T: Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn run(inv: Invocation) -> Result<i32, CliError> {
    let o = inv.common.overrides();
    cli::with_threads(inv.common.threads, move || -> Result<i32, CliError> {
        match inv.command {
            Command::Pipeline { manifest } => {
                let report = cli::cmd_pipeline(&manifest, &o)?;
                for w in &report.warnings {
                    eprintln!("warning: {w}");
                }
                print(&report);
                return Ok(report.exit_code());
            }
            Command::Udf { input, output } => print(&cli::cmd_udf(&input, &output, &o.config()?)?),
            Command::Gt { manifest, out_dir } => {
                print(&cli::cmd_gt(&manifest, &out_dir, &o.config()?)?)
            }
            Command::Detect { udf, output, whole } => {
                let n = cli::cmd_detect(&udf, &output, &o.config()?, whole)?;
                print(&serde_json::json!({ "boundary_voxels": n }));
            }
            Command::Cells {
                udf,
                boundary,
                out_dir,
            } => {
                let s = cli::cmd_cells(&udf, &boundary, &out_dir, &o.config()?)?;
                print(&serde_json::json!({ "n_cells": s.n_cells }));
            }
            Command::Fit {
                udf,
                cells,
                output,
                points,
            } => {
                let r = cli::cmd_fit(&udf, &cells, points.as_deref(), &output, &o.config()?)?;
                print(&serde_json::json!({ "cells": r.len() }));
            }
            Command::Eval { pred, gt, output } => {
                print(&cli::cmd_eval(&pred, &gt, output.as_deref(), &o.config()?)?)
            }
            Command::Scene {
                name,
                out_dir,
                sigma,
            } => {
                let cfg = o.config()?;
                print(&cli::cmd_scene(&name, &out_dir, &cfg, sigma, cfg.seed)?)
            }
            Command::Obj { brep, output } => cli::cmd_obj(&brep, &output)?,
            Command::Config => print(&o.config()?),
        }
        Ok(EXIT_OK)
    })?
}

fn main() -> ExitCode {
    let inv = match Invocation::try_parse() {
        Ok(inv) => inv,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(inv) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
