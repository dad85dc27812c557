use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use seawatch::Parameter;

mod deploy;
mod io;
mod maps;
mod prepare;

#[derive(Parser)]
#[command(name = "seawatch", version, about = "Onboard coastal water-quality pipeline")]
struct Cli {
    /// Seed for every random draw made by the command.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene and push it through the sensor simulator.
    Simulate {
        /// Simulation spec JSON, or `bundled` for the built-in demo scene.
        #[arg(long, default_value = "bundled")]
        spec: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Match in-situ records against patches and write a sample store.
    BuildDataset {
        #[arg(long)]
        records: PathBuf,
        /// Directory of PAT1 patches with sidecars.
        #[arg(long)]
        patches: PathBuf,
        #[arg(long)]
        parameter: Parameter,
        #[arg(long, default_value_t = seawatch::dataset::DEFAULT_TOLERANCE_DAYS)]
        tolerance_days: i64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Train the fully-connected regressor.
    Train {
        #[arg(long)]
        samples: PathBuf,
        /// Training config JSON; defaults apply to missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
        /// `identity` or `log1p`.
        #[arg(long, default_value = "identity")]
        target_transform: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Fold a trained regressor into a 1x1 convolutional network and verify it.
    Transfer {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Verification patches; seeded random patches when absent.
        #[arg(long)]
        patches: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run a convolutional network over a scene and write one map per patch.
    Infer {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        /// Mask raster (cloud, cloud_shadow, cirrus) aligned with the scene.
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Threshold maps, emit alert messages and an alert mosaic.
    Alert {
        /// Directory written by `infer`.
        #[arg(long)]
        maps: PathBuf,
        /// Policy JSON, or `default` for the parameter's preset.
        #[arg(long, default_value = "default")]
        policy: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        mosaic: Option<PathBuf>,
        /// Minimum exceed fraction for a patch to raise a message.
        #[arg(long)]
        min_exceed_fraction: Option<f64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Convert a network to binary16 and measure the map deviation.
    Quantize {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        patches: Option<PathBuf>,
        #[arg(long, default_value_t = seawatch::quantbench::DEFAULT_MAX_DEVIATION)]
        max_deviation: f64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Time per-patch inference.
    Bench {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        patches: Option<PathBuf>,
        /// Random patches to time when no directory is given.
        #[arg(long, default_value_t = 4)]
        count: usize,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long, default_value_t = 2)]
        warmup: usize,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Render one band of a PAT1 raster as a binary PGM.
    Plot {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, default_value_t = 0)]
        band: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Simulate { spec, out } => prepare::simulate(&spec, &out, seed),
        Command::BuildDataset {
            records,
            patches,
            parameter,
            tolerance_days,
            out,
            report,
        } => prepare::build_dataset(&records, &patches, parameter, tolerance_days, &out, report.as_deref()),
        Command::Train {
            samples,
            config,
            target_transform,
            out,
            report,
        } => prepare::train(&samples, config.as_deref(), &target_transform, &out, report.as_deref(), seed),
        Command::Transfer {
            model,
            out,
            patches,
            tol,
            report,
        } => deploy::transfer(&model, &out, patches.as_deref(), tol, report.as_deref(), seed),
        Command::Infer {
            net,
            scene,
            mask,
            out,
            jobs,
        } => maps::infer(&net, &scene, mask.as_deref(), &out, jobs),
        Command::Alert {
            maps: dir,
            policy,
            out,
            mosaic,
            min_exceed_fraction,
            jobs,
        } => maps::alert(&dir, &policy, &out, mosaic.as_deref(), min_exceed_fraction, jobs),
        Command::Quantize {
            net,
            out,
            patches,
            max_deviation,
            report,
        } => deploy::quantize(&net, &out, patches.as_deref(), max_deviation, report.as_deref(), seed),
        Command::Bench {
            net,
            patches,
            count,
            reps,
            warmup,
            report,
        } => deploy::bench(&net, patches.as_deref(), count, reps, warmup, report.as_deref(), seed),
        Command::Plot { map, band, out } => maps::plot(&map, band, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
