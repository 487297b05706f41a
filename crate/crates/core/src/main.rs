use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mshot::io::{self, ImageFormat};
use mshot::phantom::{shepp_logan, shepp_logan_slice};
use mshot::pipeline::{self, sample_rng, ExperimentConfig, Simulator, Source};
use mshot::sense::{KrylovMethod, ReconConfig};
use mshot::trajectory::{export_masks, make_trajectory, TrajectoryKind};
use mshot::{forward_corrupt, ComplexImage, Error, Result};

#[derive(Parser)]
#[command(
    name = "mshot",
    version,
    about = "Multishot MRI motion simulation and CG-SENSE reconstruction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a Shepp-Logan phantom image.
    Phantom {
        #[arg(long, default_value_t = 64)]
        n: usize,
        /// Axial slice height in (-1, 1); omit for the 2-D phantom.
        #[arg(long)]
        slice: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate motion-corrupted multi-coil k-space for one image.
    Simulate {
        /// Clean input image (raw-f32 or 8-bit raster); phantom if omitted.
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_kspace: PathBuf,
        #[arg(long)]
        out_coils: PathBuf,
        /// Optional JSON file receiving the sampled motion schedule.
        #[arg(long)]
        schedule_out: Option<PathBuf>,
    },
    /// CG-SENSE reconstruction of stored k-space.
    Reconstruct {
        #[arg(long)]
        kspace: PathBuf,
        #[arg(long)]
        coils: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        recon: ReconArgs,
        /// Write the `iter,residual` convergence log here.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// PSNR / SSIM / artifact power as CSV.
    Metrics {
        #[arg(long, conflicts_with_all = ["reference", "test"])]
        manifest: Option<PathBuf>,
        #[arg(long = "ref", requires = "test")]
        reference: Option<PathBuf>,
        #[arg(long)]
        test: Option<PathBuf>,
        /// Write CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a paired clean/corrupted dataset with a manifest.
    Dataset {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long)]
        seed: u64,
        /// Number of phantom slices (ignored with --source-dir).
        #[arg(long, default_value_t = 20)]
        slices: usize,
        /// Import clean slices from this directory instead of the phantom.
        #[arg(long)]
        source_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        /// Fraction of slices assigned to the training split.
        #[arg(long, default_value_t = 0.7)]
        train_fraction: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write one 8-bit PNG mask per shot.
    ExportMasks {
        #[arg(long, default_value = "random")]
        trajectory: TrajectoryKind,
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        shots: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Clone)]
struct ExperimentArgs {
    #[arg(long, default_value_t = 64)]
    n: usize,
    #[arg(long, default_value_t = 16)]
    shots: usize,
    #[arg(long, default_value = "random")]
    trajectory: TrajectoryKind,
    /// Maximum per-shot rotation in degrees.
    #[arg(long, default_value_t = 5.0)]
    max_rotation: f64,
    /// Maximum per-shot translation in pixels.
    #[arg(long, default_value_t = 0.0)]
    max_translation: f64,
    #[arg(long, default_value_t = 4)]
    coils: usize,
    #[command(flatten)]
    recon: ReconArgs,
}

#[derive(Args, Clone)]
struct ReconArgs {
    #[arg(long, default_value_t = 50)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Start CG from zero instead of the intensity-corrected estimate.
    #[arg(long)]
    no_precondition: bool,
    /// Krylov solver: `cg` (conjugate gradients) or `cr` (conjugate residuals).
    #[arg(long, default_value = "cg")]
    method: KrylovMethod,
}

impl ReconArgs {
    fn config(&self) -> ReconConfig {
        ReconConfig {
            max_iters: self.max_iters,
            tol: self.tol,
            precondition: !self.no_precondition,
            method: self.method,
        }
    }
}

impl ExperimentArgs {
    fn config(&self, seed: u64, source: Source) -> ExperimentConfig {
        ExperimentConfig {
            n: self.n,
            shots: self.shots,
            trajectory: self.trajectory,
            max_rotation_deg: self.max_rotation,
            max_translation: self.max_translation,
            n_coils: self.coils,
            source,
            seed,
            repeats: 1,
            train_fraction: 0.7,
            recon: self.recon.config(),
        }
    }
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(Error::from),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Phantom { n, slice, out } => {
            let img = match slice {
                Some(z) => shepp_logan_slice(n, z)?,
                None => shepp_logan(n)?,
            };
            io::save_image(&out, &img, ImageFormat::from_path(&out))
        }
        Command::Simulate {
            input,
            exp,
            seed,
            out_kspace,
            out_coils,
            schedule_out,
        } => {
            let clean: ComplexImage = match &input {
                Some(p) => io::load_image(p, ImageFormat::from_path(p))?,
                None => shepp_logan(exp.n)?,
            };
            let cfg = exp.config(seed, Source::Phantom { slices: 1 });
            let sim = Simulator::new(&cfg)?;
            let schedule = pipeline::sample_motion(&cfg, &mut sample_rng(seed, 0))?;
            let y = forward_corrupt(&clean, sim.coils(), sim.trajectory(), &schedule)?;
            io::write_kspace(&out_kspace, &y)?;
            io::write_coils(&out_coils, sim.coils())?;
            if let Some(p) = schedule_out {
                let json = serde_json::to_string_pretty(&schedule)
                    .map_err(|e| Error::Parse(e.to_string()))?;
                fs::write(p, json + "\n")?;
            }
            Ok(())
        }
        Command::Reconstruct {
            kspace,
            coils,
            out,
            recon,
            log,
        } => {
            let (img, report) = pipeline::run_reconstruct(&kspace, &coils, &recon.config())?;
            if !report.converged {
                log::warn!(
                    "CG stopped after {} iterations at residual {:e}",
                    report.iterations(),
                    report.final_residual()
                );
            }
            match ImageFormat::from_path(&out) {
                ImageFormat::RawF32 => io::write_complex_image(&out, &img)?,
                ImageFormat::Gray8 => io::save_image(&out, &img, ImageFormat::Gray8)?,
            }
            if let Some(p) = log {
                fs::write(p, report.to_log())?;
            }
            Ok(())
        }
        Command::Metrics {
            manifest,
            reference,
            test,
            out,
        } => {
            let csv = match (manifest, reference, test) {
                (Some(m), _, _) => pipeline::run_metrics(&m)?,
                (None, Some(r), Some(t)) => pipeline::run_pair_metrics(&r, &t)?,
                _ => {
                    return Err(Error::InvalidParameter(
                        "give --manifest or --ref with --test".into(),
                    ))
                }
            };
            write_text(out.as_deref(), &csv)
        }
        Command::Dataset {
            exp,
            seed,
            slices,
            source_dir,
            repeats,
            train_fraction,
            out,
        } => {
            let source = match source_dir {
                Some(path) => Source::Directory { path },
                None => Source::Phantom { slices },
            };
            let cfg = ExperimentConfig {
                repeats,
                train_fraction,
                ..exp.config(seed, source)
            };
            let manifest = pipeline::run_dataset(&cfg, &out)?;
            log::info!(
                "wrote {} samples to {}",
                manifest.entries.len(),
                out.display()
            );
            Ok(())
        }
        Command::ExportMasks {
            trajectory,
            n,
            shots,
            seed,
            out,
        } => {
            let traj = make_trajectory(trajectory, n, shots, seed)?;
            export_masks(&traj, &out).map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
