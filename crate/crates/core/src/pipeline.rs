//! Experiment orchestration: motion sampling, corrupted/clean pair
//! generation, dataset export and batch metrics.
//!
//! Dataset layout under the output directory:
//!
//! ```text
//! clean/00000.mrif      magnitude, 1 channel
//! corrupt/00000.mrif    magnitude of the CG-SENSE reconstruction
//! manifest.json-lines   header object, then one object per sample
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::ComplexImage;
use crate::io::{self, ImageFormat};
use crate::metrics::{self, MetricReport};
use crate::motion::{forward_corrupt, RigidMotion, RigidMotionSchedule, MAX_SCHEDULE_ROTATION};
use crate::phantom::{shepp_logan_slice, simulate_coils, slice_heights, CoilSensitivities};
use crate::sense::{cg_sense, ConvergenceReport, ReconConfig};
use crate::trajectory::{make_trajectory, ShotTrajectory, TrajectoryKind};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_NAME: &str = "manifest.json-lines";

/// Rotation ranges (degrees) swept in the motion-severity experiments.
pub const ROTATION_PRESETS: [f64; 6] = [2.0, 5.0, 8.0, 10.0, 12.0, 14.0];

/// Shot counts swept in the shot-count experiments.
pub const SHOT_PRESETS: [usize; 7] = [2, 4, 8, 16, 32, 64, 128];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum Source {
    /// Axial slices through the 3-D Shepp-Logan extension.
    Phantom { slices: usize },
    /// Every `.mrif`/`.raw` and raster image in a directory, sorted by name.
    Directory { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub shots: usize,
    pub trajectory: TrajectoryKind,
    /// Per-shot rotations are drawn from `[-max_rotation_deg, max_rotation_deg]`.
    pub max_rotation_deg: f64,
    /// Per-shot translations (pixels) are drawn from `[-max_translation, max_translation]`.
    pub max_translation: f64,
    pub n_coils: usize,
    pub source: Source,
    pub seed: u64,
    /// Motion realizations per source slice.
    pub repeats: usize,
    /// Fraction of slices assigned to the training split.
    pub train_fraction: f64,
    pub recon: ReconConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 64,
            shots: 16,
            trajectory: TrajectoryKind::Random,
            max_rotation_deg: 5.0,
            max_translation: 0.0,
            n_coils: 4,
            source: Source::Phantom { slices: 20 },
            seed: 0,
            repeats: 1,
            train_fraction: 0.7,
            recon: ReconConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let rot = self.max_rotation_deg;
        if !rot.is_finite() || !(0.0..=MAX_SCHEDULE_ROTATION).contains(&rot) {
            return Err(invalid(format!(
                "max rotation {rot} outside [0, 45] degrees"
            )));
        }
        if rot != 0.0 && !ROTATION_PRESETS.contains(&rot) {
            log::warn!("max rotation {rot} is not one of the preset levels {ROTATION_PRESETS:?}");
        }
        if !SHOT_PRESETS.contains(&self.shots) {
            log::warn!(
                "shot count {} is outside the preset grid {SHOT_PRESETS:?}",
                self.shots
            );
        }
        let t = self.max_translation;
        if !t.is_finite() || t < 0.0 || t > self.n as f64 / 4.0 {
            return Err(invalid(format!("max translation {t} outside [0, n/4]")));
        }
        if self.n_coils == 0 {
            return Err(invalid("n_coils must be at least 1"));
        }
        if self.repeats == 0 {
            return Err(invalid("repeats must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.train_fraction) {
            return Err(invalid(format!(
                "train fraction {} outside [0, 1]",
                self.train_fraction
            )));
        }
        if let Source::Phantom { slices: 0 } = self.source {
            return Err(invalid("phantom source needs at least one slice"));
        }
        self.recon.validate()?;
        make_trajectory(self.trajectory, self.n, self.shots, self.seed).map(|_| ())
    }
}

/// Draws a per-shot motion schedule. Shot 0 is the reference pose; each
/// later shot gets independent uniform rotation and translation.
pub fn sample_motion<R: Rng + ?Sized>(
    cfg: &ExperimentConfig,
    rng: &mut R,
) -> Result<RigidMotionSchedule> {
    let mut shots = Vec::with_capacity(cfg.shots);
    shots.push(RigidMotion::IDENTITY);
    for _ in 1..cfg.shots {
        let mut draw = |limit: f64| limit * (2.0 * rng.gen::<f64>() - 1.0);
        let theta_deg = draw(cfg.max_rotation_deg);
        let tx = draw(cfg.max_translation);
        let ty = draw(cfg.max_translation);
        shots.push(RigidMotion { theta_deg, tx, ty });
    }
    RigidMotionSchedule::new(shots)
}

/// One supervised sample: the clean image and its motion-corrupted
/// CG-SENSE reconstruction.
#[derive(Debug, Clone)]
pub struct Pair {
    pub clean: ComplexImage,
    pub corrupted: ComplexImage,
    pub schedule: RigidMotionSchedule,
    pub report: ConvergenceReport,
}

/// Coils and trajectory shared by every sample of an experiment.
#[derive(Debug, Clone)]
pub struct Simulator {
    cfg: ExperimentConfig,
    coils: CoilSensitivities,
    trajectory: ShotTrajectory,
}

impl Simulator {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg: cfg.clone(),
            coils: simulate_coils(cfg.n, cfg.n_coils)?,
            trajectory: make_trajectory(cfg.trajectory, cfg.n, cfg.shots, cfg.seed)?,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn coils(&self) -> &CoilSensitivities {
        &self.coils
    }

    pub fn trajectory(&self) -> &ShotTrajectory {
        &self.trajectory
    }

    pub fn corrupt_with(
        &self,
        clean: &ComplexImage,
        schedule: RigidMotionSchedule,
    ) -> Result<Pair> {
        if clean.n() != self.cfg.n {
            return Err(Error::ShapeMismatch(format!(
                "image size {} vs configured {}",
                clean.n(),
                self.cfg.n
            )));
        }
        let y = forward_corrupt(clean, &self.coils, &self.trajectory, &schedule)?;
        let (corrupted, report) = cg_sense(&y, &self.coils, &self.cfg.recon)?;
        Ok(Pair {
            clean: clean.clone(),
            corrupted,
            schedule,
            report,
        })
    }

    pub fn generate_pair<R: Rng + ?Sized>(
        &self,
        clean: &ComplexImage,
        rng: &mut R,
    ) -> Result<Pair> {
        let schedule = sample_motion(&self.cfg, rng)?;
        self.corrupt_with(clean, schedule)
    }
}

pub fn generate_pair<R: Rng + ?Sized>(
    clean: &ComplexImage,
    cfg: &ExperimentConfig,
    rng: &mut R,
) -> Result<Pair> {
    Simulator::new(cfg)?.generate_pair(clean, rng)
}

/// Independent RNG stream for sample `index`.
pub fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ index as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Per-sample metrics; `psnr` is `None` when the images are identical.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub psnr: Option<f64>,
    pub ssim: f64,
    pub artifact_power: f64,
}

impl From<MetricReport> for MetricRow {
    fn from(m: MetricReport) -> Self {
        Self {
            psnr: m.psnr.is_finite().then_some(m.psnr),
            ssim: m.ssim,
            artifact_power: m.artifact_power,
        }
    }
}

impl From<MetricRow> for MetricReport {
    fn from(m: MetricRow) -> Self {
        Self {
            psnr: m.psnr.unwrap_or(f64::INFINITY),
            ssim: m.ssim,
            artifact_power: m.artifact_power,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub format_version: u32,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub index: usize,
    pub slice: usize,
    pub repeat: usize,
    pub split: Split,
    /// Paths relative to the manifest directory.
    pub clean: PathBuf,
    pub corrupt: PathBuf,
    pub schedule: RigidMotionSchedule,
    pub metrics: MetricRow,
    pub cg_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub header: ManifestHeader,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn to_json_lines(&self) -> Result<String> {
        let mut out =
            serde_json::to_string(&self.header).map_err(|e| Error::Parse(e.to_string()))?;
        out.push('\n');
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).map_err(|e| Error::Parse(e.to_string()))?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_json_lines(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let first = lines
            .next()
            .ok_or_else(|| Error::Parse("empty manifest".into()))?;
        let header: ManifestHeader = serde_json::from_str(first)
            .map_err(|e| Error::Parse(format!("manifest header: {e}")))?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported manifest version {}",
                header.format_version
            )));
        }
        let entries = lines
            .enumerate()
            .map(|(i, l)| {
                serde_json::from_str(l)
                    .map_err(|e| Error::Parse(format!("manifest line {}: {e}", i + 2)))
            })
            .collect::<Result<_>>()?;
        Ok(Self { header, entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json_lines(&fs::read_to_string(path)?)
    }

    /// Checks that every referenced file parses with the configured size and
    /// every schedule fits the configured shot count and motion bounds.
    pub fn verify(&self, root: &Path) -> Result<()> {
        let cfg = &self.header.config;
        for e in &self.entries {
            if e.schedule.len() != cfg.shots {
                return Err(invalid(format!(
                    "sample {} has {} motion states",
                    e.index,
                    e.schedule.len()
                )));
            }
            e.schedule.validate(cfg.n)?;
            for rel in [&e.clean, &e.corrupt] {
                let img = io::read_complex_image(&root.join(rel))?;
                if img.n() != cfg.n {
                    return Err(Error::ShapeMismatch(format!(
                        "{} has size {}",
                        rel.display(),
                        img.n()
                    )));
                }
            }
        }
        Ok(())
    }
}

fn is_raster(path: &Path) -> bool {
    matches!(
        path.extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref(),
        Some("png" | "pgm" | "pnm" | "mrif" | "raw" | "f32")
    )
}

/// Loads the clean source slices named by the config.
pub fn load_sources(cfg: &ExperimentConfig) -> Result<Vec<ComplexImage>> {
    match &cfg.source {
        Source::Phantom { slices } => slice_heights(*slices)
            .into_iter()
            .map(|z| shepp_logan_slice(cfg.n, z))
            .collect(),
        Source::Directory { path } => {
            let mut files: Vec<PathBuf> = fs::read_dir(path)?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::io::Result<_>>()?;
            files.retain(|p| p.is_file() && is_raster(p));
            files.sort();
            if files.is_empty() {
                return Err(invalid(format!("no images found in {}", path.display())));
            }
            files
                .iter()
                .map(|f| {
                    let img = io::load_image(f, ImageFormat::from_path(f))?;
                    if img.n() != cfg.n {
                        return Err(Error::ShapeMismatch(format!(
                            "{} is {}x{}, expected n={}",
                            f.display(),
                            img.n(),
                            img.n(),
                            cfg.n
                        )));
                    }
                    Ok(img)
                })
                .collect()
        }
    }
}

/// Generates every (slice, repeat) sample, writes the image files and the
/// manifest. Nothing is written if generation fails; the manifest is written
/// last.
pub fn run_dataset(cfg: &ExperimentConfig, out: &Path) -> Result<DatasetManifest> {
    let sim = Simulator::new(cfg)?;
    let sources = load_sources(cfg)?;
    let n_slices = sources.len();
    let n_train = (cfg.train_fraction * n_slices as f64).round() as usize;

    let jobs: Vec<(usize, usize, usize)> = (0..n_slices)
        .flat_map(|s| (0..cfg.repeats).map(move |r| (s, r)))
        .enumerate()
        .map(|(i, (s, r))| (i, s, r))
        .collect();

    let pairs: Vec<(ManifestEntry, Pair)> = jobs
        .par_iter()
        .map(|&(index, slice, repeat)| {
            let mut rng = sample_rng(cfg.seed, index);
            let pair = sim.generate_pair(&sources[slice], &mut rng)?;
            let metrics = metrics::evaluate(&pair.clean, &pair.corrupted)?;
            let name = format!("{index:05}.mrif");
            let entry = ManifestEntry {
                index,
                slice,
                repeat,
                split: if slice < n_train {
                    Split::Train
                } else {
                    Split::Test
                },
                clean: Path::new("clean").join(&name),
                corrupt: Path::new("corrupt").join(&name),
                schedule: pair.schedule.clone(),
                metrics: metrics.into(),
                cg_iterations: pair.report.iterations(),
            };
            Ok((entry, pair))
        })
        .collect::<Result<_>>()?;

    fs::create_dir_all(out.join("clean"))?;
    fs::create_dir_all(out.join("corrupt"))?;
    for (entry, pair) in &pairs {
        io::write_magnitude(&out.join(&entry.clean), &pair.clean)?;
        io::write_magnitude(&out.join(&entry.corrupt), &pair.corrupted)?;
    }

    let manifest = DatasetManifest {
        header: ManifestHeader {
            format_version: FORMAT_VERSION,
            config: cfg.clone(),
        },
        entries: pairs.into_iter().map(|(e, _)| e).collect(),
    };
    let mut f = fs::File::create(out.join(MANIFEST_NAME))?;
    f.write_all(manifest.to_json_lines()?.as_bytes())?;
    Ok(manifest)
}

/// Recomputes metrics for every manifest entry; returns CSV with header.
pub fn run_metrics(manifest_path: &Path) -> Result<String> {
    let manifest = DatasetManifest::read(manifest_path)?;
    let root = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut out = format!("index,{}\n", MetricReport::CSV_HEADER);
    for e in &manifest.entries {
        let clean = io::read_complex_image(&root.join(&e.clean))?;
        let corrupt = io::read_complex_image(&root.join(&e.corrupt))?;
        let m = metrics::evaluate(&clean, &corrupt)?;
        out.push_str(&format!("{},{}\n", e.index, m.to_csv_row()));
    }
    Ok(out)
}

/// Metrics of a single reference/test pair as CSV with header.
pub fn run_pair_metrics(reference: &Path, test: &Path) -> Result<String> {
    let a = io::read_complex_image(reference)?;
    let b = io::read_complex_image(test)?;
    let m = metrics::evaluate(&a, &b)?;
    Ok(format!(
        "{}\n{}\n",
        MetricReport::CSV_HEADER,
        m.to_csv_row()
    ))
}

/// CG-SENSE reconstruction of stored k-space with stored coil maps.
pub fn run_reconstruct(
    kspace: &Path,
    coils: &Path,
    cfg: &ReconConfig,
) -> Result<(ComplexImage, ConvergenceReport)> {
    let y = io::read_kspace(kspace)?;
    let c = io::read_coils(coils)?;
    if c.n_coils() != y.n_coils() {
        return Err(Error::ShapeMismatch(format!(
            "{} coil maps for {} coil grids",
            c.n_coils(),
            y.n_coils()
        )));
    }
    cg_sense(&y, &c, cfg)
}
