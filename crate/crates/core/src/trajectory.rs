//! Shot partitions of the Cartesian k-space grid.
//!
//! Every trajectory assigns each grid point to exactly one shot, so the shot
//! masks are disjoint and their union is the full grid.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::KSpaceGrid;

/// Binary N x N sampling mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingMask {
    n: usize,
    bits: Vec<bool>,
}

impl SamplingMask {
    pub fn new(n: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != n * n {
            return Err(Error::ShapeMismatch(format!(
                "mask of {} points for n={n}",
                bits.len()
            )));
        }
        Ok(Self { n, bits })
    }

    pub fn full(n: usize) -> Self {
        Self {
            n,
            bits: vec![true; n * n],
        }
    }

    pub fn empty(n: usize) -> Self {
        Self {
            n,
            bits: vec![false; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.n + col]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::ShapeMismatch(format!(
                "masks {} and {}",
                self.n, other.n
            )));
        }
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(a, b)| *a || *b)
            .collect();
        Ok(Self { n: self.n, bits })
    }

    /// Zeroes every unsampled point of `k`.
    pub fn apply(&self, k: &KSpaceGrid) -> Result<KSpaceGrid> {
        if self.n != k.n() {
            return Err(Error::ShapeMismatch(format!(
                "mask {} vs k-space {}",
                self.n,
                k.n()
            )));
        }
        let zero = Complex64::new(0.0, 0.0);
        let data = k
            .data()
            .iter()
            .zip(&self.bits)
            .map(|(&z, &b)| if b { z } else { zero })
            .collect();
        Ok(KSpaceGrid::from_raw(self.n, data))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrajectoryKind {
    CartesianSequential,
    CartesianParallel1D,
    CartesianParallel2D,
    Random,
}

impl TrajectoryKind {
    pub const ALL: [TrajectoryKind; 4] = [
        TrajectoryKind::CartesianSequential,
        TrajectoryKind::CartesianParallel1D,
        TrajectoryKind::CartesianParallel2D,
        TrajectoryKind::Random,
    ];

    /// Row-based kinds assign whole phase-encode lines to a shot whenever
    /// there are at least as many lines as shots.
    pub fn is_row_based(self) -> bool {
        matches!(
            self,
            TrajectoryKind::CartesianSequential | TrajectoryKind::CartesianParallel1D
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            TrajectoryKind::CartesianSequential => "sequential",
            TrajectoryKind::CartesianParallel1D => "parallel-1d",
            TrajectoryKind::CartesianParallel2D => "parallel-2d",
            TrajectoryKind::Random => "random",
        }
    }
}

impl fmt::Display for TrajectoryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TrajectoryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sequential" | "cartesian-sequential" => Ok(TrajectoryKind::CartesianSequential),
            "parallel-1d" | "parallel1d" | "cartesian-parallel-1d" => {
                Ok(TrajectoryKind::CartesianParallel1D)
            }
            "parallel-2d" | "parallel2d" | "cartesian-parallel-2d" => {
                Ok(TrajectoryKind::CartesianParallel2D)
            }
            "random" => Ok(TrajectoryKind::Random),
            other => Err(invalid(format!("unknown trajectory kind '{other}'"))),
        }
    }
}

/// Assignment of every k-space grid point to one of `shots` shots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShotTrajectory {
    n: usize,
    kind: TrajectoryKind,
    seed: u64,
    shots: usize,
    /// Shot index of each grid point, row-major.
    assignment: Vec<usize>,
}

fn largest_divisor_at_most_sqrt(s: usize) -> usize {
    (1..=s)
        .take_while(|d| d * d <= s)
        .filter(|d| s.is_multiple_of(*d))
        .last()
        .unwrap_or(1)
}

fn exact_sqrt(s: usize) -> Option<usize> {
    let r = (s as f64).sqrt().round() as usize;
    (r * r == s).then_some(r)
}

/// Builds shot masks for one of the four encoding strategies.
///
/// `seed` only affects [`TrajectoryKind::Random`].
pub fn make_trajectory(
    kind: TrajectoryKind,
    n: usize,
    shots: usize,
    seed: u64,
) -> Result<ShotTrajectory> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::InvalidSize(n));
    }
    if shots == 0 || !shots.is_power_of_two() {
        return Err(invalid(format!("shot count {shots} is not a power of two")));
    }
    if kind == TrajectoryKind::CartesianParallel1D && shots > n && !shots.is_multiple_of(n) {
        return Err(invalid(format!(
            "{kind} trajectory with more shots than lines needs n to divide shots ({shots}, {n})"
        )));
    }
    if shots > n * n {
        return Err(invalid(format!(
            "{shots} shots exceed the {} grid points",
            n * n
        )));
    }

    let mut assignment = vec![0usize; n * n];
    match kind {
        TrajectoryKind::CartesianSequential if shots > n => {
            // more shots than lines: contiguous chunks of the raster order
            let total = n * n;
            for (pos, a) in assignment.iter_mut().enumerate() {
                *a = pos * shots / total;
            }
        }
        TrajectoryKind::CartesianSequential => {
            for r in 0..n {
                // row r belongs to block s where s*n/S <= r < (s+1)*n/S
                let s = (r * shots) / n;
                assignment[r * n..(r + 1) * n].fill(s);
            }
        }
        TrajectoryKind::CartesianParallel1D if shots > n => {
            // each line is cut into shots/n segments; segment j of line r goes to shot r + j*n
            let segments = shots / n;
            for r in 0..n {
                for c in 0..n {
                    assignment[r * n + c] = r + n * (c * segments / n);
                }
            }
        }
        TrajectoryKind::CartesianParallel1D => {
            for r in 0..n {
                assignment[r * n..(r + 1) * n].fill(r % shots);
            }
        }
        TrajectoryKind::CartesianParallel2D => {
            let (row_step, col_step) = match exact_sqrt(shots) {
                Some(q) => (q, 1),
                None => (1, largest_divisor_at_most_sqrt(shots)),
            };
            for r in 0..n {
                for c in 0..n {
                    assignment[r * n + c] = (r * row_step + c * col_step) % shots;
                }
            }
        }
        TrajectoryKind::Random => {
            let mut order: Vec<usize> = (0..n * n).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            order.shuffle(&mut rng);
            let total = n * n;
            for (pos, &point) in order.iter().enumerate() {
                assignment[point] = pos * shots / total;
            }
        }
    }

    Ok(ShotTrajectory {
        n,
        kind,
        seed,
        shots,
        assignment,
    })
}

impl ShotTrajectory {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> TrajectoryKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn shot_count(&self) -> usize {
        self.shots
    }

    /// Shot index owning each grid point, row-major.
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn mask(&self, shot: usize) -> Result<SamplingMask> {
        self.check_shot(shot)?;
        let bits = self.assignment.iter().map(|&s| s == shot).collect();
        Ok(SamplingMask { n: self.n, bits })
    }

    pub fn masks(&self) -> Vec<SamplingMask> {
        (0..self.shots)
            .map(|s| self.mask(s).expect("shot in range"))
            .collect()
    }

    /// Union of all shot masks; the full grid for every kind.
    pub fn union_mask(&self) -> SamplingMask {
        SamplingMask::full(self.n)
    }

    fn check_shot(&self, shot: usize) -> Result<()> {
        if shot >= self.shots {
            return Err(invalid(format!(
                "shot index {shot} out of range for {} shots",
                self.shots
            )));
        }
        Ok(())
    }
}

/// Keeps the samples of `k` acquired in `shot`; zeros elsewhere.
pub fn segment_extract(k: &KSpaceGrid, traj: &ShotTrajectory, shot: usize) -> Result<KSpaceGrid> {
    traj.check_shot(shot)?;
    if k.n() != traj.n {
        return Err(Error::ShapeMismatch(format!(
            "k-space {} vs trajectory {}",
            k.n(),
            traj.n
        )));
    }
    let zero = Complex64::new(0.0, 0.0);
    let data = k
        .data()
        .iter()
        .zip(&traj.assignment)
        .map(|(&z, &s)| if s == shot { z } else { zero })
        .collect();
    Ok(KSpaceGrid::from_raw(k.n(), data))
}

/// Writes one 8-bit PNG per shot (255 = sampled in that shot).
pub fn export_masks(traj: &ShotTrajectory, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let n = traj.n as u32;
    let mut paths = Vec::with_capacity(traj.shots);
    for shot in 0..traj.shots {
        let px: Vec<u8> = traj
            .assignment
            .iter()
            .map(|&s| if s == shot { 255 } else { 0 })
            .collect();
        let img = image::GrayImage::from_raw(n, n, px).expect("buffer matches dimensions");
        let path = dir.join(format!("{}_shot{:03}.png", traj.kind.name(), shot));
        img.save(&path).map_err(|e| match e {
            image::ImageError::IoError(io) => Error::Io(io),
            other => Error::Parse(other.to_string()),
        })?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rows_of(mask: &SamplingMask) -> Vec<usize> {
        let n = mask.n();
        (0..n).filter(|&r| (0..n).all(|c| mask.get(r, c))).collect()
    }

    #[test]
    fn sequential_blocks() {
        let t = make_trajectory(TrajectoryKind::CartesianSequential, 4, 2, 0).unwrap();
        assert_eq!(rows_of(&t.mask(0).unwrap()), vec![0, 1]);
        assert_eq!(rows_of(&t.mask(1).unwrap()), vec![2, 3]);
    }

    #[test]
    fn parallel_1d_interleave() {
        let t = make_trajectory(TrajectoryKind::CartesianParallel1D, 4, 2, 0).unwrap();
        assert_eq!(rows_of(&t.mask(0).unwrap()), vec![0, 2]);
        assert_eq!(rows_of(&t.mask(1).unwrap()), vec![1, 3]);
    }

    #[test]
    fn parallel_2d_two_shots_is_checkerboard() {
        let t = make_trajectory(TrajectoryKind::CartesianParallel2D, 4, 2, 0).unwrap();
        let m = t.mask(0).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(m.get(r, c), (r + c) % 2 == 0);
            }
        }
    }

    #[test]
    fn random_mask_audit() {
        let t = make_trajectory(TrajectoryKind::Random, 8, 4, 1234).unwrap();
        let masks = t.masks();
        let mut cover = [0u32; 64];
        for m in &masks {
            assert_eq!(m.bits().iter().filter(|&&b| b).count(), 16);
            for (i, &b) in m.bits().iter().enumerate() {
                cover[i] += b as u32;
            }
        }
        assert!(cover.iter().all(|&k| k == 1));
    }

    #[test]
    fn random_seed_determinism() {
        let a = make_trajectory(TrajectoryKind::Random, 16, 4, 7).unwrap();
        let b = make_trajectory(TrajectoryKind::Random, 16, 4, 7).unwrap();
        let c = make_trajectory(TrajectoryKind::Random, 16, 4, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.assignment(), c.assignment());
    }

    #[test]
    fn rejects_bad_shot_counts() {
        assert!(make_trajectory(TrajectoryKind::Random, 8, 3, 0).is_err());
        assert!(make_trajectory(TrajectoryKind::Random, 8, 0, 0).is_err());
        assert!(make_trajectory(TrajectoryKind::CartesianParallel1D, 30, 32, 0).is_err());
        assert!(make_trajectory(TrajectoryKind::Random, 4, 32, 0).is_err());
        assert!(make_trajectory(TrajectoryKind::CartesianParallel2D, 8, 16, 0).is_ok());
        assert!(make_trajectory(TrajectoryKind::Random, 7, 2, 0).is_err());
    }

    #[test]
    fn more_shots_than_lines() {
        let seq = make_trajectory(TrajectoryKind::CartesianSequential, 8, 16, 0).unwrap();
        // raster chunks of four points: half a line each
        assert_eq!(&seq.assignment()[..8], &[0, 0, 0, 0, 1, 1, 1, 1]);
        let par = make_trajectory(TrajectoryKind::CartesianParallel1D, 8, 16, 0).unwrap();
        assert_eq!(&par.assignment()[8..16], &[1, 1, 1, 1, 9, 9, 9, 9]);
        for t in [seq, par] {
            assert!(t.masks().iter().all(|m| m.count() == 4));
        }
    }

    #[test]
    fn segment_extract_partitions_kspace() {
        let k = KSpaceGrid::from_fn(8, |r, c| Complex64::new(r as f64, c as f64 - 2.0)).unwrap();
        for kind in TrajectoryKind::ALL {
            let t = make_trajectory(kind, 8, 4, 3).unwrap();
            let mut sum = KSpaceGrid::zeros(8).unwrap();
            for s in 0..4 {
                let seg = segment_extract(&k, &t, s).unwrap();
                let twice = segment_extract(&seg, &t, s).unwrap();
                assert_eq!(seg, twice);
                sum = sum.add(&seg).unwrap();
            }
            assert_eq!(sum, k);
        }
        let t = make_trajectory(TrajectoryKind::Random, 8, 4, 3).unwrap();
        let zero = KSpaceGrid::zeros(8).unwrap();
        assert_eq!(segment_extract(&zero, &t, 2).unwrap(), zero);
        assert!(segment_extract(&k, &t, 4).is_err());
    }

    #[test]
    fn kind_parsing() {
        for kind in TrajectoryKind::ALL {
            assert_eq!(kind.name().parse::<TrajectoryKind>().unwrap(), kind);
        }
        assert!("spiral".parse::<TrajectoryKind>().is_err());
    }

    #[test]
    fn masks_export_as_png() {
        let dir = tempfile::tempdir().unwrap();
        let t = make_trajectory(TrajectoryKind::CartesianParallel1D, 8, 2, 0).unwrap();
        let paths = export_masks(&t, dir.path()).unwrap();
        assert_eq!(paths.len(), 2);
        let img = image::open(&paths[1]).unwrap().to_luma8();
        assert_eq!(img.get_pixel(0, 1).0[0], 255);
        assert_eq!(img.get_pixel(0, 0).0[0], 0);
    }

    #[test]
    fn parallel_2d_partition_on_non_power_of_two_grid() {
        // still a partition; balance is only guaranteed for power-of-two n
        let t = make_trajectory(TrajectoryKind::CartesianParallel2D, 30, 16, 0).unwrap();
        let total: usize = t.masks().iter().map(SamplingMask::count).sum();
        assert_eq!(total, 900);
    }

    proptest! {
        #[test]
        fn partition_and_balance(log_n in 1u32..=6, log_s in 0u32..=7, kind_ix in 0usize..4, seed in any::<u64>()) {
            let n = 1usize << log_n;
            let shots = 1usize << log_s;
            let kind = TrajectoryKind::ALL[kind_ix];
            prop_assume!(shots <= n * n);
            let t = make_trajectory(kind, n, shots, seed).unwrap();
            let mut cover = vec![0usize; n * n];
            for m in t.masks() {
                let count = m.count();
                let ideal = (n * n) as f64 / shots as f64;
                let slack = if kind.is_row_based() { n as f64 } else { 1.0 };
                prop_assert!((count as f64 - ideal).abs() <= slack, "{kind} n={n} S={shots} count={count}");
                for (i, &b) in m.bits().iter().enumerate() {
                    cover[i] += b as usize;
                }
            }
            prop_assert!(cover.iter().all(|&k| k == 1));
        }
    }
}
