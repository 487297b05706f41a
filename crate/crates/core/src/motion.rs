//! Inter-shot rigid motion and the multishot forward corruption model.
//!
//! Pixel coordinates are `(x, y) = (col, row)` measured from the rotation
//! centre `(n/2, n/2)`. A positive angle rotates the object counter-clockwise
//! as displayed with row 0 at the top; `tx` moves it toward higher columns
//! and `ty` toward higher rows.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{fft2c, ComplexImage, KSpaceGrid};
use crate::phantom::CoilSensitivities;
use crate::sense::KSpaceData;
use crate::trajectory::ShotTrajectory;

/// Largest rotation (degrees) a schedule may carry.
pub const MAX_SCHEDULE_ROTATION: f64 = 45.0;

/// Rigid transform of one shot.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RigidMotion {
    pub theta_deg: f64,
    pub tx: f64,
    pub ty: f64,
}

impl RigidMotion {
    pub const IDENTITY: RigidMotion = RigidMotion {
        theta_deg: 0.0,
        tx: 0.0,
        ty: 0.0,
    };

    pub fn rotation(theta_deg: f64) -> Self {
        Self {
            theta_deg,
            ..Self::IDENTITY
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    fn check_translation(&self, n: usize) -> Result<()> {
        let limit = n as f64 / 4.0;
        if !self.tx.is_finite() || !self.ty.is_finite() {
            return Err(invalid("translation must be finite"));
        }
        if self.tx.abs() > limit || self.ty.abs() > limit {
            return Err(invalid(format!(
                "translation ({}, {}) exceeds n/4 = {limit}",
                self.tx, self.ty
            )));
        }
        Ok(())
    }
}

/// Per-shot rigid transforms; shot `s` uses `shots()[s]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RigidMotionSchedule {
    shots: Vec<RigidMotion>,
}

impl RigidMotionSchedule {
    pub fn new(shots: Vec<RigidMotion>) -> Result<Self> {
        if shots.is_empty() {
            return Err(invalid("motion schedule needs at least one shot"));
        }
        for m in &shots {
            if !m.theta_deg.is_finite() || m.theta_deg.abs() > MAX_SCHEDULE_ROTATION {
                return Err(invalid(format!(
                    "rotation {} outside +/-{MAX_SCHEDULE_ROTATION} degrees",
                    m.theta_deg
                )));
            }
        }
        Ok(Self { shots })
    }

    pub fn identity(shots: usize) -> Result<Self> {
        Self::new(vec![RigidMotion::IDENTITY; shots])
    }

    pub fn len(&self) -> usize {
        self.shots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shots.is_empty()
    }

    pub fn shots(&self) -> &[RigidMotion] {
        &self.shots
    }

    /// Checks the schedule against an `n`-pixel grid (translations within n/4).
    pub fn validate(&self, n: usize) -> Result<()> {
        Self::new(self.shots.clone())?;
        self.shots.iter().try_for_each(|m| m.check_translation(n))
    }
}

/// Resamples `img` under rotation about the centre followed by translation.
///
/// Bilinear interpolation; samples falling outside the FOV read as zero.
/// Rotations up to +/-180 degrees are accepted here (schedules are limited
/// to +/-45); translations must stay within n/4.
pub fn apply_rigid(img: &ComplexImage, theta_deg: f64, tx: f64, ty: f64) -> Result<ComplexImage> {
    let motion = RigidMotion { theta_deg, tx, ty };
    if !theta_deg.is_finite() || theta_deg.abs() > 180.0 {
        return Err(invalid(format!(
            "rotation {theta_deg} outside +/-180 degrees"
        )));
    }
    motion.check_translation(img.n())?;
    if motion.is_identity() {
        return Ok(img.clone());
    }

    let n = img.n();
    let h = (n / 2) as f64;
    let (sin, cos) = theta_deg.to_radians().sin_cos();
    let src = img.data();
    let zero = Complex64::new(0.0, 0.0);
    let sample = |r: isize, c: isize| -> Complex64 {
        if r < 0 || c < 0 || r >= n as isize || c >= n as isize {
            zero
        } else {
            src[r as usize * n + c as usize]
        }
    };

    let mut out = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            let dx = c as f64 - h - tx;
            let dy = r as f64 - h - ty;
            let sx = cos * dx - sin * dy + h;
            let sy = sin * dx + cos * dy + h;
            let (c0, r0) = (sx.floor(), sy.floor());
            let (fx, fy) = (sx - c0, sy - r0);
            let (c0, r0) = (c0 as isize, r0 as isize);
            let v = sample(r0, c0) * ((1.0 - fx) * (1.0 - fy))
                + sample(r0, c0 + 1) * (fx * (1.0 - fy))
                + sample(r0 + 1, c0) * ((1.0 - fx) * fy)
                + sample(r0 + 1, c0 + 1) * (fx * fy);
            out.push(v);
        }
    }
    Ok(ComplexImage::from_raw(n, out))
}

/// Multishot forward model: each shot sees the object under its own rigid
/// transform, weighted by the (static) coil maps, Fourier transformed, and
/// only that shot's k-space segment is kept.
///
/// Because shot masks partition the grid, every k-space point comes from
/// exactly one shot and the assembled grid does not depend on the order in
/// which shots are processed.
pub fn forward_corrupt(
    x: &ComplexImage,
    coils: &CoilSensitivities,
    traj: &ShotTrajectory,
    motion: &RigidMotionSchedule,
) -> Result<KSpaceData> {
    let n = x.n();
    if coils.n() != n || traj.n() != n {
        return Err(Error::ShapeMismatch(format!(
            "image {n}, coils {}, trajectory {}",
            coils.n(),
            traj.n()
        )));
    }
    if motion.len() != traj.shot_count() {
        return Err(Error::ShapeMismatch(format!(
            "{} motion states for {} shots",
            motion.len(),
            traj.shot_count()
        )));
    }
    motion.validate(n)?;

    // distinct poses; shots sharing a pose share one transform
    let mut poses: Vec<RigidMotion> = Vec::new();
    let pose_of_shot: Vec<usize> = motion
        .shots()
        .iter()
        .map(|m| match poses.iter().position(|p| p == m) {
            Some(i) => i,
            None => {
                poses.push(*m);
                poses.len() - 1
            }
        })
        .collect();
    let moved: Vec<ComplexImage> = poses
        .par_iter()
        .map(|m| apply_rigid(x, m.theta_deg, m.tx, m.ty))
        .collect::<Result<_>>()?;

    let grids: Vec<KSpaceGrid> = coils
        .maps()
        .par_iter()
        .map(|coil| {
            let spectra: Vec<KSpaceGrid> = moved
                .iter()
                .map(|img| fft2c(&coil.hadamard(img)?))
                .collect::<Result<_>>()?;
            let data = traj
                .assignment()
                .iter()
                .enumerate()
                .map(|(i, &s)| spectra[pose_of_shot[s]].data()[i])
                .collect();
            Ok(KSpaceGrid::from_raw(n, data))
        })
        .collect::<Result<_>>()?;

    KSpaceData::new(grids, traj.union_mask())
}
