//! Multishot MRI rigid-motion simulation and CG-SENSE reconstruction.
//!
//! The crate builds motion-corrupted multi-coil k-space from a clean image,
//! reconstructs it with conjugate-gradient SENSE (deliberately without any
//! motion model), scores the result, and exports clean/corrupted pairs for
//! training an image-domain artifact corrector.

pub mod error;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod motion;
pub mod phantom;
pub mod pipeline;
pub mod sense;
pub mod trajectory;

pub use error::{Error, Result};
pub use grid::{fft2c, ifft2c, ComplexImage, KSpaceGrid};
pub use metrics::{artifact_power, psnr, ssim, MetricReport};
pub use motion::{apply_rigid, forward_corrupt, RigidMotion, RigidMotionSchedule};
pub use phantom::{shepp_logan, simulate_coils, CoilSensitivities};
pub use sense::{adjoint, cg_sense, encode, ConvergenceReport, KSpaceData, ReconConfig};
pub use trajectory::{
    make_trajectory, segment_extract, SamplingMask, ShotTrajectory, TrajectoryKind,
};
