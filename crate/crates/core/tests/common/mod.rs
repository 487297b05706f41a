//! Dense-matrix oracles written directly from the operator definitions,
//! independent of the FFT and the fast operator code.
#![allow(dead_code)]

use std::f64::consts::PI;

use mshot::{CoilSensitivities, ComplexImage, KSpaceData, SamplingMask};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Centered unitary 2-D DFT as an n^2 x n^2 matrix:
/// `F[(u,v),(r,c)] = exp(-2 pi i ((u-h)(r-h) + (v-h)(c-h)) / n) / n`.
pub fn dense_dft(n: usize) -> CMat {
    let h = (n / 2) as f64;
    let nn = n * n;
    CMat::from_fn(nn, nn, |k, p| {
        let (u, v) = ((k / n) as f64 - h, (k % n) as f64 - h);
        let (r, c) = ((p / n) as f64 - h, (p % n) as f64 - h);
        Complex64::from_polar(1.0 / n as f64, -2.0 * PI * (u * r + v * c) / n as f64)
    })
}

/// SENSE encoding matrix: rows are (coil, sampled k-point) pairs in
/// coil-major, row-major k order.
pub fn dense_encoding(coils: &CoilSensitivities, mask: &SamplingMask) -> CMat {
    let n = coils.n();
    let f = dense_dft(n);
    let sampled: Vec<usize> = (0..n * n).filter(|&k| mask.bits()[k]).collect();
    let rows = coils.n_coils() * sampled.len();
    CMat::from_fn(rows, n * n, |row, p| {
        let coil = &coils.maps()[row / sampled.len()];
        let k = sampled[row % sampled.len()];
        f[(k, p)] * coil.data()[p]
    })
}

pub fn vectorize_image(x: &ComplexImage) -> CVec {
    CVec::from_column_slice(x.data())
}

/// Stacks the sampled entries of each coil grid in the same order as
/// [`dense_encoding`].
pub fn vectorize_data(y: &KSpaceData) -> CVec {
    let bits = y.mask().bits();
    let values: Vec<Complex64> = y
        .grids()
        .iter()
        .flat_map(|g| {
            g.data()
                .iter()
                .zip(bits)
                .filter(|(_, &b)| b)
                .map(|(z, _)| *z)
        })
        .collect();
    CVec::from_vec(values)
}

pub fn image_from_vec(n: usize, v: &CVec) -> ComplexImage {
    ComplexImage::new(n, v.iter().copied().collect()).unwrap()
}

/// Dense least-squares solution `(E^H E)^-1 E^H y` via Cholesky.
pub fn dense_pseudo_inverse_solve(e: &CMat, y: &CVec) -> CVec {
    let eh = e.adjoint();
    let normal = &eh * e;
    let rhs = &eh * y;
    normal
        .cholesky()
        .expect("normal matrix must be positive definite")
        .solve(&rhs)
}

/// Bilinear resampling matrix for rotation about `(n/2, n/2)` by `theta_deg`
/// (counter-clockwise as displayed) followed by translation `(tx, ty)`.
pub fn dense_rigid(n: usize, theta_deg: f64, tx: f64, ty: f64) -> CMat {
    let h = (n / 2) as f64;
    let t = theta_deg * PI / 180.0;
    // inverse map: source = R(-theta) (dest - centre - shift) + centre,
    // with R acting on (col, row) coordinates where rows point down
    let inv = nalgebra::Matrix2::new(t.cos(), -t.sin(), t.sin(), t.cos());
    let mut m = CMat::zeros(n * n, n * n);
    for r in 0..n {
        for c in 0..n {
            let d = nalgebra::Vector2::new(c as f64 - h - tx, r as f64 - h - ty);
            let s = inv * d + nalgebra::Vector2::new(h, h);
            let (x0, y0) = (s.x.floor(), s.y.floor());
            let (ax, ay) = (s.x - x0, s.y - y0);
            for (dy, wy) in [(0.0, 1.0 - ay), (1.0, ay)] {
                for (dx, wx) in [(0.0, 1.0 - ax), (1.0, ax)] {
                    let (sr, sc) = (y0 + dy, x0 + dx);
                    if sr >= 0.0 && sc >= 0.0 && sr < n as f64 && sc < n as f64 {
                        let src = sr as usize * n + sc as usize;
                        m[(r * n + c, src)] += Complex64::new(wx * wy, 0.0);
                    }
                }
            }
        }
    }
    m
}

pub fn random_image(n: usize, rng: &mut ChaCha8Rng) -> ComplexImage {
    ComplexImage::from_fn(n, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
    .unwrap()
}

pub fn random_data(
    n: usize,
    coils: usize,
    mask: &SamplingMask,
    rng: &mut ChaCha8Rng,
) -> KSpaceData {
    let grids = (0..coils)
        .map(|_| {
            mshot::KSpaceGrid::from_fn(n, |_, _| {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            })
            .unwrap()
        })
        .collect();
    KSpaceData::masked(grids, mask.clone()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sampling mask of every shot except the last one.
pub fn drop_last_shot(traj: &mshot::ShotTrajectory) -> SamplingMask {
    let n = traj.n();
    let last = traj.shot_count() - 1;
    let bits = traj.assignment().iter().map(|&s| s != last).collect();
    SamplingMask::new(n, bits).unwrap()
}

pub fn rel_err(a: &CVec, b: &CVec) -> f64 {
    (a - b).norm() / b.norm()
}
