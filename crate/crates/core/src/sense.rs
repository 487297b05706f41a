//! SENSE encoding operator, its adjoint, and conjugate-gradient
//! reconstruction on the normal equations `E^H E x = E^H y`.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{dot, fft2c, ifft2c, norm, ComplexImage, KSpaceGrid};
use crate::phantom::CoilSensitivities;
use crate::trajectory::SamplingMask;

/// Multi-coil k-space samples on a shared sampling mask.
#[derive(Debug, Clone, PartialEq)]
pub struct KSpaceData {
    grids: Vec<KSpaceGrid>,
    mask: SamplingMask,
}

impl KSpaceData {
    /// Validates that all grids match the mask size, hold finite values, and
    /// are zero at unsampled points.
    pub fn new(grids: Vec<KSpaceGrid>, mask: SamplingMask) -> Result<Self> {
        if grids.is_empty() {
            return Err(invalid("k-space data needs at least one coil"));
        }
        let n = mask.n();
        for (c, g) in grids.iter().enumerate() {
            if g.n() != n {
                return Err(Error::ShapeMismatch(format!(
                    "coil {c} grid {} vs mask {n}",
                    g.n()
                )));
            }
            for (i, (z, &b)) in g.data().iter().zip(mask.bits()).enumerate() {
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(Error::NonFinite {
                        index: c * n * n + i,
                    });
                }
                if !b && *z != Complex64::new(0.0, 0.0) {
                    return Err(invalid(format!(
                        "coil {c} has data outside the sampling mask"
                    )));
                }
            }
        }
        Ok(Self { grids, mask })
    }

    /// Like [`KSpaceData::new`] but zeroes samples outside the mask first.
    pub fn masked(grids: Vec<KSpaceGrid>, mask: SamplingMask) -> Result<Self> {
        let grids = grids.iter().map(|g| mask.apply(g)).collect::<Result<_>>()?;
        Self::new(grids, mask)
    }

    pub fn n(&self) -> usize {
        self.mask.n()
    }

    pub fn n_coils(&self) -> usize {
        self.grids.len()
    }

    /// Sampled positions per coil.
    pub fn n_k(&self) -> usize {
        self.mask.count()
    }

    pub fn grids(&self) -> &[KSpaceGrid] {
        &self.grids
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    /// `sum_c <self_c, other_c>` over all coils.
    pub fn inner_product(&self, other: &Self) -> Result<Complex64> {
        if self.n_coils() != other.n_coils() || self.n() != other.n() {
            return Err(Error::ShapeMismatch("k-space data shapes differ".into()));
        }
        Ok(self
            .grids
            .iter()
            .zip(&other.grids)
            .map(|(a, b)| dot(a.data(), b.data()))
            .sum())
    }

    pub fn l2_norm(&self) -> f64 {
        self.grids
            .iter()
            .map(|g| g.l2_norm().powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

fn check_coils(n: usize, coils: &CoilSensitivities) -> Result<()> {
    if coils.n() != n {
        return Err(Error::ShapeMismatch(format!(
            "grid {n} vs coil maps {}",
            coils.n()
        )));
    }
    Ok(())
}

/// `E x`: per coil, `mask * F(coil * x)`.
pub fn encode(
    x: &ComplexImage,
    coils: &CoilSensitivities,
    mask: &SamplingMask,
) -> Result<KSpaceData> {
    check_coils(x.n(), coils)?;
    if mask.n() != x.n() {
        return Err(Error::ShapeMismatch(format!(
            "image {} vs mask {}",
            x.n(),
            mask.n()
        )));
    }
    let grids = coils
        .maps()
        .par_iter()
        .map(|coil| mask.apply(&fft2c(&coil.hadamard(x)?)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(KSpaceData {
        grids,
        mask: mask.clone(),
    })
}

/// `E^H y`: `sum_c conj(coil_c) * F^-1(mask * y_c)`.
pub fn adjoint(y: &KSpaceData, coils: &CoilSensitivities) -> Result<ComplexImage> {
    check_coils(y.n(), coils)?;
    if coils.n_coils() != y.n_coils() {
        return Err(Error::ShapeMismatch(format!(
            "{} coil maps for {} coil grids",
            coils.n_coils(),
            y.n_coils()
        )));
    }
    let parts = coils
        .maps()
        .par_iter()
        .zip(y.grids.par_iter())
        .map(|(coil, g)| coil.conj_hadamard(&ifft2c(&y.mask.apply(g)?)?))
        .collect::<Result<Vec<_>>>()?;
    let mut acc = ComplexImage::zeros(y.n())?;
    for p in &parts {
        acc.axpy(Complex64::new(1.0, 0.0), p);
    }
    Ok(acc)
}

/// Krylov iteration used on the normal equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KrylovMethod {
    /// Conjugate gradients; minimizes the error in the `E^H E` norm.
    #[default]
    ConjugateGradient,
    /// Conjugate residuals; same Krylov space, but minimizes the
    /// normal-equation residual, which therefore never increases.
    ConjugateResidual,
}

impl std::str::FromStr for KrylovMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cg" | "conjugate-gradient" => Ok(KrylovMethod::ConjugateGradient),
            "cr" | "conjugate-residual" => Ok(KrylovMethod::ConjugateResidual),
            other => Err(invalid(format!(
                "unknown solver '{other}' (expected cg or cr)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconConfig {
    pub max_iters: usize,
    /// Relative normal-equation residual at which iteration stops.
    pub tol: f64,
    /// Start from the intensity-corrected estimate instead of zero.
    pub precondition: bool,
    #[serde(default)]
    pub method: KrylovMethod,
}

impl Default for ReconConfig {
    fn default() -> Self {
        Self {
            max_iters: 50,
            tol: 1e-8,
            precondition: true,
            method: KrylovMethod::ConjugateGradient,
        }
    }
}

impl ReconConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(invalid("max_iters must be at least 1"));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(invalid(format!("tol {} outside (0, 1)", self.tol)));
        }
        Ok(())
    }
}

/// Per-iteration relative residuals `||E^H y - E^H E x_k|| / ||E^H y||`;
/// entry 0 is the initial estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub residuals: Vec<f64>,
    pub converged: bool,
}

impl ConvergenceReport {
    /// CG iterations performed after initialization.
    pub fn iterations(&self) -> usize {
        self.residuals.len().saturating_sub(1)
    }

    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(0.0)
    }

    /// `iter,residual` lines with a header row.
    pub fn to_log(&self) -> String {
        let mut out = String::from("iter,residual\n");
        for (i, r) in self.residuals.iter().enumerate() {
            writeln!(out, "{i},{r:e}").expect("writing to a String");
        }
        out
    }
}

/// Floor applied to the pixelwise coil energy in the initial estimate.
const INTENSITY_FLOOR: f64 = 1e-6;

/// CG-SENSE: least-squares reconstruction of `y` with no motion model.
///
/// Solves `E^H E x = E^H y` by conjugate gradients (or conjugate residuals,
/// see [`KrylovMethod`]). With
/// `cfg.precondition`, iteration starts from `E^H y / sum_c |coil_c|^2`
/// (intensity correction); otherwise from zero. Hitting `max_iters` is
/// reported, not treated as an error.
pub fn cg_sense(
    y: &KSpaceData,
    coils: &CoilSensitivities,
    cfg: &ReconConfig,
) -> Result<(ComplexImage, ConvergenceReport)> {
    cfg.validate()?;
    let n = y.n();
    let normal =
        |v: &ComplexImage| -> Result<ComplexImage> { adjoint(&encode(v, coils, &y.mask)?, coils) };

    let rhs = adjoint(y, coils)?;
    let rhs_norm = rhs.l2_norm();
    if rhs_norm == 0.0 {
        return Ok((
            ComplexImage::zeros(n)?,
            ConvergenceReport {
                residuals: vec![0.0],
                converged: true,
            },
        ));
    }

    let mut x = if cfg.precondition {
        let energy = coils.sum_of_squares();
        let data = rhs
            .data()
            .iter()
            .zip(&energy)
            .map(|(z, &e)| z / e.max(INTENSITY_FLOOR))
            .collect();
        ComplexImage::from_raw(n, data)
    } else {
        ComplexImage::zeros(n)?
    };

    let r = if cfg.precondition {
        rhs.sub(&normal(&x)?)?
    } else {
        rhs.clone()
    };
    let mut residuals = vec![r.l2_norm() / rhs_norm];
    let converged = match cfg.method {
        KrylovMethod::ConjugateGradient => {
            conjugate_gradient(&normal, &mut x, r, rhs_norm, cfg, &mut residuals)?
        }
        KrylovMethod::ConjugateResidual => {
            conjugate_residual(&normal, &mut x, r, rhs_norm, cfg, &mut residuals)?
        }
    };
    Ok((
        x,
        ConvergenceReport {
            residuals,
            converged,
        },
    ))
}

type Operator<'a> = dyn Fn(&ComplexImage) -> Result<ComplexImage> + 'a;

fn conjugate_gradient(
    normal: &Operator<'_>,
    x: &mut ComplexImage,
    mut r: ComplexImage,
    rhs_norm: f64,
    cfg: &ReconConfig,
    residuals: &mut Vec<f64>,
) -> Result<bool> {
    let mut p = r.clone();
    let mut rs = norm(r.data()).powi(2);
    let mut converged = residuals[0] <= cfg.tol;
    while !converged && residuals.len() <= cfg.max_iters {
        let ap = normal(&p)?;
        let curvature = dot(p.data(), ap.data()).re;
        if curvature <= 0.0 {
            // search direction lies in the null space of E
            break;
        }
        let alpha = rs / curvature;
        x.axpy(Complex64::new(alpha, 0.0), &p);
        r.axpy(Complex64::new(-alpha, 0.0), &ap);
        let rs_next = norm(r.data()).powi(2);
        residuals.push(rs_next.sqrt() / rhs_norm);
        converged = rs_next.sqrt() / rhs_norm <= cfg.tol;
        let beta = rs_next / rs;
        rs = rs_next;
        let mut next = r.clone();
        next.axpy(Complex64::new(beta, 0.0), &p);
        p = next;
    }
    Ok(converged)
}

fn conjugate_residual(
    normal: &Operator<'_>,
    x: &mut ComplexImage,
    mut r: ComplexImage,
    rhs_norm: f64,
    cfg: &ReconConfig,
    residuals: &mut Vec<f64>,
) -> Result<bool> {
    let mut ar = normal(&r)?;
    let mut p = r.clone();
    let mut ap = ar.clone();
    let mut rar = dot(r.data(), ar.data()).re;
    let mut converged = residuals[0] <= cfg.tol;
    while !converged && residuals.len() <= cfg.max_iters {
        let ap_sq = norm(ap.data()).powi(2);
        if rar <= 0.0 || ap_sq == 0.0 {
            break;
        }
        let alpha = rar / ap_sq;
        x.axpy(Complex64::new(alpha, 0.0), &p);
        r.axpy(Complex64::new(-alpha, 0.0), &ap);
        let rel = r.l2_norm() / rhs_norm;
        residuals.push(rel);
        converged = rel <= cfg.tol;
        if converged {
            break;
        }
        ar = normal(&r)?;
        let rar_next = dot(r.data(), ar.data()).re;
        let beta = rar_next / rar;
        rar = rar_next;
        let mut next_p = r.clone();
        next_p.axpy(Complex64::new(beta, 0.0), &p);
        p = next_p;
        let mut next_ap = ar.clone();
        next_ap.axpy(Complex64::new(beta, 0.0), &ap);
        ap = next_ap;
    }
    Ok(converged)
}
