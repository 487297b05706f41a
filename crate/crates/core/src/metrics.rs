//! Image quality scores on magnitude images: PSNR, SSIM and artifact power.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::ComplexImage;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// `f64::INFINITY` for identical images.
    pub psnr: f64,
    pub ssim: f64,
    pub artifact_power: f64,
}

impl MetricReport {
    pub const CSV_HEADER: &'static str = "psnr_db,ssim,artifact_power";

    /// One CSV row; infinite PSNR is written as `inf`.
    pub fn to_csv_row(&self) -> String {
        let psnr = if self.psnr.is_infinite() {
            "inf".to_string()
        } else {
            format!("{}", self.psnr)
        };
        format!("{psnr},{},{}", self.ssim, self.artifact_power)
    }
}

fn magnitudes(reference: &ComplexImage, test: &ComplexImage) -> Result<(Vec<f64>, Vec<f64>)> {
    if reference.n() != test.n() {
        return Err(Error::ShapeMismatch(format!(
            "reference {} vs test {}",
            reference.n(),
            test.n()
        )));
    }
    Ok((reference.magnitude(), test.magnitude()))
}

fn peak(values: &[f64]) -> Result<f64> {
    let max = values.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return Err(invalid("reference image is all zero"));
    }
    Ok(max)
}

/// `10 log10(R^2 / MSE)` with `R` the peak reference magnitude.
pub fn psnr(reference: &ComplexImage, test: &ComplexImage) -> Result<f64> {
    let (a, b) = magnitudes(reference, test)?;
    let r = peak(&a)?;
    let mse = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (r * r / mse).log10())
}

/// `sum (|ref| - |test|)^2 / sum |ref|^2`.
pub fn artifact_power(reference: &ComplexImage, test: &ComplexImage) -> Result<f64> {
    let (a, b) = magnitudes(reference, test)?;
    let energy: f64 = a.iter().map(|x| x * x).sum();
    if energy == 0.0 {
        return Err(invalid("reference image is all zero"));
    }
    let diff: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
    Ok(diff / energy)
}

/// Mean SSIM with both magnitude images divided by the reference peak.
pub fn ssim(reference: &ComplexImage, test: &ComplexImage) -> Result<f64> {
    let (a, b) = magnitudes(reference, test)?;
    let r = peak(&a)?;
    let a: Vec<f64> = a.iter().map(|v| v / r).collect();
    let b: Vec<f64> = b.iter().map(|v| v / r).collect();
    ssim_unit_range(&a, &b, reference.n())
}

fn gaussian_window() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as f64;
    let mut w: Vec<f64> = (0..SSIM_WINDOW * SSIM_WINDOW)
        .map(|i| {
            let dy = (i / SSIM_WINDOW) as f64 - half;
            let dx = (i % SSIM_WINDOW) as f64 - half;
            (-(dx * dx + dy * dy) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Mean local SSIM of two `n x n` images already scaled to dynamic range 1.
///
/// 11x11 Gaussian window (sigma 1.5), evaluated at every position where the
/// window fits inside the image.
pub fn ssim_unit_range(a: &[f64], b: &[f64], n: usize) -> Result<f64> {
    if a.len() != n * n || b.len() != n * n {
        return Err(Error::ShapeMismatch("ssim inputs must be n x n".into()));
    }
    if n < SSIM_WINDOW {
        return Err(invalid(format!(
            "ssim needs images of at least {SSIM_WINDOW} pixels"
        )));
    }
    let c1 = (SSIM_K1 * 1.0f64).powi(2);
    let c2 = (SSIM_K2 * 1.0f64).powi(2);
    let w = gaussian_window();
    let span = n - SSIM_WINDOW + 1;
    let mut total = 0.0;
    for r0 in 0..span {
        for c0 in 0..span {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for wr in 0..SSIM_WINDOW {
                for wc in 0..SSIM_WINDOW {
                    let weight = w[wr * SSIM_WINDOW + wc];
                    let i = (r0 + wr) * n + c0 + wc;
                    let (x, y) = (a[i], b[i]);
                    ma += weight * x;
                    mb += weight * y;
                    saa += weight * x * x;
                    sbb += weight * y * y;
                    sab += weight * x * y;
                }
            }
            let va = saa - ma * ma;
            let vb = sbb - mb * mb;
            let cov = sab - ma * mb;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
    }
    Ok(total / (span * span) as f64)
}

pub fn evaluate(reference: &ComplexImage, test: &ComplexImage) -> Result<MetricReport> {
    Ok(MetricReport {
        psnr: psnr(reference, test)?,
        ssim: ssim(reference, test)?,
        artifact_power: artifact_power(reference, test)?,
    })
}
