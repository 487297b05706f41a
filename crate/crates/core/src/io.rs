//! File formats.
//!
//! The `MRIF` container is little-endian: 4-byte magic `MRIF`, `u32` grid
//! size `n`, `u32` channel count, then `n * n * channels` `f32` values,
//! row-major with channels interleaved per pixel.
//!
//! Layouts used by this crate:
//! * images: 1 channel (magnitude / real part) or 2 channels (re, im);
//! * coil maps: `2 * n_coils` channels (re, im per coil);
//! * k-space: `2 * n_coils + 1` channels, the last being the 0/1 sampling mask.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{ComplexImage, KSpaceGrid};
use crate::phantom::CoilSensitivities;
use crate::sense::KSpaceData;
use crate::trajectory::SamplingMask;

pub const MAGIC: &[u8; 4] = b"MRIF";
const HEADER_LEN: usize = 12;

/// Decoded `MRIF` payload.
#[derive(Debug, Clone, PartialEq)]
pub struct RawArray {
    pub n: usize,
    pub channels: usize,
    pub values: Vec<f32>,
}

impl RawArray {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.values.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.n as u32).to_le_bytes());
        out.extend_from_slice(&(self.channels as u32).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Parse(format!(
                "file too short for header ({} bytes)",
                bytes.len()
            )));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::Parse("missing MRIF magic".into()));
        }
        let word =
            |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes")) as usize;
        let (n, channels) = (word(4), word(8));
        if channels == 0 {
            return Err(Error::Parse("zero channels".into()));
        }
        let expected = n
            .checked_mul(n)
            .and_then(|v| v.checked_mul(channels))
            .and_then(|v| v.checked_mul(4))
            .ok_or_else(|| Error::Parse("header dimensions overflow".into()))?;
        let body = &bytes[HEADER_LEN..];
        if body.len() != expected {
            return Err(Error::Parse(format!(
                "expected {expected} payload bytes, found {}",
                body.len()
            )));
        }
        if n % 2 != 0 {
            return Err(Error::OddSize(n));
        }
        let values = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        Ok(Self {
            n,
            channels,
            values,
        })
    }

    fn channel_value(&self, pixel: usize, channel: usize) -> f64 {
        self.values[pixel * self.channels + channel] as f64
    }
}

pub fn read_raw(path: &Path) -> Result<RawArray> {
    RawArray::from_bytes(&fs::read(path)?)
}

pub fn write_raw(path: &Path, raw: &RawArray) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(&raw.to_bytes())?;
    w.flush()?;
    Ok(())
}

fn complex_from_raw(raw: &RawArray, re: usize, im: Option<usize>) -> Vec<Complex64> {
    (0..raw.n * raw.n)
        .map(|p| {
            let imag = im.map_or(0.0, |c| raw.channel_value(p, c));
            Complex64::new(raw.channel_value(p, re), imag)
        })
        .collect()
}

/// Exact complex image container (no rescaling). Writes 2 channels.
pub fn write_complex_image(path: &Path, img: &ComplexImage) -> Result<()> {
    let values = img
        .data()
        .iter()
        .flat_map(|z| [z.re as f32, z.im as f32])
        .collect();
    write_raw(
        path,
        &RawArray {
            n: img.n(),
            channels: 2,
            values,
        },
    )
}

/// Reads a 1- or 2-channel container as a complex image without rescaling.
pub fn read_complex_image(path: &Path) -> Result<ComplexImage> {
    let raw = read_raw(path)?;
    let data = match raw.channels {
        1 => complex_from_raw(&raw, 0, None),
        2 => complex_from_raw(&raw, 0, Some(1)),
        c => return Err(Error::Parse(format!("image file with {c} channels"))),
    };
    ComplexImage::new(raw.n, data)
}

/// Magnitude image as a 1-channel container.
pub fn write_magnitude(path: &Path, img: &ComplexImage) -> Result<()> {
    let values = img.data().iter().map(|z| z.norm() as f32).collect();
    write_raw(
        path,
        &RawArray {
            n: img.n(),
            channels: 1,
            values,
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    RawF32,
    Gray8,
}

impl ImageFormat {
    /// Chooses by extension: `.mrif`/`.raw` as raw-f32, anything else as a
    /// raster image.
    pub fn from_path(path: &Path) -> Self {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref()
        {
            Some("mrif") | Some("raw") | Some("f32") => ImageFormat::RawF32,
            _ => ImageFormat::Gray8,
        }
    }
}

/// Imports a ground-truth image as magnitude-only data scaled to `[0, 1]`.
///
/// raw-f32 magnitudes are divided by their maximum (a zero image stays zero);
/// 8-bit rasters map 0..=255 to 0..=1.
pub fn load_image(path: &Path, format: ImageFormat) -> Result<ComplexImage> {
    match format {
        ImageFormat::RawF32 => {
            let raw = read_raw(path)?;
            let img = match raw.channels {
                1 | 2 => ComplexImage::new(
                    raw.n,
                    complex_from_raw(&raw, 0, (raw.channels == 2).then_some(1)),
                )?,
                c => return Err(Error::Parse(format!("image file with {c} channels"))),
            };
            let mag = img.magnitude();
            let peak = mag.iter().copied().fold(0.0, f64::max);
            let scale = if peak > 0.0 { 1.0 / peak } else { 1.0 };
            ComplexImage::from_real(raw.n, &mag.iter().map(|v| v * scale).collect::<Vec<_>>())
        }
        ImageFormat::Gray8 => {
            let decoded = image::open(path).map_err(|e| match e {
                image::ImageError::IoError(io) => Error::Io(io),
                other => Error::Parse(other.to_string()),
            })?;
            let gray = decoded.to_luma8();
            let (w, h) = (gray.width() as usize, gray.height() as usize);
            if w != h {
                return Err(Error::NonSquare {
                    width: w,
                    height: h,
                });
            }
            if w % 2 != 0 {
                return Err(Error::OddSize(w));
            }
            let vals: Vec<f64> = gray.as_raw().iter().map(|&p| p as f64 / 255.0).collect();
            ComplexImage::from_real(w, &vals)
        }
    }
}

/// Writes the magnitude of `img`: raw-f32 (1 channel) or an 8-bit raster
/// clamped to `[0, 1]`.
pub fn save_image(path: &Path, img: &ComplexImage, format: ImageFormat) -> Result<()> {
    match format {
        ImageFormat::RawF32 => write_magnitude(path, img),
        ImageFormat::Gray8 => {
            let px: Vec<u8> = img
                .magnitude()
                .iter()
                .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
                .collect();
            let n = img.n() as u32;
            image::GrayImage::from_raw(n, n, px)
                .expect("buffer matches dimensions")
                .save(path)
                .map_err(|e| match e {
                    image::ImageError::IoError(io) => Error::Io(io),
                    other => Error::Parse(other.to_string()),
                })
        }
    }
}

pub fn write_coils(path: &Path, coils: &CoilSensitivities) -> Result<()> {
    let n = coils.n();
    let mut values = Vec::with_capacity(n * n * 2 * coils.n_coils());
    for p in 0..n * n {
        for m in coils.maps() {
            let z = m.data()[p];
            values.extend([z.re as f32, z.im as f32]);
        }
    }
    write_raw(
        path,
        &RawArray {
            n,
            channels: 2 * coils.n_coils(),
            values,
        },
    )
}

pub fn read_coils(path: &Path) -> Result<CoilSensitivities> {
    let raw = read_raw(path)?;
    if raw.channels % 2 != 0 {
        return Err(Error::Parse(format!(
            "coil file with odd channel count {}",
            raw.channels
        )));
    }
    let maps = (0..raw.channels / 2)
        .map(|c| ComplexImage::new(raw.n, complex_from_raw(&raw, 2 * c, Some(2 * c + 1))))
        .collect::<Result<_>>()?;
    CoilSensitivities::new(maps)
}

pub fn write_kspace(path: &Path, data: &KSpaceData) -> Result<()> {
    let n = data.n();
    let channels = 2 * data.n_coils() + 1;
    let mut values = Vec::with_capacity(n * n * channels);
    for p in 0..n * n {
        for g in data.grids() {
            let z = g.data()[p];
            values.extend([z.re as f32, z.im as f32]);
        }
        values.push(if data.mask().bits()[p] { 1.0 } else { 0.0 });
    }
    write_raw(
        path,
        &RawArray {
            n,
            channels,
            values,
        },
    )
}

pub fn read_kspace(path: &Path) -> Result<KSpaceData> {
    let raw = read_raw(path)?;
    if raw.channels < 3 || raw.channels % 2 == 0 {
        return Err(Error::Parse(format!(
            "k-space file with {} channels",
            raw.channels
        )));
    }
    let n_coils = (raw.channels - 1) / 2;
    let grids = (0..n_coils)
        .map(|c| KSpaceGrid::new(raw.n, complex_from_raw(&raw, 2 * c, Some(2 * c + 1))))
        .collect::<Result<_>>()?;
    let bits = (0..raw.n * raw.n)
        .map(|p| raw.channel_value(p, raw.channels - 1) != 0.0)
        .collect();
    KSpaceData::new(grids, SamplingMask::new(raw.n, bits)?)
}
