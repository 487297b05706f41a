//! Ground-truth sources: the modified Shepp-Logan phantom (plus axial slices
//! through its 3-D extension) and analytic multi-coil sensitivity maps.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::grid::ComplexImage;

/// One ellipse of the phantom in normalized coordinates `[-1, 1]^2`.
#[derive(Debug, Clone, Copy)]
struct Ellipse {
    intensity: f64,
    a: f64,
    b: f64,
    x0: f64,
    y0: f64,
    phi_deg: f64,
}

/// Modified Shepp-Logan (Toft) with intensities chosen so every region lies
/// in `[0, 1]`.
const SHEPP_LOGAN: [Ellipse; 10] = [
    Ellipse {
        intensity: 1.0,
        a: 0.69,
        b: 0.92,
        x0: 0.0,
        y0: 0.0,
        phi_deg: 0.0,
    },
    Ellipse {
        intensity: -0.8,
        a: 0.6624,
        b: 0.874,
        x0: 0.0,
        y0: -0.0184,
        phi_deg: 0.0,
    },
    Ellipse {
        intensity: -0.2,
        a: 0.11,
        b: 0.31,
        x0: 0.22,
        y0: 0.0,
        phi_deg: -18.0,
    },
    Ellipse {
        intensity: -0.2,
        a: 0.16,
        b: 0.41,
        x0: -0.22,
        y0: 0.0,
        phi_deg: 18.0,
    },
    Ellipse {
        intensity: 0.1,
        a: 0.21,
        b: 0.25,
        x0: 0.0,
        y0: 0.35,
        phi_deg: 0.0,
    },
    Ellipse {
        intensity: 0.1,
        a: 0.046,
        b: 0.046,
        x0: 0.0,
        y0: 0.1,
        phi_deg: 0.0,
    },
    Ellipse {
        intensity: 0.1,
        a: 0.046,
        b: 0.046,
        x0: 0.0,
        y0: -0.1,
        phi_deg: 0.0,
    },
    Ellipse {
        intensity: 0.1,
        a: 0.046,
        b: 0.023,
        x0: -0.08,
        y0: -0.605,
        phi_deg: 0.0,
    },
    Ellipse {
        intensity: 0.1,
        a: 0.023,
        b: 0.023,
        x0: 0.0,
        y0: -0.606,
        phi_deg: 0.0,
    },
    Ellipse {
        intensity: 0.1,
        a: 0.023,
        b: 0.046,
        x0: 0.06,
        y0: -0.605,
        phi_deg: 0.0,
    },
];

/// Axial half-extent `c` and centre `z0` of each ellipse's 3-D ellipsoid.
const AXIAL_EXTENT: [(f64, f64); 10] = [
    (0.81, 0.0),
    (0.78, 0.0),
    (0.22, 0.0),
    (0.28, 0.0),
    (0.41, -0.15),
    (0.05, 0.25),
    (0.05, 0.25),
    (0.05, 0.0),
    (0.02, 0.0),
    (0.02, 0.0),
];

impl Ellipse {
    fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.phi_deg.to_radians().sin_cos();
        let dx = x - self.x0;
        let dy = y - self.y0;
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u * u) / (self.a * self.a) + (v * v) / (self.b * self.b) <= 1.0
    }
}

/// Normalized phantom coordinates of pixel `(row, col)`; `y` points up and the
/// origin sits at pixel `(n/2, n/2)`.
pub fn pixel_coords(n: usize, row: usize, col: usize) -> (f64, f64) {
    let h = (n / 2) as f64;
    ((col as f64 - h) / h, (h - row as f64) / h)
}

fn check_phantom_size(n: usize) -> Result<()> {
    if !n.is_multiple_of(2) {
        return Err(Error::OddSize(n));
    }
    if n < 16 {
        return Err(invalid(format!("phantom size {n} below minimum 16")));
    }
    Ok(())
}

fn rasterize(n: usize, ellipses: &[Ellipse]) -> Result<ComplexImage> {
    ComplexImage::from_fn(n, |r, c| {
        let (x, y) = pixel_coords(n, r, c);
        let v: f64 = ellipses
            .iter()
            .filter(|e| e.contains(x, y))
            .map(|e| e.intensity)
            .sum();
        Complex64::new(v.clamp(0.0, 1.0), 0.0)
    })
}

/// Real-valued 10-ellipse modified Shepp-Logan phantom sampled at pixel
/// centres.
pub fn shepp_logan(n: usize) -> Result<ComplexImage> {
    check_phantom_size(n)?;
    rasterize(n, &SHEPP_LOGAN)
}

/// Axial cross-section at height `z` through the 3-D extension of the
/// phantom (ellipsoids are taken axis-aligned in `z`). Used to produce a set
/// of distinct but related slices for datasets.
pub fn shepp_logan_slice(n: usize, z: f64) -> Result<ComplexImage> {
    check_phantom_size(n)?;
    if !z.is_finite() || z.abs() >= 1.0 {
        return Err(invalid(format!("slice height {z} outside (-1, 1)")));
    }
    let section: Vec<Ellipse> = SHEPP_LOGAN
        .iter()
        .zip(AXIAL_EXTENT)
        .filter_map(|(e, (c, z0))| {
            let t = (z - z0) / c;
            (t.abs() < 1.0).then(|| {
                let s = (1.0 - t * t).sqrt();
                Ellipse {
                    a: e.a * s,
                    b: e.b * s,
                    ..*e
                }
            })
        })
        .collect();
    rasterize(n, &section)
}

/// Slice heights used for an `count`-slice phantom set, evenly spread over
/// the central part of the head.
pub fn slice_heights(count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..count)
            .map(|i| -0.3 + 0.6 * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// Complex receive-coil sensitivity maps, one per coil.
#[derive(Debug, Clone, PartialEq)]
pub struct CoilSensitivities {
    maps: Vec<ComplexImage>,
}

impl CoilSensitivities {
    pub fn new(maps: Vec<ComplexImage>) -> Result<Self> {
        let first = maps
            .first()
            .ok_or_else(|| invalid("at least one coil map is required"))?;
        let n = first.n();
        if let Some(m) = maps.iter().find(|m| m.n() != n) {
            return Err(Error::ShapeMismatch(format!(
                "coil maps of size {n} and {}",
                m.n()
            )));
        }
        Ok(Self { maps })
    }

    pub fn n(&self) -> usize {
        self.maps[0].n()
    }

    pub fn n_coils(&self) -> usize {
        self.maps.len()
    }

    pub fn maps(&self) -> &[ComplexImage] {
        &self.maps
    }

    /// Pixelwise `sum_c |s_c|^2`.
    pub fn sum_of_squares(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.n() * self.n()];
        for m in &self.maps {
            for (a, z) in acc.iter_mut().zip(m.data()) {
                *a += z.norm_sqr();
            }
        }
        acc
    }

    /// Pixelwise root-sum-of-squares.
    pub fn rss(&self) -> Vec<f64> {
        self.sum_of_squares().into_iter().map(f64::sqrt).collect()
    }
}

/// Angular position of coil `k` of `n_coils` on the ring.
pub fn coil_angle(k: usize, n_coils: usize) -> f64 {
    2.0 * PI * k as f64 / n_coils as f64 + PI / 4.0
}

/// Unnormalized Gaussian coil profile with a linear phase ramp.
///
/// Coil centres lie on a circle of radius `0.55 n` around the FOV centre,
/// the magnitude falls off with `sigma = 0.4 n`, and the phase ramps by `pi`
/// across the FOV along the direction of the coil.
fn raw_coil(n: usize, angle: f64, row: usize, col: usize) -> Complex64 {
    let nf = n as f64;
    let h = nf / 2.0;
    let (sa, ca) = angle.sin_cos();
    let dx = col as f64 - h;
    let dy = h - row as f64;
    let ex = dx - 0.55 * nf * ca;
    let ey = dy - 0.55 * nf * sa;
    let sigma = 0.4 * nf;
    let mag = (-(ex * ex + ey * ey) / (2.0 * sigma * sigma)).exp();
    let phase = angle + PI * (dx * ca + dy * sa) / nf;
    Complex64::from_polar(mag, phase)
}

/// Analytic coil maps normalized to unit root-sum-of-squares at every pixel.
pub fn simulate_coils(n: usize, n_coils: usize) -> Result<CoilSensitivities> {
    if n_coils == 0 {
        return Err(invalid("n_coils must be at least 1"));
    }
    let raw: Vec<ComplexImage> = (0..n_coils)
        .map(|k| {
            let angle = coil_angle(k, n_coils);
            ComplexImage::from_fn(n, |r, c| raw_coil(n, angle, r, c))
        })
        .collect::<Result<_>>()?;
    let rss = CoilSensitivities { maps: raw.clone() }.rss();
    let maps = raw
        .into_iter()
        .map(|m| {
            let data = m.data().iter().zip(&rss).map(|(z, s)| z / s).collect();
            ComplexImage::new(n, data)
        })
        .collect::<Result<_>>()?;
    CoilSensitivities::new(maps)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent membership test written from the canonical table
    /// (intensity, a, b, x0, y0, phi).
    fn oracle_value(x: f64, y: f64) -> f64 {
        let table: [[f64; 6]; 10] = [
            [1.0, 0.69, 0.92, 0.0, 0.0, 0.0],
            [-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0],
            [-0.2, 0.11, 0.31, 0.22, 0.0, -18.0],
            [-0.2, 0.16, 0.41, -0.22, 0.0, 18.0],
            [0.1, 0.21, 0.25, 0.0, 0.35, 0.0],
            [0.1, 0.046, 0.046, 0.0, 0.1, 0.0],
            [0.1, 0.046, 0.046, 0.0, -0.1, 0.0],
            [0.1, 0.046, 0.023, -0.08, -0.605, 0.0],
            [0.1, 0.023, 0.023, 0.0, -0.606, 0.0],
            [0.1, 0.023, 0.046, 0.06, -0.605, 0.0],
        ];
        let mut v = 0.0;
        for [a0, a, b, x0, y0, phi] in table {
            let t = phi * PI / 180.0;
            let xr = (x - x0) * t.cos() + (y - y0) * t.sin();
            let yr = (y - y0) * t.cos() - (x - x0) * t.sin();
            if (xr / a).powi(2) + (yr / b).powi(2) <= 1.0 {
                v += a0;
            }
        }
        v
    }

    #[test]
    fn phantom_range_and_corners() {
        let p = shepp_logan(64).unwrap();
        for z in p.data() {
            assert!((0.0..=1.0).contains(&z.re));
            assert_eq!(z.im, 0.0);
        }
        for &(r, c) in &[(0, 0), (0, 63), (63, 0), (63, 63)] {
            assert_eq!(p.get(r, c).re, 0.0);
        }
    }

    #[test]
    fn phantom_center_matches_ellipse_oracle() {
        let p = shepp_logan(64).unwrap();
        let expected = oracle_value(0.0, 0.0);
        assert!((p.get(32, 32).re - expected).abs() < 1e-12);
        assert!((expected - 0.2).abs() < 1e-12);
        // spot-check a full row against the oracle too
        for c in 0..64 {
            let (x, y) = pixel_coords(64, 20, c);
            assert!((p.get(20, c).re - oracle_value(x, y).clamp(0.0, 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn phantom_mirror_symmetry_away_from_small_ellipses() {
        let n = 64;
        let p = shepp_logan(n).unwrap();
        // rows 12 and 16 (y = 0.625, 0.5) clear the two tilted ellipses,
        // which are not mirror images of each other, and the bottom ones
        for row in [12, 16] {
            for c in 1..n {
                let (x, y) = pixel_coords(n, row, c);
                let mirror = n - c;
                assert!((oracle_value(x, y) - oracle_value(-x, y)).abs() < 1e-12);
                assert!((p.get(row, c).re - p.get(row, mirror).re).abs() < 1e-12);
            }
        }
        // row 32 crosses the tilted ellipses and is not symmetric
        assert!((1..n).any(|c| p.get(32, c) != p.get(32, n - c)));
    }

    #[test]
    fn phantom_rejects_bad_sizes() {
        assert!(matches!(shepp_logan(63), Err(Error::OddSize(63))));
        assert!(matches!(shepp_logan(8), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn phantom_is_deterministic() {
        let a = shepp_logan(32).unwrap();
        let b = shepp_logan(32).unwrap();
        assert!(a
            .data()
            .iter()
            .zip(b.data())
            .all(|(x, y)| x.re.to_bits() == y.re.to_bits()));
    }

    #[test]
    fn slices_differ_and_stay_in_range() {
        let hs = slice_heights(5);
        let a = shepp_logan_slice(32, hs[0]).unwrap();
        let b = shepp_logan_slice(32, hs[4]).unwrap();
        assert_ne!(a, b);
        for z in a.data().iter().chain(b.data()) {
            assert!((0.0..=1.0).contains(&z.re));
        }
        assert!(shepp_logan_slice(32, 1.5).is_err());
    }

    #[test]
    fn single_coil_has_unit_magnitude() {
        let coils = simulate_coils(16, 1).unwrap();
        for z in coils.maps()[0].data() {
            assert!((z.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rss_is_one_everywhere() {
        for &(n, nc) in &[(8, 2), (16, 3), (32, 4), (64, 8)] {
            let coils = simulate_coils(n, nc).unwrap();
            let worst = coils
                .rss()
                .iter()
                .map(|s| (s - 1.0).abs())
                .fold(0.0, f64::max);
            assert!(worst <= 1e-10, "n={n} nc={nc} worst={worst}");
        }
    }

    #[test]
    fn opposite_coils_are_point_symmetric() {
        let n = 32;
        let coils = simulate_coils(n, 4).unwrap();
        // direct evaluation of the Gaussian at mirrored pixels
        let gauss = |k: usize, r: usize, c: usize| {
            let h = n as f64 / 2.0;
            let ang = 2.0 * PI * k as f64 / 4.0 + PI / 4.0;
            let (cx, cy) = (
                h + 0.55 * n as f64 * ang.cos(),
                h - 0.55 * n as f64 * ang.sin(),
            );
            let d2 = (c as f64 - cx).powi(2) + (r as f64 - cy).powi(2);
            (-d2 / (2.0 * (0.4 * n as f64).powi(2))).exp()
        };
        for k in 0..2 {
            for r in 1..n {
                for c in 1..n {
                    let (mr, mc) = (n - r, n - c);
                    assert!((gauss(k, r, c) - gauss(k + 2, mr, mc)).abs() < 1e-12);
                    let a = coils.maps()[k].get(r, c).norm();
                    let b = coils.maps()[k + 2].get(mr, mc).norm();
                    assert!((a - b).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn zero_coils_rejected() {
        assert!(simulate_coils(16, 0).is_err());
        assert!(CoilSensitivities::new(Vec::new()).is_err());
    }
}
