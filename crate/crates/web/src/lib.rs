//! Browser bindings for the multishot motion simulator.
//!
//! Rendering helpers are plain Rust (tested natively); the `#[wasm_bindgen]`
//! wrappers only convert errors into JS exceptions.

use mshot::phantom::shepp_logan_slice;
use mshot::pipeline::{sample_rng, ExperimentConfig, Simulator};
use mshot::trajectory::{make_trajectory, TrajectoryKind};
use mshot::{fft2c, metrics, ComplexImage, Error, Result};
use wasm_bindgen::prelude::*;

/// Gray RGBA buffer of `|img|`, scaled so `peak` maps to white.
pub fn gray_rgba(values: &[f64], peak: f64) -> Vec<u8> {
    let scale = if peak > 0.0 { 255.0 / peak } else { 0.0 };
    values
        .iter()
        .flat_map(|&v| {
            let g = (v * scale).round().clamp(0.0, 255.0) as u8;
            [g, g, g, 255]
        })
        .collect()
}

fn magnitude_rgba(img: &ComplexImage) -> Vec<u8> {
    let mag = img.magnitude();
    let peak = mag.iter().cloned().fold(0.0, f64::max);
    gray_rgba(&mag, peak)
}

// HSV with full saturation and value; h in [0, 1).
fn hue(h: f64) -> [u8; 3] {
    let x = h * 6.0;
    let f = x - x.floor();
    let (up, down) = ((f * 255.0) as u8, ((1.0 - f) * 255.0) as u8);
    match x as usize % 6 {
        0 => [255, up, 0],
        1 => [down, 255, 0],
        2 => [0, 255, up],
        3 => [0, down, 255],
        4 => [up, 0, 255],
        _ => [255, 0, down],
    }
}

fn parse_kind(name: &str) -> Result<TrajectoryKind> {
    name.parse()
}

/// Motion-corrupted reconstruction of a phantom slice.
#[wasm_bindgen]
pub struct Simulation {
    n: usize,
    clean: Vec<u8>,
    corrupted: Vec<u8>,
    psnr: f64,
    ssim: f64,
    artifact_power: f64,
    iterations: usize,
}

#[wasm_bindgen]
impl Simulation {
    #[wasm_bindgen(getter)]
    pub fn n(&self) -> usize {
        self.n
    }
    /// RGBA pixels of the clean slice.
    #[wasm_bindgen(getter)]
    pub fn clean(&self) -> Vec<u8> {
        self.clean.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn corrupted(&self) -> Vec<u8> {
        self.corrupted.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn psnr(&self) -> f64 {
        self.psnr
    }
    #[wasm_bindgen(getter)]
    pub fn ssim(&self) -> f64 {
        self.ssim
    }
    #[wasm_bindgen(getter, js_name = artifactPower)]
    pub fn artifact_power(&self) -> f64 {
        self.artifact_power
    }
    #[wasm_bindgen(getter)]
    pub fn iterations(&self) -> usize {
        self.iterations
    }
}

pub fn run_simulation(
    n: usize,
    shots: usize,
    trajectory: &str,
    max_rotation_deg: f64,
    n_coils: usize,
    slice: f64,
    seed: u64,
) -> Result<Simulation> {
    let cfg = ExperimentConfig {
        n,
        shots,
        trajectory: parse_kind(trajectory)?,
        max_rotation_deg,
        n_coils,
        seed,
        ..ExperimentConfig::default()
    };
    let clean = shepp_logan_slice(n, slice)?;
    let pair = Simulator::new(&cfg)?.generate_pair(&clean, &mut sample_rng(seed, 0))?;
    let report = metrics::evaluate(&clean, &pair.corrupted)?;
    Ok(Simulation {
        n,
        clean: magnitude_rgba(&clean),
        corrupted: magnitude_rgba(&pair.corrupted),
        psnr: report.psnr,
        ssim: report.ssim,
        artifact_power: report.artifact_power,
        iterations: pair.report.iterations(),
    })
}

/// Colour-coded shot assignment: every k-space point is painted with its shot's hue.
pub fn render_trajectory(trajectory: &str, n: usize, shots: usize, seed: u64) -> Result<Vec<u8>> {
    let traj = make_trajectory(parse_kind(trajectory)?, n, shots, seed)?;
    Ok(traj
        .assignment()
        .iter()
        .flat_map(|&s| {
            let [r, g, b] = hue(s as f64 / shots as f64);
            [r, g, b, 255]
        })
        .collect())
}

/// `log(1 + |k|)` of a phantom slice, normalised to the brightest point.
pub fn render_kspace(n: usize, slice: f64) -> Result<Vec<u8>> {
    let k = fft2c(&shepp_logan_slice(n, slice)?)?;
    let logs: Vec<f64> = k.magnitude().iter().map(|m| m.ln_1p()).collect();
    let peak = logs.iter().cloned().fold(0.0, f64::max);
    Ok(gray_rgba(&logs, peak))
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub fn simulate(
    n: usize,
    shots: usize,
    trajectory: &str,
    max_rotation_deg: f64,
    n_coils: usize,
    slice: f64,
    seed: u64,
) -> std::result::Result<Simulation, JsError> {
    run_simulation(n, shots, trajectory, max_rotation_deg, n_coils, slice, seed).map_err(js)
}

#[wasm_bindgen(js_name = trajectoryMask)]
pub fn trajectory_mask(
    trajectory: &str,
    n: usize,
    shots: usize,
    seed: u64,
) -> std::result::Result<Vec<u8>, JsError> {
    render_trajectory(trajectory, n, shots, seed).map_err(js)
}

#[wasm_bindgen(js_name = kspaceLogMagnitude)]
pub fn kspace_log_magnitude(n: usize, slice: f64) -> std::result::Result<Vec<u8>, JsError> {
    render_kspace(n, slice).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simulation_buffers_and_metrics() {
        let sim = run_simulation(32, 4, "random", 8.0, 4, 0.0, 1).unwrap();
        assert_eq!(sim.clean().len(), 32 * 32 * 4);
        assert_eq!(sim.corrupted().len(), 32 * 32 * 4);
        assert!(sim.psnr().is_finite() && sim.ssim() < 1.0 && sim.artifact_power() > 0.0);
    }

    #[test]
    fn still_scan_is_clean() {
        let sim = run_simulation(32, 4, "sequential", 0.0, 4, 0.0, 1).unwrap();
        assert!(sim.artifact_power() < 1e-12);
    }

    #[test]
    fn trajectory_colours_follow_shots() {
        let px = render_trajectory("parallel-1d", 8, 2, 0).unwrap();
        assert_eq!(px.len(), 8 * 8 * 4);
        // row 0 is shot 0 (red), row 1 is shot 1 (cyan)
        assert_eq!(&px[..4], &[255, 0, 0, 255]);
        assert_eq!(&px[8 * 4..8 * 4 + 4], &[0, 255, 255, 255]);
    }

    #[test]
    fn kspace_peak_is_centre() {
        let n = 16;
        let px = render_kspace(n, 0.0).unwrap();
        let centre = (n / 2 * n + n / 2) * 4;
        assert_eq!(px[centre], 255);
    }

    #[test]
    fn bad_inputs_are_errors() {
        assert!(render_trajectory("spiral", 8, 2, 0).is_err());
        assert!(run_simulation(31, 4, "random", 5.0, 4, 0.0, 0).is_err());
    }
}
