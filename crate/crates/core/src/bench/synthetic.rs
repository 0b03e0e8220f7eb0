//! Seeded synthetic test images.
//!
//! The textured RGB image stands in for natural photographs: the red channel
//! is multi-octave value noise, the green channel a nonlinear, decreasing
//! function of red with a weak independent texture mixed in, so the two
//! channels are statistically dependent but not identical.

use std::path::Path;

use image::{Rgb, RgbImage};
use rand::Rng as _;

use crate::image_io::{ImageError, ImageGrid};
use crate::seed;

// (cell size in pixels, amplitude)
const OCTAVES: [(f64, f64); 4] = [(16.0, 0.45), (8.0, 0.3), (4.0, 0.17), (2.0, 0.08)];

fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Multi-octave value noise in `[0, 1]`.
pub fn value_noise(width: usize, height: usize, seed: u64) -> Vec<f64> {
    let mut out = vec![0.0; width * height];
    for (o, &(cell, amp)) in OCTAVES.iter().enumerate() {
        let mut rng = seed::rng(seed::derive(seed, &[o as u64]));
        let gw = (width as f64 / cell).ceil() as usize + 2;
        let gh = (height as f64 / cell).ceil() as usize + 2;
        let lattice: Vec<f64> = (0..gw * gh).map(|_| rng.random()).collect();
        for y in 0..height {
            let fy = y as f64 / cell;
            let (y0, ty) = (fy.floor() as usize, smooth(fy.fract()));
            for x in 0..width {
                let fx = x as f64 / cell;
                let (x0, tx) = (fx.floor() as usize, smooth(fx.fract()));
                let at = |i: usize, j: usize| lattice[j * gw + i];
                let top = at(x0, y0) * (1.0 - tx) + at(x0 + 1, y0) * tx;
                let bottom = at(x0, y0 + 1) * (1.0 - tx) + at(x0 + 1, y0 + 1) * tx;
                out[y * width + x] += amp * (top * (1.0 - ty) + bottom * ty);
            }
        }
    }
    let (mn, mx) = out.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = (mx - mn).max(f64::MIN_POSITIVE);
    out.iter_mut().for_each(|v| *v = (*v - mn) / span);
    out
}

/// Gray texture as an [`ImageGrid`].
pub fn texture(width: usize, height: usize, seed: u64) -> ImageGrid {
    ImageGrid::new(width, height, value_noise(width, height, seed)).expect("noise is in [0, 1]")
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// RGB texture with dependent red and green channels.
pub fn textured_rgb(width: usize, height: usize, seed: u64) -> RgbImage {
    let red = value_noise(width, height, seed::derive(seed, &[1]));
    let extra = value_noise(width, height, seed::derive(seed, &[2]));
    let blue = value_noise(width, height, seed::derive(seed, &[3]));
    RgbImage::from_fn(width as u32, height as u32, |x, y| {
        let i = y as usize * width + x as usize;
        let r = red[i];
        let g = 0.85 * (1.0 - r).powi(2) + 0.15 * extra[i];
        Rgb([to_u8(r), to_u8(g), to_u8(blue[i])])
    })
}

/// Horizontal-plus-vertical ramp.
pub fn gradient(width: usize, height: usize) -> ImageGrid {
    let span = (width + height).saturating_sub(2).max(1) as f64;
    ImageGrid::from_fn(width, height, |x, y| (x + y) as f64 / span).expect("ramp is in [0, 1]")
}

/// Independent uniform pixels.
pub fn white_noise(width: usize, height: usize, seed: u64) -> ImageGrid {
    let mut rng = seed::rng(seed);
    let data = (0..width * height).map(|_| rng.random::<f64>()).collect();
    ImageGrid::new(width, height, data).expect("uniform draws are in [0, 1]")
}

/// Write `texture_rgb.png`, `texture_gray.pgm`, `gradient.pgm` and
/// `noise.pgm` of the given size into `dir`.
pub fn write_fixtures(dir: impl AsRef<Path>, size: usize, seed: u64) -> Result<(), ImageError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    textured_rgb(size, size, seed)
        .save(dir.join("texture_rgb.png"))
        .map_err(|e| ImageError::UnsupportedFormat(e.to_string()))?;
    texture(size, size, seed).write_pgm(dir.join("texture_gray.pgm"))?;
    gradient(size, size).write_pgm(dir.join("gradient.pgm"))?;
    white_noise(size, size, seed).write_pgm(dir.join("noise.pgm"))?;
    Ok(())
}
