//! Image loading, Sobel filtering, rotation and the rotation-safe pixel region.

use std::f64::consts::SQRT_2;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::{DynamicImage, GenericImageView};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("channel {0:?} unavailable on a grayscale image")]
    ChannelUnavailable(Channel),
    #[error("image is {width}x{height}, need at least 3x3")]
    ImageTooSmall { width: usize, height: usize },
    #[error("rotation angle {0} degrees out of range")]
    AngleOutOfRange(f64),
    #[error("no pixel satisfies the rotation/patch constraints")]
    EmptyRegion,
    #[error("invalid image data: {0}")]
    InvalidData(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Red,
    Green,
    Blue,
    Gray,
}

impl std::str::FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "red" | "r" => Ok(Channel::Red),
            "green" | "g" => Ok(Channel::Green),
            "blue" | "b" => Ok(Channel::Blue),
            "gray" | "grey" | "luma" => Ok(Channel::Gray),
            other => Err(format!("unknown channel `{other}`")),
        }
    }
}

/// A 2-D scalar intensity field, row-major, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ImageGrid {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, ImageError> {
        if data.len() != width * height {
            return Err(ImageError::InvalidData(format!(
                "expected {} values for {width}x{height}, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(ImageError::InvalidData(format!("intensity {v} outside [0,1]")));
        }
        Ok(Self { width, height, data })
    }

    /// Build an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, ImageError> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    fn center(&self) -> (f64, f64) {
        ((self.width as f64 - 1.0) / 2.0, (self.height as f64 - 1.0) / 2.0)
    }

    /// Bilinear sample at a continuous position. `None` when the four-pixel
    /// footprint is not inside the image.
    pub fn sample_bilinear(&self, sx: f64, sy: f64) -> Option<f64> {
        const EPS: f64 = 1e-9;
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        if !(sx >= -EPS && sy >= -EPS && sx <= max_x + EPS && sy <= max_y + EPS) {
            return None;
        }
        let sx = sx.clamp(0.0, max_x);
        let sy = sy.clamp(0.0, max_y);
        let x0 = sx.floor() as usize;
        let y0 = sy.floor() as usize;
        let fx = sx - x0 as f64;
        let fy = sy - y0 as f64;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let v00 = self.get(x0, y0);
        let v10 = self.get(x1, y0);
        let v01 = self.get(x0, y1);
        let v11 = self.get(x1, y1);
        let v = v00 * (1.0 - fx) * (1.0 - fy)
            + v10 * fx * (1.0 - fy)
            + v01 * (1.0 - fx) * fy
            + v11 * fx * fy;
        Some(v.clamp(0.0, 1.0))
    }

    /// Write the image as a binary 8-bit PGM (debug dump).
    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<(), ImageError> {
        let mut w = BufWriter::new(File::create(path)?);
        write!(w, "P5\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self.data.iter().map(|v| (v * 255.0).round() as u8).collect();
        w.write_all(&bytes)?;
        w.flush()?;
        Ok(())
    }
}

/// Inclusive axis-aligned pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl PixelRect {
    pub fn full(width: usize, height: usize) -> Self {
        Self { x0: 0, y0: 0, x1: width - 1, y1: height - 1 }
    }

    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }

    pub fn pixel_count(&self) -> usize {
        self.width() * self.height()
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        (self.x0..=self.x1).contains(&x) && (self.y0..=self.y1).contains(&y)
    }

    /// Pixels in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.y0..=self.y1).flat_map(move |y| (self.x0..=self.x1).map(move |x| (x, y)))
    }
}

fn luma(r: u8, g: u8, b: u8) -> f64 {
    if r == g && g == b {
        return r as f64 / 255.0;
    }
    ((0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64) / 255.0).clamp(0.0, 1.0)
}

/// Load one channel of an 8-bit PNG / PGM / PPM file, scaled to `[0, 1]`.
pub fn load_image(path: impl AsRef<Path>, channel: Channel) -> Result<ImageGrid, ImageError> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(ImageError::FileNotFound(path.display().to_string()));
    }
    let img = image::ImageReader::open(path)?
        .with_guessed_format()?
        .decode()
        .map_err(|e| ImageError::UnsupportedFormat(e.to_string()))?;
    from_dynamic(&img, channel)
}

/// Decode one channel from in-memory encoded bytes.
pub fn decode_image(bytes: &[u8], channel: Channel) -> Result<ImageGrid, ImageError> {
    let img = image::load_from_memory(bytes).map_err(|e| ImageError::UnsupportedFormat(e.to_string()))?;
    from_dynamic(&img, channel)
}

fn from_dynamic(img: &DynamicImage, channel: Channel) -> Result<ImageGrid, ImageError> {
    let (w, h) = img.dimensions();
    let (w, h) = (w as usize, h as usize);
    let data: Vec<f64> = match img {
        DynamicImage::ImageLuma8(buf) => match channel {
            Channel::Gray => buf.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
            c => return Err(ImageError::ChannelUnavailable(c)),
        },
        DynamicImage::ImageLumaA8(buf) => match channel {
            Channel::Gray => buf.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
            c => return Err(ImageError::ChannelUnavailable(c)),
        },
        DynamicImage::ImageRgb8(buf) => buf.pixels().map(|p| pick(p.0[0], p.0[1], p.0[2], channel)).collect(),
        DynamicImage::ImageRgba8(buf) => buf.pixels().map(|p| pick(p.0[0], p.0[1], p.0[2], channel)).collect(),
        other => {
            return Err(ImageError::UnsupportedFormat(format!(
                "only 8-bit gray or RGB rasters are supported, got {:?}",
                other.color()
            )))
        }
    };
    ImageGrid::new(w, h, data)
}

fn pick(r: u8, g: u8, b: u8, channel: Channel) -> f64 {
    match channel {
        Channel::Red => r as f64 / 255.0,
        Channel::Green => g as f64 / 255.0,
        Channel::Blue => b as f64 / 255.0,
        Channel::Gray => luma(r, g, b),
    }
}

/// Largest possible Sobel magnitude for intensities in `[0, 1]`.
pub const SOBEL_MAX: f64 = 4.0 * SQRT_2;

/// Sobel gradient magnitude with edge-replicated borders, rescaled by [`SOBEL_MAX`].
pub fn sobel_magnitude(img: &ImageGrid) -> Result<ImageGrid, ImageError> {
    let (w, h) = (img.width, img.height);
    if w < 3 || h < 3 {
        return Err(ImageError::ImageTooSmall { width: w, height: h });
    }
    let at = |x: isize, y: isize| {
        let cx = x.clamp(0, w as isize - 1) as usize;
        let cy = y.clamp(0, h as isize - 1) as usize;
        img.get(cx, cy)
    };
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            out.push(((gx * gx + gy * gy).sqrt() / SOBEL_MAX).clamp(0.0, 1.0));
        }
    }
    ImageGrid::new(w, h, out)
}

/// Largest accepted rotation magnitude in degrees.
pub const MAX_ROTATION_DEG: f64 = 180.0;

/// Largest `max_theta` accepted by [`valid_region`].
pub const MAX_REGION_THETA_DEG: f64 = 45.0;

fn sin_cos_deg(theta: f64) -> (f64, f64) {
    // exact values on the lattice-preserving angles
    let quarter = theta / 90.0;
    if quarter == quarter.round() {
        return match (quarter.round() as i64).rem_euclid(4) {
            0 => (0.0, 1.0),
            1 => (1.0, 0.0),
            2 => (0.0, -1.0),
            _ => (-1.0, 0.0),
        };
    }
    theta.to_radians().sin_cos()
}

/// Rotate about the image center by `theta` degrees (inverse mapping, bilinear).
///
/// Output pixel `p` takes the value at `c + R(-theta)(p - c)`. Pixels whose
/// source footprint leaves the image are set to 0.
pub fn rotate(img: &ImageGrid, theta: f64) -> Result<ImageGrid, ImageError> {
    rotate_with_mask(img, theta).map(|(out, _)| out)
}

/// Like [`rotate`], also returning a row-major mask that is `true` where the
/// bilinear source footprint was fully inside the input.
pub fn rotate_with_mask(img: &ImageGrid, theta: f64) -> Result<(ImageGrid, Vec<bool>), ImageError> {
    if !theta.is_finite() || theta.abs() > MAX_ROTATION_DEG {
        return Err(ImageError::AngleOutOfRange(theta));
    }
    if theta == 0.0 {
        return Ok((img.clone(), vec![true; img.data.len()]));
    }
    let (s, c) = sin_cos_deg(theta);
    let (cx, cy) = img.center();
    let mut data = Vec::with_capacity(img.data.len());
    let mut mask = Vec::with_capacity(img.data.len());
    for y in 0..img.height {
        let dy = y as f64 - cy;
        for x in 0..img.width {
            let dx = x as f64 - cx;
            let sx = cx + c * dx + s * dy;
            let sy = cy - s * dx + c * dy;
            match img.sample_bilinear(sx, sy) {
                Some(v) => {
                    data.push(v);
                    mask.push(true);
                }
                None => {
                    data.push(0.0);
                    mask.push(false);
                }
            }
        }
    }
    Ok((ImageGrid { width: img.width, height: img.height, data }, mask))
}

/// Half-extent along one axis of a centered rectangle with half-sizes `(a, b)`
/// rotated by any angle in `[0, phi_max]`.
fn rotated_extent(a: f64, b: f64, phi_max: f64) -> f64 {
    if b.atan2(a) <= phi_max {
        a.hypot(b)
    } else {
        a * phi_max.cos() + b * phi_max.sin()
    }
}

/// Centered rectangle of pixels whose `(2h+1)^2` patches stay inside the
/// in-bounds area of every rotation with `|theta| <= max_theta`.
///
/// The patch footprint is a centered rectangle with the image's aspect ratio,
/// shrunk until its rotated copies fit inside `[0, w-1] x [0, h-1]`.
pub fn valid_region(
    width: usize,
    height: usize,
    max_theta: f64,
    h: usize,
) -> Result<PixelRect, ImageError> {
    if !(0.0..=MAX_REGION_THETA_DEG).contains(&max_theta) {
        return Err(ImageError::AngleOutOfRange(max_theta));
    }
    if width == 0 || height == 0 {
        return Err(ImageError::EmptyRegion);
    }
    let half_w = (width as f64 - 1.0) / 2.0;
    let half_h = (height as f64 - 1.0) / 2.0;
    let phi = max_theta.to_radians();
    let scale = if max_theta == 0.0 || (half_w == 0.0 && half_h == 0.0) {
        1.0
    } else {
        let ex = rotated_extent(half_w, half_h, phi);
        let ey = rotated_extent(half_h, half_w, phi);
        (half_w / ex).min(half_h / ey)
    };
    const SLACK: f64 = 1e-9;
    let a = scale * half_w - h as f64;
    let b = scale * half_h - h as f64;
    if a < -SLACK || b < -SLACK {
        return Err(ImageError::EmptyRegion);
    }
    let x0 = (half_w - a - SLACK).ceil().max(0.0) as usize;
    let x1 = (half_w + a + SLACK).floor() as usize;
    let y0 = (half_h - b - SLACK).ceil().max(0.0) as usize;
    let y1 = (half_h + b + SLACK).floor() as usize;
    if x0 > x1 || y0 > y1 || x1 >= width || y1 >= height {
        return Err(ImageError::EmptyRegion);
    }
    Ok(PixelRect { x0, y0, x1, y1 })
}
