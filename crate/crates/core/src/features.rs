//! Patch features and the joint sample set.

use std::io::Write;
use std::path::Path;

use rand::seq::index;
use thiserror::Error;

use crate::image_io::{ImageGrid, PixelRect};
use crate::seed;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("patch of radius {h} around ({x}, {y}) leaves the image")]
    PatchOutOfBounds { x: usize, y: usize, h: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("empty sample region")]
    EmptyRegion,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A `T x D` matrix of sample points stored row-major.
///
/// `h` and `pixels` record where the rows came from when the set was built
/// from images; both are carried through projections unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    data: Vec<f64>,
    len: usize,
    dim: usize,
    h: Option<usize>,
    pixels: Vec<(usize, usize)>,
}

impl FeatureSet {
    /// Build from a flat row-major buffer. `data.len()` must equal `len * dim`.
    pub fn from_flat(data: Vec<f64>, len: usize, dim: usize) -> Result<Self, FeatureError> {
        if dim == 0 || data.len() != len * dim {
            return Err(FeatureError::DimensionMismatch(format!(
                "{} values cannot form {len} rows of dimension {dim}",
                data.len()
            )));
        }
        Ok(Self { data, len, dim, h: None, pixels: Vec::new() })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, FeatureError> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(FeatureError::DimensionMismatch(format!(
                    "row of length {} in a set of dimension {dim}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::from_flat(data, rows.len(), dim)
    }

    /// Sample count `T`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Feature dimension `D`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn patch_radius(&self) -> Option<usize> {
        self.h
    }

    /// Source pixel of every row (empty when not built from images).
    pub fn pixels(&self) -> &[(usize, usize)] {
        &self.pixels
    }

    #[inline]
    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Rows `indices` (in the given order) as a new set.
    pub fn select(&self, indices: &[usize]) -> FeatureSet {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        let pixels = if self.pixels.is_empty() {
            Vec::new()
        } else {
            indices.iter().map(|&i| self.pixels[i]).collect()
        };
        FeatureSet { data, len: indices.len(), dim: self.dim, h: self.h, pixels }
    }

    /// Same rows, new values (used by projections).
    pub(crate) fn with_values(&self, data: Vec<f64>, dim: usize) -> FeatureSet {
        debug_assert_eq!(data.len(), self.len * dim);
        FeatureSet { data, len: self.len, dim, h: self.h, pixels: self.pixels.clone() }
    }

    /// Apply `f` to every coordinate.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> FeatureSet {
        self.with_values(self.data.iter().map(|&v| f(v)).collect(), self.dim)
    }

    /// Add i.i.d. uniform noise in `[-magnitude, magnitude]` to every coordinate.
    ///
    /// Opt-in remedy for duplicate rows, which make nearest-neighbor estimators
    /// degenerate.
    pub fn jittered(&self, magnitude: f64, seed: u64) -> FeatureSet {
        use rand::Rng as _;
        let mut rng = seed::rng(seed::derive(seed, &[seed::stream::JITTER]));
        self.map(|v| v + magnitude * (2.0 * rng.random::<f64>() - 1.0))
    }

    /// Debug dump, one sample per line.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), FeatureError> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn patch_into(img: &ImageGrid, x: usize, y: usize, h: usize, out: &mut Vec<f64>) -> Result<(), FeatureError> {
    if x < h || y < h || x + h >= img.width() || y + h >= img.height() {
        return Err(FeatureError::PatchOutOfBounds { x, y, h });
    }
    let w = img.width();
    let data = img.data();
    for py in y - h..=y + h {
        out.extend_from_slice(&data[py * w + x - h..=py * w + x + h]);
    }
    Ok(())
}

/// The `(2h+1) x (2h+1)` window around `(x, y)`, flattened row-major.
pub fn extract_patch(img: &ImageGrid, x: usize, y: usize, h: usize) -> Result<Vec<f64>, FeatureError> {
    let mut out = Vec::with_capacity((2 * h + 1) * (2 * h + 1));
    patch_into(img, x, y, h, &mut out)?;
    Ok(out)
}

/// Dimension of a joint feature for patch radius `h`.
pub fn joint_dim(h: usize) -> usize {
    2 * (2 * h + 1) * (2 * h + 1)
}

/// Pixels of `region` used as samples: every pixel in row-major order, or a
/// uniform subset of `max_samples` of them drawn from `seed`, kept in
/// row-major order.
pub fn sample_pixels(region: PixelRect, max_samples: Option<usize>, seed: u64) -> Vec<(usize, usize)> {
    let all: Vec<(usize, usize)> = region.pixels().collect();
    match max_samples {
        Some(m) if m < all.len() => {
            let mut rng = seed::rng(seed::derive(seed, &[seed::stream::PIXELS]));
            let mut picked = index::sample(&mut rng, all.len(), m).into_vec();
            picked.sort_unstable();
            picked.into_iter().map(|i| all[i]).collect()
        }
        _ => all,
    }
}

/// Joint features `[patch(ref, p); patch(test, p)]` for the pixels of `region`.
pub fn joint_features(
    reference: &ImageGrid,
    test: &ImageGrid,
    h: usize,
    region: PixelRect,
    max_samples: Option<usize>,
    seed: u64,
) -> Result<FeatureSet, FeatureError> {
    if reference.width() != test.width() || reference.height() != test.height() {
        return Err(FeatureError::DimensionMismatch(format!(
            "reference {}x{} vs test {}x{}",
            reference.width(),
            reference.height(),
            test.width(),
            test.height()
        )));
    }
    if max_samples == Some(0) {
        return Err(FeatureError::EmptyRegion);
    }
    let pixels = sample_pixels(region, max_samples, seed);
    joint_features_at(reference, test, h, pixels)
}

/// Joint features at an explicit pixel list.
pub fn joint_features_at(
    reference: &ImageGrid,
    test: &ImageGrid,
    h: usize,
    pixels: Vec<(usize, usize)>,
) -> Result<FeatureSet, FeatureError> {
    if pixels.is_empty() {
        return Err(FeatureError::EmptyRegion);
    }
    let dim = joint_dim(h);
    let mut data = Vec::with_capacity(pixels.len() * dim);
    for &(x, y) in &pixels {
        patch_into(reference, x, y, h, &mut data)?;
        patch_into(test, x, y, h, &mut data)?;
    }
    Ok(FeatureSet { data, len: pixels.len(), dim, h: Some(h), pixels })
}
