//! Gaussian random projections.
//!
//! Entries are i.i.d. `N(0, 1)` drawn with `rand_distr::StandardNormal`
//! (ziggurat) from a ChaCha8 stream keyed by the matrix seed, row-major. The
//! usual `1/sqrt(d)` factor is not applied: for differential entropy it only
//! shifts the estimate by a constant.

use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::features::FeatureSet;
use crate::seed;

#[derive(Debug, Error)]
pub enum ProjectionError {
    #[error("projection expects dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("projection shape must be at least 1x1, got {rows}x{cols}")]
    EmptyShape { rows: usize, cols: usize },
}

/// A `d x D` projection matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
    seed: Option<u64>,
}

impl ProjectionMatrix {
    /// Gaussian matrix reproducible from `(seed, rows, cols)`.
    pub fn gaussian(rows: usize, cols: usize, seed: u64) -> Result<Self, ProjectionError> {
        if rows == 0 || cols == 0 {
            return Err(ProjectionError::EmptyShape { rows, cols });
        }
        let mut rng = seed::rng(seed);
        let entries = StandardNormal.sample_iter(&mut rng).take(rows * cols).collect();
        Ok(Self { rows, cols, entries, seed: Some(seed) })
    }

    pub fn identity(dim: usize) -> Result<Self, ProjectionError> {
        if dim == 0 {
            return Err(ProjectionError::EmptyShape { rows: 0, cols: 0 });
        }
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1.0;
        }
        Ok(Self { rows: dim, cols: dim, entries, seed: None })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, ProjectionError> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        if rows.is_empty() || cols == 0 {
            return Err(ProjectionError::EmptyShape { rows: rows.len(), cols });
        }
        let mut entries = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(ProjectionError::DimensionMismatch { expected: cols, got: r.len() });
            }
            entries.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, entries, seed: None })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// `y = M x` for a single point.
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, m_row) in out.iter_mut().zip(self.entries.chunks_exact(self.cols)) {
            *o = m_row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

/// Shorthand for [`ProjectionMatrix::gaussian`].
pub fn gaussian_matrix(d: usize, dim: usize, seed: u64) -> Result<ProjectionMatrix, ProjectionError> {
    ProjectionMatrix::gaussian(d, dim, seed)
}

/// Project every row of `x`: `y_t = M x_t`.
pub fn project(m: &ProjectionMatrix, x: &FeatureSet) -> Result<FeatureSet, ProjectionError> {
    if m.cols != x.dim() {
        return Err(ProjectionError::DimensionMismatch { expected: m.cols, got: x.dim() });
    }
    let mut out = vec![0.0; x.len() * m.rows];
    for (row, dst) in x.rows().zip(out.chunks_exact_mut(m.rows)) {
        m.apply_into(row, dst);
    }
    Ok(x.with_values(out, m.rows))
}
